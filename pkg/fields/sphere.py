import logging

import numpy as np

from diffengine.optim import Adam

from .batch import coarse_inputs, sdf_batch
from .errors import InitializationFailed
from .model import SceneModel, Stage


def sphere_sdf(points: np.ndarray, radius: float, sign_convention: str) -> np.ndarray:
    inside_positive = radius - np.linalg.norm(points, axis=1)
    return inside_positive if sign_convention == "inside-positive" else -inside_positive


def _hidden_features(decoder, inputs: np.ndarray) -> np.ndarray:
    h = inputs
    for k in range(decoder.layer_count - 1):
        h, _ = decoder._hidden(h @ decoder.weights[k].T + decoder.biases[k])
    return h


def _solve_output_row(decoder, inputs: np.ndarray, target: np.ndarray) -> None:
    """Least-squares fit of the SDF output row with the hidden layers held fixed."""
    hidden = _hidden_features(decoder, inputs)
    design = np.hstack([hidden, np.ones((len(hidden), 1))])
    ridge = 1e-6 * np.eye(design.shape[1])
    solution = np.linalg.solve(design.T @ design + ridge, design.T @ target)
    decoder.weights[-1][0] = solution[:-1]
    decoder.biases[-1][0] = solution[-1]


def fit_sphere(model: SceneModel, rng: np.random.Generator) -> None:
    """Regress the coarse SDF onto a centred sphere; records model.init_report."""
    config = model.config
    points = rng.uniform(-1.0, 1.0, size=(config.init_points, 3))
    target = sphere_sdf(points, config.init_sphere_radius, model.sign_convention)
    decoder = model.decoder_coarse
    inputs, _, _, _ = coarse_inputs(model, points)
    _solve_output_row(decoder, inputs, target)

    optimizer = Adam()
    iterations = 0
    error = float(np.mean(np.abs(decoder.forward_batch(inputs)[0][:, 0] - target)))
    while error >= config.init_tolerance and iterations < config.init_max_iterations:
        out, _ = decoder.forward_batch(inputs)
        grad_out = np.zeros_like(out)
        grad_out[:, 0] = 2.0 * (out[:, 0] - target) / len(points)
        for name, grad in decoder.regression_gradients(inputs, grad_out).items():
            optimizer.step(name, model.params[name], grad, config.init_learning_rate)
        iterations += 1
        error = float(np.mean(np.abs(decoder.forward_batch(inputs)[0][:, 0] - target)))

    # held-out check on fresh points through the full coarse path
    probe = rng.uniform(-1.0, 1.0, size=(config.init_points, 3))
    probe_error = float(np.mean(np.abs(
        sdf_batch(model, probe, Stage.COARSE)[0] - sphere_sdf(probe, config.init_sphere_radius,
                                                               model.sign_convention))))
    model.init_report = {"error": error, "probe_error": probe_error, "iterations": iterations}
    if error > config.init_fail_tolerance:
        raise InitializationFailed(
            f"sphere pre-fit stopped at mean error {error:.4f} after {iterations} iterations "
            f"(limit {config.init_fail_tolerance})")
    if error >= config.init_tolerance:
        logging.warning(f"Sphere pre-fit hit the iteration cap with mean error {error:.4f}")
