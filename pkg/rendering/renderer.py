from typing import List, NamedTuple

from diffengine import ops
from fields.model import Stage, bind

from .camera import Ray
from .density import BetaSchedule, sdf_to_density
from .sampling import SampleSet


class RenderResult(NamedTuple):
    color: List[ops.Scalar]
    depth: ops.Scalar
    normal: List[ops.Scalar]
    weights: List[ops.Scalar]
    transmittance: List[ops.Scalar]
    opacity: ops.Scalar
    points: List[List[float]]
    degenerate: int


def render_ray(field, ray: Ray, samples: SampleSet, schedule: BetaSchedule, stage: Stage,
               with_color: bool = True) -> RenderResult:
    """Alpha-composite colour, depth and normal along one ray.

    Samples whose normal is degenerate contribute zero to the normal (and feed a
    zero normal to the colour decoder); `degenerate` counts them.
    """
    bound = bind(field)
    colors, depths, normals, weights, transmittance = [], [], [], [], []
    points = []
    t_running: ops.Scalar = 1.0
    degenerate = 0
    for t, delta in zip(samples.t.tolist(), samples.delta.tolist()):
        x = ray.at(t)
        points.append([ops.value(c) for c in x])
        evaluated = bound.evaluate(x, ray.direction, stage, with_color=with_color)
        degenerate += evaluated.degenerate
        beta = schedule.at(x, bound)
        sigma = sdf_to_density(evaluated.sdf, beta)
        alpha = 1.0 - ops.exp(-(sigma * delta))
        w = t_running * alpha
        transmittance.append(t_running)
        weights.append(w)
        depths.append(w * t)
        normals.append([w * n for n in evaluated.normal])
        if with_color:
            colors.append([w * c for c in evaluated.color])
        t_running = t_running * (1.0 - alpha)
    color = [ops.total([c[k] for c in colors]) for k in range(3)] if with_color else [0.0, 0.0, 0.0]
    normal = [ops.total([n[k] for n in normals]) for k in range(3)]
    return RenderResult(color, ops.total(depths), normal, weights, transmittance, ops.total(weights),
                        points, degenerate)
