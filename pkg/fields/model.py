import logging
from enum import Enum
from typing import Dict, Hashable, Iterable, List, NamedTuple, Optional, Sequence

import numpy as np

from diffengine import ops
from diffengine.tape import Tape

from .decoders import MlpDecoder
from .encoding import PositionalEncoding
from .errors import DegenerateNormal, InvalidRange, InvalidWidth
from .grids import DenseGrid, MultiResGrid, grid_resolutions, trilinear_interp

# dense storage above this many grid entries is refused
MAX_GRID_ENTRIES = 1 << 28


class Stage(str, Enum):
    COARSE = "coarse-only"
    FULL = "full"


class SdfEval(NamedTuple):
    sdf: ops.Scalar
    grad: Optional[List[ops.Scalar]]
    z_coarse: List[ops.Scalar]
    z_fine: Optional[List[ops.Scalar]]


class PointEval(NamedTuple):
    sdf: ops.Scalar
    normal: List[ops.Scalar]
    color: Optional[List[ops.Scalar]]
    degenerate: bool


def param_group(name: str) -> str:
    """'fine_grid.3' -> 'fine_grid', 'decoder_color.weight.1' -> 'decoder_color'."""
    return name.split(".", 1)[0]


def free_space_sign(sign_convention: str) -> float:
    return -1.0 if sign_convention == "inside-positive" else 1.0


class BoundField:
    """A field evaluated through one tape (or with plain floats when tape is None)."""

    sign_convention = "inside-positive"

    def sdf(self, x: Sequence[ops.Scalar], stage: Stage, with_grad: bool = False) -> SdfEval:
        raise NotImplementedError

    def color(self, x, normal, view_dir, evaluated: SdfEval, stage: Stage) -> List[ops.Scalar]:
        raise NotImplementedError

    def beta(self) -> Optional[ops.Scalar]:
        return None

    def normal(self, grad: Sequence[ops.Scalar]) -> List[ops.Scalar]:
        """Unit normal pointing into free space."""
        length = ops.norm(grad)
        if ops.value(length) < 1e-9:
            raise DegenerateNormal(f"gradient norm {ops.value(length):.3e} below 1e-9")
        scale = ops.reciprocal(length) * free_space_sign(self.sign_convention)
        return [g * scale for g in grad]

    def evaluate(self, x: Sequence[ops.Scalar], view_dir: Sequence[ops.Scalar], stage: Stage,
                 with_color: bool = True) -> PointEval:
        evaluated = self.sdf(x, stage, with_grad=True)
        degenerate = False
        try:
            normal = self.normal(evaluated.grad)
        except DegenerateNormal:
            normal, degenerate = [0.0, 0.0, 0.0], True
        color = self.color(x, normal, view_dir, evaluated, stage) if with_color else None
        return PointEval(evaluated.sdf, normal, color, degenerate)


class SceneModel:
    """Coarse grid + decoder, fine multi-resolution residual, colour grids + decoder."""

    def __init__(self, config, coarse_grid: Optional[DenseGrid], fine_grids: MultiResGrid,
                 color_grids: Optional[MultiResGrid], decoder_coarse: MlpDecoder, decoder_fine: MlpDecoder,
                 decoder_color: MlpDecoder, beta: Optional[np.ndarray] = None):
        self.config = config
        self.sign_convention = config.sign_convention
        self.position_encoding = PositionalEncoding(config.position_encoding_levels)
        self.direction_encoding = PositionalEncoding(config.direction_encoding_levels)
        self.coarse_grid = coarse_grid
        self.fine_grids = fine_grids
        self.color_grids = color_grids
        self.decoder_coarse = decoder_coarse
        self.decoder_fine = decoder_fine
        self.decoder_color = decoder_color
        self.beta = beta
        self.init_report: Dict[str, float] = {}
        self._check_widths()
        self.params: Dict[str, np.ndarray] = self._collect()

    def _check_widths(self) -> None:
        enc = self.position_encoding.output_dim(3)
        geo = self.config.geo_feature_dim
        coarse_in = enc + (self.coarse_grid.feature_dim if self.coarse_grid is not None else 0)
        fine_in = enc + self.fine_grids.feature_dim
        color_in = (6 + self.direction_encoding.output_dim(3) + 2 * geo
                    + (self.color_grids.feature_dim if self.color_grids is not None else 0))
        expected = [(self.decoder_coarse, coarse_in, 1 + geo), (self.decoder_fine, fine_in, 1 + geo),
                    (self.decoder_color, color_in, 3)]
        for decoder, width_in, width_out in expected:
            if decoder.widths[0] != width_in or decoder.widths[-1] != width_out:
                raise InvalidWidth(f"decoder {decoder.name} must map {width_in} -> {width_out}, "
                                   f"got {decoder.widths[0]} -> {decoder.widths[-1]}")

    def _collect(self) -> Dict[str, np.ndarray]:
        params = {}
        if self.coarse_grid is not None:
            params[self.coarse_grid.name] = self.coarse_grid.values
        for grid in self.fine_grids.levels:
            params[grid.name] = grid.values
        if self.color_grids is not None:
            for grid in self.color_grids.levels:
                params[grid.name] = grid.values
        for decoder in (self.decoder_coarse, self.decoder_fine, self.decoder_color):
            params.update(decoder.parameters())
        if self.beta is not None:
            params["beta"] = self.beta
        return params

    # parameter store

    def get(self, handle: Hashable) -> float:
        name, index = handle
        return float(self.params[name].reshape(-1)[index])

    def set(self, handle: Hashable, new_value: float) -> None:
        name, index = handle
        self.params[name].reshape(-1)[index] = new_value

    def arrays(self) -> Dict[str, np.ndarray]:
        return {name: array.copy() for name, array in self.params.items()}

    def load_arrays(self, arrays: Dict[str, np.ndarray]) -> None:
        """Overwrite every parameter in place; shapes must match."""
        for name, array in self.params.items():
            if arrays[name].shape != array.shape:
                raise InvalidWidth(f"parameter {name}: expected {array.shape}, got {arrays[name].shape}")
            array[...] = arrays[name]

    @classmethod
    def from_arrays(cls, config, arrays: Dict[str, np.ndarray]) -> "SceneModel":
        model = build_model(config, None)
        model.load_arrays(arrays)
        return model

    def bind(self, tape: Optional[Tape] = None, trainable: Iterable[str] = ()) -> "BoundModel":
        return BoundModel(self, tape, trainable)

    # vectorised inference

    def sdf_batch(self, points: np.ndarray, stage: Stage = Stage.FULL) -> np.ndarray:
        from .batch import sdf_batch
        return sdf_batch(self, points, stage)[0]

    def gradient_batch(self, points: np.ndarray, stage: Stage = Stage.FULL) -> np.ndarray:
        from .batch import sdf_batch
        return sdf_batch(self, points, stage, with_grad=True)[1]

    def color_batch(self, points: np.ndarray, view_dirs: np.ndarray, stage: Stage = Stage.FULL) -> np.ndarray:
        from .batch import color_batch
        return color_batch(self, points, view_dirs, stage)

    def shade_batch(self, points: np.ndarray, view_dirs: np.ndarray, stage: Stage = Stage.FULL,
                    with_color: bool = True):
        from .batch import shade_batch
        return shade_batch(self, points, view_dirs, stage, with_color)


class BoundModel(BoundField):
    """SceneModel read through a tape; parameters of `trainable` groups become tape leaves."""

    def __init__(self, model: SceneModel, tape: Optional[Tape] = None, trainable: Iterable[str] = ()):
        self.model = model
        self.tape = tape
        self.sign_convention = model.sign_convention
        self.trainable = frozenset(trainable) if tape is not None else frozenset()
        self._matrices: Dict[str, list] = {}
        self._vectors: Dict[str, list] = {}

    def _live(self, name: str) -> bool:
        return param_group(name) in self.trainable

    def matrix(self, name: str, array: np.ndarray) -> list:
        rows = self._matrices.get(name)
        if rows is None:
            if self._live(name):
                cols = array.shape[1]
                rows = [[self.tape.parameter((name, r * cols + c), array[r, c]) for c in range(cols)]
                        for r in range(array.shape[0])]
            else:
                rows = array.tolist()
            self._matrices[name] = rows
        return rows

    def vector(self, name: str, array: np.ndarray) -> list:
        entries = self._vectors.get(name)
        if entries is None:
            if self._live(name):
                entries = [self.tape.parameter((name, i), v) for i, v in enumerate(array.tolist())]
            else:
                entries = array.tolist()
            self._vectors[name] = entries
        return entries

    def grid_features(self, grid: DenseGrid, i: int, j: int, k: int) -> List[ops.Scalar]:
        row = grid.values[i, j, k]
        if not self._live(grid.name):
            return row.tolist()
        res, dim = grid.resolution, grid.feature_dim
        base = ((i * res + j) * res + k) * dim
        return [self.tape.parameter((grid.name, base + f), row[f]) for f in range(dim)]

    def beta(self) -> Optional[ops.Scalar]:
        if self.model.beta is None:
            return None
        return self.vector("beta", self.model.beta)[0]

    def sdf(self, x: Sequence[ops.Scalar], stage: Stage, with_grad: bool = False) -> SdfEval:
        model = self.model
        enc, enc_jets = model.position_encoding.encode(x, with_jet=with_grad)
        inputs = list(enc)
        jets = [list(j) for j in enc_jets] if with_grad else None
        if model.coarse_grid is not None:
            self._append_features(model.coarse_grid, x, inputs, jets)
        out, out_jets = model.decoder_coarse.forward(self, inputs, jets)
        s = out[0]
        grad = list(out_jets) if with_grad else None
        z_fine = None
        if stage is Stage.FULL:
            inputs = list(enc)
            jets = [list(j) for j in enc_jets] if with_grad else None
            for grid in model.fine_grids.levels:
                self._append_features(grid, x, inputs, jets)
            fine, fine_jets = model.decoder_fine.forward(self, inputs, jets)
            s = s + fine[0]
            z_fine = fine[1:]
            if with_grad:
                grad = [grad[d] + fine_jets[d] for d in range(3)]
        return SdfEval(s, grad, out[1:], z_fine)

    def _append_features(self, grid: DenseGrid, x, inputs: list, jets: Optional[list]) -> None:
        if jets is None:
            inputs.extend(trilinear_interp(grid, x, self))
            return
        features, feature_jets = trilinear_interp(grid, x, self, with_jet=True)
        inputs.extend(features)
        for d in range(3):
            jets[d].extend(feature_jets[d])

    def color(self, x, normal, view_dir, evaluated: SdfEval, stage: Stage) -> List[ops.Scalar]:
        model = self.model
        geo = model.config.geo_feature_dim
        z_fine = evaluated.z_fine if stage is Stage.FULL and evaluated.z_fine is not None else [0.0] * geo
        inputs = list(x) + list(normal) + model.direction_encoding(view_dir)
        inputs += list(evaluated.z_coarse) + list(z_fine)
        if model.color_grids is not None:
            for grid in model.color_grids.levels:
                inputs.extend(trilinear_interp(grid, x, self))
        out, _ = model.decoder_color.forward(self, inputs)
        return out


def bind(field) -> BoundField:
    return field if isinstance(field, BoundField) else field.bind()


def eval_sdf(model, x: Sequence[ops.Scalar], stage: Stage = Stage.FULL):
    """(ŝ, z_coarse, z_fine or None)."""
    evaluated = bind(model).sdf(x, stage)
    return evaluated.sdf, evaluated.z_coarse, evaluated.z_fine


def eval_normal(model, x: Sequence[ops.Scalar], stage: Stage = Stage.FULL) -> List[ops.Scalar]:
    bound = bind(model)
    return bound.normal(bound.sdf(x, stage, with_grad=True).grad)


def eval_color(model, x: Sequence[ops.Scalar], view_dir: Sequence[ops.Scalar],
               stage: Stage = Stage.FULL) -> List[ops.Scalar]:
    bound = bind(model)
    evaluated = bound.sdf(x, stage, with_grad=True)
    normal = bound.normal(evaluated.grad)
    return bound.color(x, normal, view_dir, evaluated, stage)


def _allocate(name: str, shape, rng: Optional[np.random.Generator], std: float) -> DenseGrid:
    if int(np.prod(shape)) > MAX_GRID_ENTRIES:
        raise InvalidRange(f"grid {name} with shape {shape} is too large for dense storage")
    if rng is None or std == 0.0:
        return DenseGrid(name, np.zeros(shape))
    return DenseGrid(name, rng.normal(0.0, std, size=shape))


def build_model(config, seed: Optional[int]) -> SceneModel:
    """Allocate every component. With seed None all values are zero, ready for `load_arrays`."""
    rng = np.random.default_rng(seed) if seed is not None else None
    mc = config.model
    geo = mc.geo_feature_dim
    coarse_grid = None
    if mc.use_coarse_grid:
        r = mc.coarse_resolution
        coarse_grid = _allocate("coarse_grid", (r, r, r, mc.coarse_feature_dim), rng, mc.coarse_grid_init_std)
    fine_res = grid_resolutions(mc.fine_min_resolution, mc.fine_max_resolution, mc.fine_levels)
    fine_grids = MultiResGrid([_allocate(f"fine_grid.{l}", (r, r, r, mc.fine_feature_dim), rng,
                                         mc.fine_grid_init_std) for l, r in enumerate(fine_res)])
    color_grids = None
    if mc.use_color_grids:
        color_res = grid_resolutions(mc.color_min_resolution, mc.color_max_resolution, mc.color_levels)
        color_grids = MultiResGrid([_allocate(f"color_grid.{l}", (r, r, r, mc.color_feature_dim), None, 0.0)
                                    for l, r in enumerate(color_res)])
    enc = 3 * (1 + 2 * mc.position_encoding_levels)
    coarse_in = enc + (mc.coarse_feature_dim if mc.use_coarse_grid else 0)
    fine_in = enc + fine_grids.feature_dim
    color_in = 6 + 3 * (1 + 2 * mc.direction_encoding_levels) + 2 * geo + (
        color_grids.feature_dim if color_grids is not None else 0)
    init_rng = rng if rng is not None else np.random.default_rng(0)
    geometry = {"hidden_activation": "softplus", "sharpness": mc.softplus_sharpness}
    decoder_coarse = MlpDecoder.initialize("decoder_coarse", [coarse_in, mc.coarse_hidden, 1 + geo],
                                           init_rng, **geometry)
    decoder_fine = MlpDecoder.initialize(
        "decoder_fine", [fine_in] + [mc.fine_hidden] * mc.fine_hidden_layers + [1 + geo], init_rng,
        zero_output=True, **geometry)
    decoder_color = MlpDecoder.initialize(
        "decoder_color", [color_in] + [mc.color_hidden] * mc.color_hidden_layers + [3], init_rng,
        hidden_activation="relu", output_activation="sigmoid")
    beta = None
    if config.rendering.beta_mode == "global":
        beta = np.array([config.rendering.fixed_beta])
    return SceneModel(mc, coarse_grid, fine_grids, color_grids, decoder_coarse, decoder_fine, decoder_color, beta)


def init_model(config, seed: int) -> SceneModel:
    """Seeded model whose coarse branch is pre-fit to a centred sphere."""
    from .sphere import fit_sphere

    model = build_model(config, seed)
    fit_sphere(model, np.random.default_rng([seed, 1]))
    logging.info(f"Initialized scene model with {sum(a.size for a in model.params.values())} parameters, "
                 f"sphere fit error {model.init_report['error']:.4f} "
                 f"after {model.init_report['iterations']} iterations")
    return model
