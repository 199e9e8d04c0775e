from .decoders import MlpDecoder
from .encoding import PositionalEncoding, positional_encoding
from .errors import DegenerateNormal, InitializationFailed, InvalidLevelCount, InvalidRange, InvalidWidth
from .grids import DenseGrid, MultiResGrid, grid_resolutions, trilinear_batch, trilinear_interp
from .model import (
    BoundField,
    BoundModel,
    PointEval,
    SceneModel,
    SdfEval,
    Stage,
    bind,
    build_model,
    eval_color,
    eval_normal,
    eval_sdf,
    init_model,
    param_group,
)

__all__ = [
    "BoundField",
    "BoundModel",
    "DegenerateNormal",
    "DenseGrid",
    "InitializationFailed",
    "InvalidLevelCount",
    "InvalidRange",
    "InvalidWidth",
    "MlpDecoder",
    "MultiResGrid",
    "PointEval",
    "PositionalEncoding",
    "SceneModel",
    "SdfEval",
    "Stage",
    "bind",
    "build_model",
    "eval_color",
    "eval_normal",
    "eval_sdf",
    "grid_resolutions",
    "init_model",
    "param_group",
    "positional_encoding",
    "trilinear_batch",
    "trilinear_interp",
]
