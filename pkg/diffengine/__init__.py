from .checks import check_gradients, check_parameter_gradients
from .errors import GradientMismatch, InvalidOutput, NonFiniteValue, UnknownNode
from .optim import Adam
from .tape import GradientMap, Tape, Var, backward

__all__ = [
    "Adam",
    "GradientMap",
    "GradientMismatch",
    "InvalidOutput",
    "NonFiniteValue",
    "Tape",
    "UnknownNode",
    "Var",
    "backward",
    "check_gradients",
    "check_parameter_gradients",
]
