"""Math helpers that accept plain floats or tape variables.

Scene code is written once against these functions; with floats it runs without a
tape, with `Var` inputs it records onto the inputs' tape.
"""
import math
from typing import Optional, Sequence, Union

from .tape import Tape, Var, _sigmoid, _softplus_forward

Scalar = Union[float, Var]


def tape_of(*xs) -> Optional[Tape]:
    for x in xs:
        if isinstance(x, Var):
            return x.tape
    return None


def value(x: Scalar) -> float:
    return x.value if isinstance(x, Var) else float(x)


def exp(x: Scalar) -> Scalar:
    return x.tape.unary("exp", x) if isinstance(x, Var) else math.exp(x)


def log(x: Scalar) -> Scalar:
    return x.tape.unary("log", x) if isinstance(x, Var) else math.log(x)


def sqrt(x: Scalar) -> Scalar:
    return x.tape.unary("sqrt", x) if isinstance(x, Var) else math.sqrt(x)


def sin(x: Scalar) -> Scalar:
    return x.tape.unary("sin", x) if isinstance(x, Var) else math.sin(x)


def cos(x: Scalar) -> Scalar:
    return x.tape.unary("cos", x) if isinstance(x, Var) else math.cos(x)


def absolute(x: Scalar) -> Scalar:
    return x.tape.unary("abs", x) if isinstance(x, Var) else abs(x)


def reciprocal(x: Scalar) -> Scalar:
    return x.tape.unary("reciprocal", x) if isinstance(x, Var) else 1.0 / x


def power(x: Scalar, exponent: float) -> Scalar:
    return x.tape.power(x, exponent) if isinstance(x, Var) else x ** exponent


def clamp(x: Scalar, lower: float, upper: float) -> Scalar:
    if isinstance(x, Var):
        return x.tape.unary("clamp", x, lower, upper)
    return min(max(x, lower), upper)


def sigmoid(x: Scalar) -> Scalar:
    return x.tape.unary("sigmoid", x) if isinstance(x, Var) else _sigmoid(x)


def softplus(x: Scalar, sharpness: float) -> Scalar:
    if isinstance(x, Var):
        return x.tape.unary("softplus", x, sharpness)
    return _softplus_forward((x,), (sharpness,))


def relu(x: Scalar) -> Scalar:
    if isinstance(x, Var):
        return x.tape.unary("relu", x)
    return x if x > 0.0 else 0.0


def minimum(a: Scalar, b: Scalar) -> Scalar:
    tape = tape_of(a, b)
    if tape is None:
        return a if a <= b else b
    return tape.binary("min", a, b)


def maximum(a: Scalar, b: Scalar) -> Scalar:
    tape = tape_of(a, b)
    if tape is None:
        return a if a >= b else b
    return tape.binary("max", a, b)


def total(xs: Sequence[Scalar]) -> Scalar:
    """Sum with floats folded into one affine node."""
    variables = [x for x in xs if isinstance(x, Var)]
    offset = 0.0
    for x in xs:
        if not isinstance(x, Var):
            offset += x
    if not variables:
        return offset
    return variables[0].tape.affine(variables, [1.0] * len(variables), offset)


def dot(xs: Sequence[Scalar], ys: Sequence[Scalar]) -> Scalar:
    """Inner product; float zeros are skipped and float factors become affine coefficients."""
    var_a, var_b = [], []
    scaled, coeffs = [], []
    offset = 0.0
    for x, y in zip(xs, ys):
        x_var, y_var = isinstance(x, Var), isinstance(y, Var)
        if x_var and y_var:
            var_a.append(x)
            var_b.append(y)
        elif x_var:
            if y != 0.0:
                scaled.append(x)
                coeffs.append(y)
        elif y_var:
            if x != 0.0:
                scaled.append(y)
                coeffs.append(x)
        else:
            offset += x * y
    if not var_a and not scaled:
        return offset
    tape = (var_a or scaled)[0].tape
    if var_a and not scaled and offset == 0.0:
        return tape.dot(var_a, var_b)
    if not var_a:
        return tape.affine(scaled, coeffs, offset)
    return tape.affine([tape.dot(var_a, var_b)] + scaled, [1.0] + coeffs, offset)


def norm(xs: Sequence[Scalar]) -> Scalar:
    return sqrt(dot(xs, xs))


def is_finite(x: Scalar) -> bool:
    return math.isfinite(value(x))
