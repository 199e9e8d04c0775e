import math
from typing import Callable, Dict, Hashable, Iterator, List, Mapping, Sequence, Tuple, Union

import numpy as np

from .errors import InvalidOutput, UnknownNode

Number = Union[int, float]


# Each primitive is (forward, local): forward(values, consts) -> float and
# local(values, consts, out) -> partial derivative per input.

def _affine_forward(v, c):
    total = c[0]
    for k, x in enumerate(v):
        total += c[k + 1] * x
    return total


def _dot_forward(v, c):
    n = len(v) // 2
    total = 0.0
    for k in range(n):
        total += v[k] * v[n + k]
    return total


def _sigmoid(x: float) -> float:
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _softplus_forward(v, c):
    kx = c[0] * v[0]
    if kx > 30.0:
        return v[0] + math.log1p(math.exp(-kx)) / c[0]
    return math.log1p(math.exp(kx)) / c[0]


def _sign(x: float) -> float:
    if x > 0.0:
        return 1.0
    if x < 0.0:
        return -1.0
    return 0.0


PRIMITIVES: Dict[str, Tuple[Callable, Callable]] = {
    "affine": (_affine_forward, lambda v, c, out: c[1:]),
    "dot": (_dot_forward, lambda v, c, out: tuple(v[len(v) // 2:]) + tuple(v[:len(v) // 2])),
    "mul": (lambda v, c: v[0] * v[1], lambda v, c, out: (v[1], v[0])),
    "div": (lambda v, c: v[0] / v[1], lambda v, c, out: (1.0 / v[1], -out / v[1])),
    "exp": (lambda v, c: math.exp(v[0]), lambda v, c, out: (out,)),
    "log": (lambda v, c: math.log(v[0]), lambda v, c, out: (1.0 / v[0],)),
    "sqrt": (lambda v, c: math.sqrt(v[0]), lambda v, c, out: (0.5 / out if out > 0.0 else math.inf,)),
    "sin": (lambda v, c: math.sin(v[0]), lambda v, c, out: (math.cos(v[0]),)),
    "cos": (lambda v, c: math.cos(v[0]), lambda v, c, out: (-math.sin(v[0]),)),
    # ties route to the first argument
    "min": (lambda v, c: v[0] if v[0] <= v[1] else v[1],
            lambda v, c, out: (1.0, 0.0) if v[0] <= v[1] else (0.0, 1.0)),
    "max": (lambda v, c: v[0] if v[0] >= v[1] else v[1],
            lambda v, c, out: (1.0, 0.0) if v[0] >= v[1] else (0.0, 1.0)),
    "abs": (lambda v, c: abs(v[0]), lambda v, c, out: (_sign(v[0]),)),
    "power": (lambda v, c: v[0] ** c[0],
              lambda v, c, out: (c[0] * v[0] ** (c[0] - 1.0) if c[0] != 0.0 else 0.0,)),
    "reciprocal": (lambda v, c: 1.0 / v[0], lambda v, c, out: (-out * out,)),
    "clamp": (lambda v, c: min(max(v[0], c[0]), c[1]),
              lambda v, c, out: (1.0 if c[0] <= v[0] <= c[1] else 0.0,)),
    "sigmoid": (lambda v, c: _sigmoid(v[0]), lambda v, c, out: (out * (1.0 - out),)),
    "softplus": (_softplus_forward, lambda v, c, out: (_sigmoid(c[0] * v[0]),)),
    "relu": (lambda v, c: v[0] if v[0] > 0.0 else 0.0, lambda v, c, out: (1.0 if v[0] > 0.0 else 0.0,)),
}

LEAF_KINDS = ("const", "param")


class Var:
    """A scalar node on a tape. Arithmetic with floats folds the float into the node."""

    __slots__ = ("tape", "id", "value")

    def __init__(self, tape: "Tape", node_id: int, value: float):
        self.tape = tape
        self.id = node_id
        self.value = value

    def __add__(self, other):
        return self.tape.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return self.tape.sub(self, other)

    def __rsub__(self, other):
        return self.tape.sub(other, self)

    def __mul__(self, other):
        return self.tape.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self.tape.div(self, other)

    def __rtruediv__(self, other):
        return self.tape.div(other, self)

    def __neg__(self):
        return self.tape.affine([self], [-1.0])

    def __pow__(self, exponent: Number):
        return self.tape.power(self, float(exponent))

    def __float__(self) -> float:
        return float(self.value)

    def exp(self):
        return self.tape.unary("exp", self)

    def log(self):
        return self.tape.unary("log", self)

    def sqrt(self):
        return self.tape.unary("sqrt", self)

    def sin(self):
        return self.tape.unary("sin", self)

    def cos(self):
        return self.tape.unary("cos", self)

    def __abs__(self):
        return self.tape.unary("abs", self)

    def __repr__(self) -> str:
        return f"Var(id={self.id}, value={self.value!r})"


class GradientMap(Mapping):
    """Accumulated partial derivatives keyed by parameter handle; unknown handles read as 0."""

    def __init__(self, grads: Dict[Hashable, float]):
        self._grads = grads

    def __getitem__(self, handle: Hashable) -> float:
        return self._grads.get(handle, 0.0)

    def __iter__(self) -> Iterator[Hashable]:
        return iter(self._grads)

    def __len__(self) -> int:
        return len(self._grads)

    def __contains__(self, handle) -> bool:
        return handle in self._grads

    def group(self, name: str) -> Dict[int, float]:
        """Gradients of handles shaped (name, flat_index)."""
        return {h[1]: g for h, g in self._grads.items()
                if isinstance(h, tuple) and len(h) == 2 and h[0] == name}

    def dense(self, name: str, shape) -> np.ndarray:
        out = np.zeros(int(np.prod(shape)), dtype=np.float64)
        for index, g in self.group(name).items():
            out[index] += g
        return out.reshape(shape)


class Tape:
    """Append-only record of scalar operations. Node ids are topologically ordered."""

    def __init__(self):
        self.kinds: List[str] = []
        self.inputs: List[Tuple[int, ...]] = []
        self.consts: List[Tuple[float, ...]] = []
        self.values: List[float] = []
        self.partials: List[Tuple[float, ...]] = []
        self.registry: Dict[Hashable, int] = {}

    def __len__(self) -> int:
        return len(self.values)

    def _push(self, kind: str, inputs: Tuple[int, ...], consts: Tuple[float, ...],
              value: float, partials: Tuple[float, ...]) -> Var:
        node_id = len(self.values)
        self.kinds.append(kind)
        self.inputs.append(inputs)
        self.consts.append(consts)
        self.values.append(value)
        self.partials.append(partials)
        return Var(self, node_id, value)

    def _record(self, kind: str, args: Sequence[Var], consts: Tuple[float, ...] = ()) -> Var:
        forward, local = PRIMITIVES[kind]
        vals = tuple(a.value for a in args)
        out = forward(vals, consts)
        return self._push(kind, tuple(a.id for a in args), consts, out, tuple(local(vals, consts, out)))

    # leaves

    def constant(self, value: Number) -> Var:
        return self._push("const", (), (float(value),), float(value), ())

    def parameter(self, handle: Hashable, value: Number) -> Var:
        """Leaf registered under `handle`; repeated calls return the same node."""
        node_id = self.registry.get(handle)
        if node_id is not None:
            return Var(self, node_id, self.values[node_id])
        var = self._push("param", (), (float(value),), float(value), ())
        self.registry[handle] = var.id
        return var

    # primitives

    def affine(self, xs: Sequence[Var], coeffs: Sequence[float], offset: float = 0.0) -> Var:
        return self._record("affine", xs, (float(offset),) + tuple(float(c) for c in coeffs))

    def unary(self, kind: str, x: Var, *consts: float) -> Var:
        return self._record(kind, (x,), tuple(float(c) for c in consts))

    def add(self, a, b):
        if isinstance(a, Var) and isinstance(b, Var):
            return self.affine((a, b), (1.0, 1.0))
        if isinstance(a, Var):
            return self.affine((a,), (1.0,), b)
        return self.affine((b,), (1.0,), a)

    def sub(self, a, b):
        if isinstance(a, Var) and isinstance(b, Var):
            return self.affine((a, b), (1.0, -1.0))
        if isinstance(a, Var):
            return self.affine((a,), (1.0,), -b)
        return self.affine((b,), (-1.0,), a)

    def mul(self, a, b):
        if isinstance(a, Var) and isinstance(b, Var):
            return self._record("mul", (a, b))
        if isinstance(a, Var):
            return self.affine((a,), (b,))
        return self.affine((b,), (a,))

    def div(self, a, b):
        if isinstance(b, Var):
            if isinstance(a, Var):
                return self._record("div", (a, b))
            return self.affine((self.unary("reciprocal", b),), (a,))
        return self.affine((a,), (1.0 / b,))

    def power(self, x: Var, exponent: float) -> Var:
        return self.unary("power", x, exponent)

    def binary(self, kind: str, a, b) -> Var:
        a = a if isinstance(a, Var) else self.constant(a)
        b = b if isinstance(b, Var) else self.constant(b)
        return self._record(kind, (a, b))

    def dot(self, xs: Sequence[Var], ys: Sequence[Var]) -> Var:
        return self._record("dot", tuple(xs) + tuple(ys))

    def replay(self) -> List[float]:
        """Recompute every node from the recorded graph."""
        values: List[float] = []
        for kind, inputs, consts in zip(self.kinds, self.inputs, self.consts):
            if kind in LEAF_KINDS:
                values.append(consts[0])
                continue
            forward, _ = PRIMITIVES[kind]
            values.append(forward(tuple(values[j] for j in inputs), consts))
        return values


def backward(tape: Tape, output) -> GradientMap:
    """Reverse sweep from `output`; returns d output / d p for every registered parameter."""
    if not isinstance(output, Var):
        raise InvalidOutput(f"backward needs a scalar tape node, got {type(output).__name__}")
    if output.tape is not tape or not 0 <= output.id < len(tape.values):
        raise UnknownNode(f"node {output.id} is not on this tape")
    adjoint = [0.0] * (output.id + 1)
    adjoint[output.id] = 1.0
    inputs, partials = tape.inputs, tape.partials
    for i in range(output.id, -1, -1):
        g = adjoint[i]
        if g == 0.0:
            continue
        for j, p in zip(inputs[i], partials[i]):
            adjoint[j] += g * p
    grads = {handle: (adjoint[node_id] if node_id <= output.id else 0.0)
             for handle, node_id in tape.registry.items()}
    return GradientMap(grads)
