import math
from typing import Callable, Hashable, Iterable, Protocol, Sequence

from .errors import NonFiniteValue
from .ops import value
from .tape import Tape, Var, backward

Program = Callable[[Tape, Sequence[Var]], Var]
Objective = Callable[[Tape], Var]


class ParameterStore(Protocol):
    def get(self, handle: Hashable) -> float: ...

    def set(self, handle: Hashable, new_value: float) -> None: ...


def _finite(x: float, what: str) -> float:
    if not math.isfinite(x):
        raise NonFiniteValue(f"non-finite {what}: {x}")
    return x


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(1.0, abs(numeric))


def _evaluate(program: Program, inputs: Sequence[float]) -> float:
    tape = Tape()
    leaves = [tape.parameter(("input", i), x) for i, x in enumerate(inputs)]
    return _finite(value(program(tape, leaves)), "program value")


def check_gradients(program: Program, inputs: Sequence[float], step: float = 1e-6) -> float:
    """Max relative error between reverse-mode and central-difference gradients."""
    tape = Tape()
    leaves = [tape.parameter(("input", i), x) for i, x in enumerate(inputs)]
    output = program(tape, leaves)
    _finite(value(output), "program value")
    grads = backward(tape, output)
    worst = 0.0
    for i, x in enumerate(inputs):
        shifted_up = list(inputs)
        shifted_down = list(inputs)
        shifted_up[i] = x + step
        shifted_down[i] = x - step
        numeric = (_evaluate(program, shifted_up) - _evaluate(program, shifted_down)) / (2.0 * step)
        analytic = _finite(grads[("input", i)], "gradient")
        worst = max(worst, relative_error(analytic, numeric))
    return worst


def check_parameter_gradients(objective: Objective, store: ParameterStore,
                              handles: Iterable[Hashable], step: float = 1e-6) -> float:
    """Same comparison for parameters owned by `store`, which the objective reads on each call."""
    tape = Tape()
    output = objective(tape)
    _finite(value(output), "objective value")
    grads = backward(tape, output)
    worst = 0.0
    for handle in handles:
        original = store.get(handle)
        try:
            store.set(handle, original + step)
            up = _finite(value(objective(Tape())), "objective value")
            store.set(handle, original - step)
            down = _finite(value(objective(Tape())), "objective value")
        finally:
            store.set(handle, original)
        numeric = (up - down) / (2.0 * step)
        worst = max(worst, relative_error(_finite(grads[handle], "gradient"), numeric))
    return worst
