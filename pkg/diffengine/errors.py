from utils.errors import SlamError


class InvalidOutput(SlamError):
    pass


class UnknownNode(SlamError):
    pass


class NonFiniteValue(SlamError):
    pass


class GradientMismatch(SlamError):
    """Reverse-mode and finite-difference gradients disagree beyond tolerance."""
