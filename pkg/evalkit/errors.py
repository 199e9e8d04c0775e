from utils.errors import SlamError


class InsufficientMatches(SlamError):
    pass


class DegenerateGeometry(SlamError):
    pass


class EmptyMesh(SlamError):
    pass


class InvalidMesh(SlamError):
    pass


class DimensionMismatch(SlamError):
    pass
