from utils.errors import SlamError


class PixelOutOfRange(SlamError):
    pass


class InvalidBounds(SlamError):
    pass


class InvalidBeta(SlamError):
    pass
