from utils.errors import SlamError


class InvalidLevelCount(SlamError):
    pass


class InvalidRange(SlamError):
    pass


class InvalidWidth(SlamError):
    pass


class DegenerateNormal(SlamError):
    pass


class InitializationFailed(SlamError):
    pass
