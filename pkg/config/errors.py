from utils.errors import SlamError


class UnknownKey(SlamError):
    pass


class BadValue(SlamError):
    pass


class UnknownPreset(SlamError):
    pass
