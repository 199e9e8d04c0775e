from utils.errors import SlamError


class InvalidScene(SlamError):
    pass
