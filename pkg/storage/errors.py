from utils.errors import SlamError


class ParseError(SlamError):
    def __init__(self, line: int, detail: str):
        super().__init__(f"line {line}: {detail}")
        self.line = line


class NotACheckpoint(SlamError):
    pass


class UnsupportedVersion(SlamError):
    pass


class CorruptCheckpoint(SlamError):
    pass
