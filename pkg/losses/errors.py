from utils.errors import SlamError


class EmptyBatch(SlamError):
    pass


class MissingCue(SlamError):
    pass


class DegenerateDepth(SlamError):
    pass


class NonFiniteLoss(SlamError):
    def __init__(self, term: str, value: float):
        super().__init__(f"loss term {term} is not finite ({value})")
        self.term = term
        self.value = value
