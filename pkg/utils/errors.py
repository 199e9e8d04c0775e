class SlamError(Exception):
    """Base class for every error raised by this project."""
