class WeaveError(Exception):
    """Base class for every error raised by weavesim."""
