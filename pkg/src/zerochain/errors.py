"""Exception types raised across the package."""


class DimensionError(ValueError):
    """A point, batch or seed has the wrong shape for the object it meets."""


class InfeasibleInstance(ValueError):
    """Requested accuracy is too coarse for the construction to exist.

    ``max_eps`` carries the largest accuracy for which it does.
    """

    def __init__(self, msg, max_eps=None):
        super().__init__(msg)
        self.max_eps = max_eps


class UnsupportedSeed(TypeError):
    """The seed distribution cannot be enumerated exactly."""
