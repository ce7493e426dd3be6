"""Exception types shared by the solvers."""


class DomainError(ValueError):
    """An argument lies outside the domain of a function."""


class RegionError(ValueError):
    """A market point lies outside the region a formula is valid in."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to converge or to bracket a root."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics
