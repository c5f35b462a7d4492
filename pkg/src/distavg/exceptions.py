"""Exception types raised by distavg."""


class GraphError(ValueError):
    """A graph does not satisfy the structural precondition of an operation."""


class NonErgodicError(ValueError):
    """The eigenvalue 1 of an update matrix is not simple."""


class UnscalableError(ValueError):
    """The stationary vector has zero entries, so initial values cannot be rescaled."""


class EigenSolverError(RuntimeError):
    """Eigendecomposition did not meet the residual contract."""


class ConvergenceTimeout(RuntimeError):
    """An iteration hit its step cap before reaching the requested accuracy."""

    def __init__(self, message, steps=None):
        super().__init__(message)
        self.steps = steps


class DivergenceError(RuntimeError):
    """The deviation from the target grew ten-fold above its initial value."""

    def __init__(self, message, steps=None):
        super().__init__(message)
        self.steps = steps
