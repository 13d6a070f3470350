"""Exception types shared across the package."""


class GeometryError(ValueError):
    """Degenerate or otherwise unusable geometric input."""


class DomainError(GeometryError):
    """A point (or a finite-difference stencil) leaves the chart's domain box."""


class NonIntegrableError(GeometryError):
    """A one-form that should be closed is not, so no potential exists."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class QuadratureError(RuntimeError):
    """Node doubling changed the answer by more than the requested tolerance."""

    def __init__(self, message, estimate):
        super().__init__(f"{message} (doubling estimate {estimate:.3e})")
        self.estimate = estimate


class ConvergenceError(RuntimeError):
    """An iteration that should contract did not; ``history`` holds successive distances."""

    def __init__(self, message, history):
        tail = ", ".join(f"{d:.3e}" for d in history[-4:])
        super().__init__(f"{message} (last distances {tail})")
        self.history = list(history)
