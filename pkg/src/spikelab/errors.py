"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


class CapacityError(RuntimeError):
    """A brute-force enumeration would exceed the configured cap."""

    def __init__(self, required: int, cap: int):
        self.required = required
        self.cap = cap
        super().__init__(
            f"enumeration requires {required} states, above the cap of {cap}"
        )


class NumericalError(RuntimeError):
    """A numerical process produced non-finite values or diverged."""


class SolverFailureError(RuntimeError):
    """Iterative eigensolver failed to reach the requested residual."""

    def __init__(self, residual: float, tol: float):
        self.residual = residual
        self.tol = tol
        super().__init__(f"eigensolver residual {residual:.3e} exceeds tolerance {tol:.3e}")
