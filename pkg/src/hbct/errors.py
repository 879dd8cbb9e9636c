"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class HbctError(Exception):
    exit_code = 2


class ValidationError(HbctError, ValueError):
    """An input violates a documented range or shape constraint."""

    exit_code = 1

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class NumericalError(HbctError, ArithmeticError):
    """A numerical routine failed to converge or left its safe domain."""

    exit_code = 2


class DegenerateMultiplierError(NumericalError):
    """A zero multiplier was passed where the power equation divides by it."""


class InfeasibleError(HbctError):
    """No allocation satisfies the constraints (dead hop, infeasible scenario)."""

    exit_code = 2


class DeadHopError(InfeasibleError):
    """Some hop has zero rate in both transmission modes."""

    def __init__(self, hop: int, message: str = ""):
        self.hop = hop
        super().__init__(message or f"hop {hop + 1} can carry no bits in either mode")


class PropertyViolation(HbctError, AssertionError):
    """A checked invariant failed at run time."""

    exit_code = 3
