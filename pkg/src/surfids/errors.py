"""Exception types raised across the package."""


class SurfIDSError(Exception):
    """Base class for all package errors."""


class NotAntisymmetric(SurfIDSError, ValueError):
    def __init__(self, i, j, deviation):
        self.pair = (i, j)
        self.deviation = deviation
        super().__init__(
            f"field matrix is not antisymmetric: |B[{i},{j}] + B[{j},{i}]| = {deviation:.3e}"
        )


class ZeroField(SurfIDSError, ValueError):
    pass


class CapTooLarge(SurfIDSError, ValueError):
    pass


class AboveEssentialFloor(SurfIDSError, ValueError):
    pass


class FluxTooLarge(SurfIDSError, ValueError):
    pass


class SolverFailure(SurfIDSError, RuntimeError):
    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message if residual is None else f"{message} (residual {residual:.3e})")


class NoBoundState(SurfIDSError, ValueError):
    pass


class BudgetExceeded(SurfIDSError, ValueError):
    def __init__(self, required, allowed):
        self.required = required
        self.allowed = allowed
        super().__init__(f"dimension {required} exceeds budget {allowed}")


class HaloTooSmall(SurfIDSError, ValueError):
    pass


class FactorizationBreakdown(SurfIDSError, RuntimeError):
    pass


class BadParameters(SurfIDSError, ValueError):
    def __init__(self, message, admissible=None):
        self.admissible = admissible
        super().__init__(message)


class HypothesisViolated(SurfIDSError, ValueError):
    pass


class TooFewPoints(SurfIDSError, ValueError):
    pass


class DegenerateWindow(SurfIDSError, ValueError):
    pass


class ConfigInvalid(SurfIDSError, ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid config:\n" + "\n".join(f"  {p}" for p in self.problems))
