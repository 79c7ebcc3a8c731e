"""Exception hierarchy shared by all cfgrid modules."""


class CfGridError(Exception):
    """Base class for every error raised by cfgrid."""


class MagnitudeUnderflow(CfGridError, ValueError):
    """Complex frequency is undefined for a quantity of (near) zero magnitude."""


class TooFewSamples(CfGridError, ValueError):
    pass


class UnwrapAliasing(CfGridError, ValueError):
    """A per-step phase increment is too large to unwrap unambiguously."""


class SingularAdmittance(CfGridError, ArithmeticError):
    pass


class SingularChi(CfGridError, ArithmeticError):
    pass


class SingularBus(CfGridError, ArithmeticError):
    pass


class SchemaError(CfGridError, ValueError):
    pass


class TopologyError(CfGridError, ValueError):
    pass


class UnitError(CfGridError, ValueError):
    pass


class DimensionMismatch(CfGridError, ValueError):
    pass


class SolverError(CfGridError, RuntimeError):
    """Base class for numerical solver failures."""


class NonConvergence(SolverError):
    def __init__(self, iterations, residual, message=None):
        self.iterations = iterations
        self.residual = residual
        super().__init__(message or f"no convergence after {iterations} iterations "
                                    f"(max mismatch {residual:.3e})")


class SingularJacobian(SolverError):
    pass


class OverModulation(SolverError):
    pass


class InitResidual(SolverError):
    def __init__(self, offending):
        self.offending = list(offending)
        names = ", ".join(f"{name}={value:.2e}" for name, value in self.offending[:8])
        super().__init__(f"initial state is not stationary: {names}")


class StepNonConvergence(SolverError):
    def __init__(self, t, residual):
        self.t = t
        self.residual = residual
        super().__init__(f"Newton iteration failed at t={t:.6f} s (residual {residual:.3e})")


class EventTargetMissing(CfGridError, KeyError):
    pass


class EmptyArea(CfGridError, ValueError):
    pass


class ColumnNotFound(CfGridError, KeyError):
    pass


class EmptyData(CfGridError, ValueError):
    pass
