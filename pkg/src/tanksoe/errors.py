"""Exception hierarchy. Each family maps to one CLI exit code."""


class TankSoeError(Exception):
    exit_code = 1


class ConfigError(TankSoeError):
    exit_code = 2


class ParameterError(ConfigError):
    pass


class DomainError(TankSoeError, ValueError):
    """A log or power argument left its domain: the evaluation point is invalid."""


class SteadyStateError(TankSoeError):
    exit_code = 3


class NoSignSwitch(SteadyStateError):
    pass


class MultipleSignSwitches(SteadyStateError):
    def __init__(self, message: str, brackets):
        super().__init__(message)
        self.brackets = brackets


class SubsistenceViolation(SteadyStateError):
    pass


class NotNetExporter(SteadyStateError):
    """Steady-state commodity output does not exceed domestic commodity use."""


class DerivativeError(TankSoeError):
    exit_code = 5


class NonFiniteDerivative(DerivativeError):
    pass


class RichardsonDisagreement(DerivativeError):
    pass


class BKViolation(TankSoeError):
    exit_code = 4

    def __init__(self, message: str, n_stable: int, n_required: int, report=None):
        super().__init__(message)
        self.n_stable = n_stable
        self.n_required = n_required
        self.report = report


class BKViolationTooMany(BKViolation):
    """More unstable roots than forward-looking variables: no stable solution."""


class BKViolationTooFew(BKViolation):
    """Fewer unstable roots than forward-looking variables: indeterminacy."""


class SingularSylvester(TankSoeError):
    exit_code = 4


class UnknownShock(TankSoeError, KeyError):
    exit_code = 2


class ExplosivePath(TankSoeError):
    exit_code = 6


class AllPointsInfeasible(TankSoeError):
    exit_code = 4
