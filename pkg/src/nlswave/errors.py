"""Exception types raised by the solver modules."""


class NLSWaveError(Exception):
    """Base class for computational failures (CLI exit code 1)."""


class CapabilityError(NLSWaveError):
    """The nonlinearity does not provide a required derivative."""


class NoRoot(NLSWaveError):
    """Q(omega, .) has no positive zero on the scan range."""


class Degenerate(NLSWaveError):
    """The amplitude root is (numerically) tangential."""


class QuadratureFailure(NLSWaveError):
    pass


class ConsistencyFailure(NLSWaveError):
    pass


class TailBlowup(NLSWaveError):
    """The shooting integration left the homoclinic orbit before decaying."""


class NoDescent(NLSWaveError):
    """No initialization reached negative energy; carries the best candidate."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class BlowupDetected(NLSWaveError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class SingularSolve(NLSWaveError):
    pass


class EigenConvergenceError(NLSWaveError):
    def __init__(self, message, iterations=0):
        super().__init__(message)
        self.iterations = iterations
