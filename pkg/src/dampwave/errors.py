"""Exception types raised across the package."""


class DampwaveError(Exception):
    """Base class for all package errors."""


class NonFiniteField(DampwaveError):
    pass


class GridMismatch(DampwaveError):
    pass


class TailBoundExceeded(DampwaveError):
    pass


class NonSmoothInput(DampwaveError):
    pass


class DerivativeMismatch(DampwaveError):
    pass


class DegenerateFit(DampwaveError):
    pass


class OverflowDetected(DampwaveError):
    pass


class SupportTooLarge(DampwaveError):
    pass


class BlowupDetected(DampwaveError):
    def __init__(self, t, sup_norm):
        super().__init__(f"blow-up at t={t:.6g} (sup norm {sup_norm:.3g})")
        self.t = t
        self.sup_norm = sup_norm


class TruncationContaminated(DampwaveError):
    pass


class NoBlowupObserved(DampwaveError):
    pass


class WindowTooShort(DampwaveError):
    pass


class HypothesisViolated(DampwaveError):
    pass


class CoverageError(DampwaveError):
    pass


class ConfigError(DampwaveError):
    """Invalid experiment configuration (maps to CLI exit code 2)."""
