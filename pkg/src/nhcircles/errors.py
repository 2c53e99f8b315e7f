"""Exception hierarchy shared by every module."""


class NHError(Exception):
    """Base class for all errors raised by nhcircles."""


class InvalidInputError(NHError, ValueError):
    pass


class NotAContractionError(NHError):
    def __init__(self, lipschitz):
        super().__init__(f"displacement is not a contraction (Lip = {lipschitz:.6g})")
        self.lipschitz = lipschitz


class ConvergenceError(NHError):
    def __init__(self, message, residual=None, history=None):
        super().__init__(message)
        self.residual = residual
        self.history = list(history or [])


class SmallDivisorError(NHError):
    def __init__(self, k, divisor):
        super().__init__(f"small divisor {divisor:.3e} at mode k={k}")
        self.k = k
        self.divisor = divisor


class PrecisionError(NHError):
    def __init__(self, residual, tol):
        super().__init__(f"residual {residual:.3e} exceeds tolerance {tol:.3e}")
        self.residual = residual
        self.tol = tol


class DivergenceError(NHError):
    """Integration produced a non-finite state, or an iteration stopped contracting."""

    def __init__(self, message, step=None, ratio=None):
        super().__init__(message)
        self.step = step
        self.ratio = ratio


class AnnulusEscapeError(NHError):
    def __init__(self, sup):
        super().__init__(f"graph left the annulus |rho| <= 1 (sup = {sup:.4g})")
        self.sup = sup


class IterationLimitError(ConvergenceError):
    pass


class TorsionLossError(NHError):
    pass


class OutsideRegionError(NHError):
    pass


class NoRootError(ConvergenceError):
    pass


class LogBranchError(NHError):
    pass


class NoRadiusError(NHError):
    pass


class RadiusTooLargeError(NHError):
    pass


class ConfigError(NHError):
    pass


class ResumeMismatchError(NHError):
    pass
