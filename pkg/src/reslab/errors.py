"""Exception types shared across the package.

Every error that names a pole or interval carries the offending index so
callers (and the CLI) can point at the bad entry instead of guessing.
"""

from __future__ import annotations


class ReslabError(Exception):
    """Base class for all package errors."""


class ConfigError(ReslabError):
    """Invalid potential configuration or window (CLI exit code 2)."""


class DuplicatePosition(ConfigError):
    def __init__(self, index: int, x: float):
        self.index = index
        self.x = x
        super().__init__(f"poles {index} and {index + 1} share position x={x!r} after sorting")


class ZeroCoupling(ConfigError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"pole {index} has coupling C=0; delete the pole instead")


class NonpositiveBeta(ConfigError):
    def __init__(self, index: int, beta: float):
        self.index = index
        self.beta = beta
        super().__init__(f"pole {index} has beta={beta!r}; strength exponents must be > 0")


class BadH(ConfigError):
    def __init__(self, h: float):
        self.h = h
        super().__init__(f"h={h!r} outside (0, 1)")


class TooFewPoles(ConfigError):
    def __init__(self, n: int):
        self.n = n
        super().__init__(f"need at least 2 poles, got {n}")


class TooManyPoles(ReslabError):
    def __init__(self, n: int, limit: int):
        self.n = n
        self.limit = limit
        super().__init__(f"exact expansion supports at most {limit} poles, got {n}")


class ZeroSpectralParameter(ReslabError):
    def __init__(self, msg: str = "z=0 is a pole of the scattering coefficients"):
        super().__init__(msg)


class SingularCoefficient(ReslabError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"1 - Vtilde_{index} vanishes to working precision; T/R undefined")


class OverflowGuard(ReslabError):
    """Window or z too deep: |Im z| * max(lengths) / h must stay <= 600."""


class BoundaryZero(ReslabError):
    """A boundary sample of the winding contour sits on (or machine-close to) a zero."""


class NoConvergence(ReslabError):
    def __init__(self, k: int, reason: str, branch: str = "single"):
        self.k = k
        self.reason = reason
        self.branch = branch
        super().__init__(f"fixed point for k={k} ({branch}) did not converge: {reason}")


class NotTwoDeltas(ReslabError):
    def __init__(self, n: int, expected: int = 2):
        self.n = n
        self.expected = expected
        super().__init__(f"closed form needs exactly {expected} poles, got {n}")


class NotEqualSpacing(ReslabError):
    def __init__(self, l1: float, l2: float):
        self.l1 = l1
        self.l2 = l2
        super().__init__(f"spacings {l1!r} and {l2!r} differ beyond 1e-12 relative")


class NotNearSingular(ReslabError):
    def __init__(self, proxy: float, scale: float):
        self.proxy = proxy
        self.scale = scale
        super().__init__(
            f"secular matrix is not singular at this z (sigma_min proxy {proxy:.3e} "
            f"vs scale {scale:.3e}); z is probably not a resonance"
        )
