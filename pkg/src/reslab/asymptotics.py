"""Closed-form resonance strings for two and three poles.

For N=2 the resonance condition is exp(-2*i*l*z/h) = R_1(z)R_2(z); taking
logarithms gives one resonance per branch index k,

    z_k = pi*h*k/l + (i*h)/(2*l) * Log(R_1(z_k) R_2(z_k)),

solved here by fixed-point iteration from z = pi*h*k/l.  For N=3 with equal
spacing the condition factors through a quadratic in r = w**(2l); the two
roots r_+(z), r_-(z) give up to two strings by the same log/fixed-point
scheme.  For general N=3 spacing only the string rates survive in closed
form, as a three-case classification.

All rates gamma refer to strings Im z ~ -gamma * h * log(1/h).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .errors import NoConvergence, NotEqualSpacing, NotTwoDeltas
from .potential import PotentialConfig, scattering_coefficients, validate_config

FIXED_POINT_MAX_ITER = 50

# The per-k logarithm equation is only a contraction for Re z of order one;
# outside this band the theorems are silent and the iteration may wander.
K_BAND = (1.0 / 3.0, 3.0)


@dataclass(frozen=True)
class PerKPrediction:
    k: int
    z_pred: complex
    iterations: int
    z_refined: complex | None = None  # leading-order closed form, N=2 only


@dataclass(frozen=True)
class StringPrediction:
    gamma: float
    branch: str  # "single" | "plus" | "minus"
    per_k: tuple[PerKPrediction, ...] = ()
    case_id: int | None = None

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "branch": self.branch,
            "case_id": self.case_id,
            "per_k": [
                {"k": p.k, "re": p.z_pred.real, "im": p.z_pred.imag}
                for p in self.per_k
            ],
        }


@dataclass(frozen=True)
class ThreeDeltaGammas:
    gamma_plus: float
    gamma_minus: float
    case_id: int

    def as_set(self) -> frozenset[float]:
        return frozenset((self.gamma_plus, self.gamma_minus))


def _fixed_point(
    k: int,
    base: complex,
    factor: complex,
    log_arg: Callable[[complex], complex],
    *,
    tol: float,
    branch: str = "single",
) -> tuple[complex, int]:
    """Solve z = base + factor * Log(log_arg(z)) from z0 = base.

    Convergence is |dz| <= tol; an exact two-cycle at the last floating-point
    digit also counts (the midpoint is returned).  A jump of more than pi in
    the argument of log_arg between successive iterates means the principal
    branch was crossed; that is reported, never silently re-branched.
    """
    z = base
    z_prev = None
    theta_prev = None
    for it in range(1, FIXED_POINT_MAX_ITER + 1):
        r = log_arg(z)
        if r == 0:
            raise NoConvergence(k, "logarithm argument vanished", branch)
        theta = cmath.phase(r)
        if theta_prev is not None and abs(theta - theta_prev) > math.pi:
            raise NoConvergence(k, "branch crossing in the logarithm", branch)
        theta_prev = theta
        z_new = base + factor * cmath.log(r)
        if abs(z_new - z) <= tol:
            return z_new, it
        if z_prev is not None and z_new == z_prev:
            return (z_new + z) / 2, it
        z_prev, z = z, z_new
    raise NoConvergence(k, f"not settled after {FIXED_POINT_MAX_ITER} iterations", branch)


def _check_k_band(config: PotentialConfig, ks: Sequence[int], ell: float) -> None:
    lo, hi = K_BAND
    for k in ks:
        x = math.pi * config.h * k / ell
        if not lo <= x <= hi:
            raise ValueError(
                f"k={k} puts Re z ~ {x:.3g} outside the supported band [{lo:.3g}, {hi:.3g}]"
            )


def k_range_for_window(
    config: PotentialConfig, re_min: float, re_max: float
) -> range:
    """Branch indices whose base point pi*h*k/l falls in or within one
    spacing of [re_min, re_max], clipped to the supported Re z band.  Uses
    the first gap length, which is the string spacing for N=2 and for
    equal-spacing N=3.

    The one-index margin matters: converged roots sit up to half a spacing
    off the base lattice, so callers that need "predictions inside the
    window" must filter on Re z_pred, not on this range.
    """
    ell = config.lengths[0]
    scale = math.pi * config.h / ell
    lo = max(re_min, K_BAND[0]) / scale
    hi = min(re_max, K_BAND[1]) / scale
    k_min = math.ceil(lo - 1e-12) - 1
    k_max = math.floor(hi + 1e-12) + 1
    if math.pi * config.h * k_min / ell < K_BAND[0]:
        k_min += 1
    if math.pi * config.h * k_max / ell > K_BAND[1]:
        k_max -= 1
    return range(k_min, k_max + 1)


def two_delta_string(config: PotentialConfig, k_range: Iterable[int]) -> StringPrediction:
    """Fixed-point predictions z_k and the leading closed forms for N=2.

    gamma = (beta_1 + beta_2) / (2 l).  The refined per-k value carries the
    Heaviside real shift (half a spacing below the base lattice when
    C_1 C_2 > 0) and the explicit leading imaginary part; z_pred is the
    converged fixed point.
    """
    if config.n != 2:
        raise NotTwoDeltas(config.n)
    h = config.h
    ell = config.lengths[0]
    (b1, b2) = config.betas()
    (c1, c2) = config.couplings()
    ks = sorted(int(k) for k in k_range)
    _check_k_band(config, ks, ell)

    gamma = (b1 + b2) / (2.0 * ell)
    heaviside = 1.0 if c1 * c2 > 0 else 0.0
    log_h_inv = math.log(1.0 / h)
    factor = 1j * h / (2.0 * ell)
    tol = 1e-14 * h

    def log_arg(z: complex) -> complex:
        s = scattering_coefficients(config, z)
        return s.R[0] * s.R[1]

    preds = []
    for k in ks:
        base = math.pi * h * k / ell
        z_k, iters = _fixed_point(k, base, factor, log_arg, tol=tol)
        # principal Log puts the root half a spacing BELOW the base point when
        # C_1 C_2 > 0 (the log argument is then negative real, arg = +pi)
        re_ref = (math.pi * h / ell) * (k - heaviside / 2.0)
        im_ref = (h / (2.0 * ell)) * (
            -(b1 + b2) * log_h_inv
            + math.log(abs(c1 * c2) * ell**2 / (4.0 * math.pi**2 * h**2 * k**2))
        )
        preds.append(
            PerKPrediction(k=k, z_pred=z_k, iterations=iters, z_refined=complex(re_ref, im_ref))
        )

    for a, b in zip(preds, preds[1:]):
        assert 0 < a.z_pred.real < b.z_pred.real
    return StringPrediction(gamma=gamma, branch="single", per_k=tuple(preds))


def _quadratic_roots(config: PotentialConfig, z: complex) -> tuple[complex, complex]:
    """Roots of r**2 = (R_1+R_3)R_2 r + R_1(1+2R_2)R_3 at spectral parameter z."""
    s = scattering_coefficients(config, z)
    r1, r2, r3 = s.R
    b = (r1 + r3) * r2
    c = r1 * (1.0 + 2.0 * r2) * r3
    disc = cmath.sqrt(b * b + 4.0 * c)
    return (b + disc) / 2.0, (b - disc) / 2.0


def three_delta_equal_strings(
    config: PotentialConfig, k_range: Iterable[int]
) -> tuple[StringPrediction, StringPrediction]:
    """Two predicted strings for N=3 with equal gaps l_1 = l_2 = l.

    The resonance condition factors as w**(2l) = r_{+-}(z); each branch is
    solved per k exactly like the two-delta string.  The branch label follows
    the +- sign of the square root at the base point and is continued by
    nearest-root tracking while iterating.
    """
    if config.n != 3:
        raise NotTwoDeltas(config.n, expected=3)
    l1, l2 = config.lengths
    if abs(l1 - l2) > 1e-12 * l1:
        raise NotEqualSpacing(l1, l2)
    h = config.h
    ell = l1
    ks = sorted(int(k) for k in k_range)
    _check_k_band(config, ks, ell)
    factor = 1j * h / (2.0 * ell)
    tol = 1e-14 * h
    log_h = math.log(h)

    k_mid = ks[len(ks) // 2] if ks else round(ell / (math.pi * h))
    r_mid = _quadratic_roots(config, math.pi * h * k_mid / ell)

    out = []
    for branch, pick in (("plus", 0), ("minus", 1)):
        gamma = math.log(abs(r_mid[pick])) / (2.0 * ell * log_h)

        preds = []
        for k in ks:
            prev: list[complex | None] = [None]

            def log_arg(z: complex) -> complex:
                rp, rm = _quadratic_roots(config, z)
                if prev[0] is None:
                    r = (rp, rm)[pick]
                else:
                    r = rp if abs(rp - prev[0]) <= abs(rm - prev[0]) else rm
                prev[0] = r
                return r

            base = math.pi * h * k / ell
            z_k, iters = _fixed_point(k, base, factor, log_arg, tol=tol, branch=branch)
            preds.append(PerKPrediction(k=k, z_pred=z_k, iterations=iters))
        for a, b in zip(preds, preds[1:]):
            assert 0 < a.z_pred.real < b.z_pred.real
        out.append(StringPrediction(gamma=gamma, branch=branch, per_k=tuple(preds)))
    return out[0], out[1]


def three_delta_gammas(config: PotentialConfig) -> ThreeDeltaGammas:
    """String rates for general N=3 spacing, by case.

    With L = beta_3 l_1 - beta_2 l_1 - beta_2 l_2 and R = beta_2 l_1 +
    beta_2 l_2 + beta_3 l_1:

      case 1 (L <= beta_1 l_2 <= R):  both rates (beta_1+beta_3)/(2 l_1 + 2 l_2)
      case 2 (beta_1 l_2 < L):        (beta_3-beta_2)/(2 l_2) and (beta_1+beta_2)/(2 l_1)
      case 3 (beta_1 l_2 > R):        (beta_1-beta_2)/(2 l_1) and (beta_2+beta_3)/(2 l_2)

    Boundaries belong to case 1 (non-strict comparisons, no epsilon fuzzing).
    """
    if config.n != 3:
        raise NotTwoDeltas(config.n, expected=3)
    b1, b2, b3 = config.betas()
    l1, l2 = config.lengths
    mid = b1 * l2
    left = b3 * l1 - b2 * l1 - b2 * l2
    right = b2 * l1 + b2 * l2 + b3 * l1
    if left <= mid <= right:
        g = (b1 + b3) / (2.0 * (l1 + l2))
        return ThreeDeltaGammas(gamma_plus=g, gamma_minus=g, case_id=1)
    if mid < left:
        return ThreeDeltaGammas(
            gamma_plus=(b3 - b2) / (2.0 * l2),
            gamma_minus=(b1 + b2) / (2.0 * l1),
            case_id=2,
        )
    return ThreeDeltaGammas(
        gamma_plus=(b1 - b2) / (2.0 * l1),
        gamma_minus=(b2 + b3) / (2.0 * l2),
        case_id=3,
    )


def reflect_config(config: PotentialConfig) -> PotentialConfig:
    """Mirror the potential through the origin; resonances are unchanged."""
    return validate_config(
        config.h, [(-p.x, p.C, p.beta) for p in config.poles]
    )
