"""Zero localization for the cleared secular determinant.

The search is a recursive quadrisection certified by the argument principle:
the winding number of F around a rectangle counts the zeros inside, computed
here by adaptive phase continuation along the boundary (no derivatives).
Winding-0 boxes are discarded, winding-1 boxes are polished with Muller's
method in the scaled coordinate u = (z - center)/h, anything else is split.
Everything is a pure function of the window geometry, so results are
identical regardless of thread count.
"""

from __future__ import annotations

import cmath
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import BoundaryZero, NotNearSingular
from .potential import PotentialConfig, scattering_coefficients
from .secular import (
    MAX_EXPANSION_POLES,
    ClearedSumEvaluator,
    assemble,
    check_overflow_guard,
    evaluate_dets,
)

# winding boundary
BOUNDARY_FLOOR = 1e-13       # |F| below this times the local term scale = too close to a zero
INFLATE_FACTOR = 1.01
INFLATE_RETRIES = 5
PHASE_STEP_LIMIT = math.pi / 2
MAX_REFINE_ROUNDS = 48
MAX_BOUNDARY_SAMPLES = 2_000_000

# root polishing
MULLER_TOL = 1e-12           # in u = (z - center)/h units
MULLER_MAX_STEPS = 60
RESIDUAL_TOL = 1e-8          # |F| / scale certification bound
CANCELLATION_FLOOR = 1e-13   # stop polishing once |F|/scale is numerically zero
ISOLATION_FACTOR = 1.0       # polish winding-1 boxes no larger than this times h
DEDUPE_TOL = 1e-4            # in units of h

_STATE_SEED = 20259          # fixed seed for the inverse-iteration start vector


@dataclass(frozen=True)
class Window:
    """Axis-aligned search rectangle in the z plane, lower half only."""

    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def validate(self) -> None:
        if not (self.re_min < self.re_max):
            raise ValueError(f"re_min {self.re_min} must be < re_max {self.re_max}")
        if not (self.im_min < self.im_max):
            raise ValueError(f"im_min {self.im_min} must be < im_max {self.im_max}")
        if self.im_max > 0:
            raise ValueError(f"im_max {self.im_max} must be <= 0")

    def m_equiv(self, h: float) -> float:
        """Window depth in units of h log(1/h)."""
        return -self.im_min / (h * math.log(1.0 / h))

    @property
    def width(self) -> float:
        return self.re_max - self.re_min

    @property
    def height(self) -> float:
        return self.im_max - self.im_min

    @property
    def center(self) -> complex:
        return complex((self.re_min + self.re_max) / 2, (self.im_min + self.im_max) / 2)

    def contains(self, z: complex) -> bool:
        return self.re_min < z.real < self.re_max and self.im_min < z.imag < self.im_max

    def inflated(self, factor: float) -> "Window":
        c = self.center
        dw = self.width * factor / 2
        dh = self.height * factor / 2
        return Window(c.real - dw, c.real + dw, c.imag - dh, c.imag + dh)

    def quadrants(self) -> tuple["Window", "Window", "Window", "Window"]:
        """SW, SE, NW, NE, in that fixed order."""
        cm = (self.re_min + self.re_max) / 2
        ci = (self.im_min + self.im_max) / 2
        return (
            Window(self.re_min, cm, self.im_min, ci),
            Window(cm, self.re_max, self.im_min, ci),
            Window(self.re_min, cm, ci, self.im_max),
            Window(cm, self.re_max, ci, self.im_max),
        )


@dataclass(frozen=True)
class Resonance:
    z: complex
    residual: float       # |F| relative to the local term scale at z
    winding_cert: int     # winding of the certifying box, always 1
    gamma_est: float      # -Im z / (h log(1/h))
    box: Window
    # Offset from the search window center, carried separately because z
    # itself is quantized at ulp(|z|): near Re z = 1 that is ~1e-9 of a string
    # spacing, too coarse for spacing diagnostics.  Accurate to ~1e-15
    # relative because box centers stay within a factor 2 of the window
    # center, so their difference is exact, and the Muller offset u*h adds
    # one rounding at scale h.
    z_offset: complex = 0j


@dataclass(frozen=True)
class UncertifiedBox:
    window: Window
    winding: int
    reason: str  # "max_depth" | "no_convergence" | "boundary_zero"


@dataclass(frozen=True)
class ResonanceSet:
    window: Window
    resonances: tuple[Resonance, ...]
    uncertified: tuple[UncertifiedBox, ...]
    total_winding: int

    def to_rows(self, config: PotentialConfig) -> list[dict]:
        return [
            {
                "k_index": _k_index(config, r.z),
                "re": r.z.real,
                "im": r.z.imag,
                "residual": r.residual,
                "gamma_est": r.gamma_est,
            }
            for r in self.resonances
        ]


@dataclass(frozen=True)
class SearchOptions:
    max_depth: int = 40
    threads: int = 1


def _k_index(config: PotentialConfig, z: complex) -> int | None:
    """Branch index along the first-gap lattice; only meaningful for N=2.

    The string sits half a spacing below the lattice when C_1 C_2 > 0, so add
    the same Heaviside shift back before rounding; otherwise roots land at
    k - 1/2 and the rounding direction would be arbitrary.
    """
    if config.n != 2:
        return None
    c1, c2 = config.couplings()
    shift = 0.5 if c1 * c2 > 0 else 0.0
    spacing = math.pi * config.h / config.lengths[0]
    return round(z.real / spacing + shift)


class _BoundaryTooClose(Exception):
    """Internal: a boundary sample hit the near-zero floor; inflate and retry."""


def _wrap_diff(a: np.ndarray) -> np.ndarray:
    d = np.diff(a)
    return (d + np.pi) % (2.0 * np.pi) - np.pi


def _boundary_points(window: Window, ts: np.ndarray) -> np.ndarray:
    """Map parameters t in [0,4) to boundary points, counterclockwise from SW."""
    t = np.asarray(ts, dtype=float)
    z = np.empty(t.shape, dtype=complex)
    seg = np.floor(t).astype(int) % 4
    frac = t - np.floor(t)
    w, hgt = window.width, window.height
    # bottom: SW -> SE
    m = seg == 0
    z[m] = (window.re_min + frac[m] * w) + 1j * window.im_min
    # right: SE -> NE
    m = seg == 1
    z[m] = window.re_max + 1j * (window.im_min + frac[m] * hgt)
    # top: NE -> NW
    m = seg == 2
    z[m] = (window.re_max - frac[m] * w) + 1j * window.im_max
    # left: NW -> SW
    m = seg == 3
    z[m] = window.re_min + 1j * (window.im_max - frac[m] * hgt)
    return z


def _phase_rate(config: PotentialConfig, window: Window) -> float:
    """Crude bound on |d arg F / dz| away from zeros: the w**(2|l|) factor."""
    return 2.0 * config.total_length / config.h


def _winding_core(
    window: Window, eval_args: Callable[[np.ndarray], np.ndarray], rate: float
) -> int:
    """Adaptive phase continuation around the boundary.

    eval_args maps boundary parameters t in [0,4) to arg F at those points and
    raises _BoundaryTooClose when a sample is dangerously near a zero.  `rate`
    seeds the initial sampling density (phase radians per z unit).
    """

    def initial_count(edge_len: float) -> int:
        return int(np.clip(math.ceil(edge_len * rate / (math.pi / 4)) + 1, 8, 4096))

    ts_list = []
    for k, edge_len in enumerate((window.width, window.height, window.width, window.height)):
        n = initial_count(edge_len)
        ts_list.append(k + np.arange(n) / n)
    ts = np.concatenate(ts_list)

    args = eval_args(ts)
    for _ in range(MAX_REFINE_ROUNDS):
        loop_t = np.concatenate([ts, ts[:1] + 4.0])
        loop_a = np.concatenate([args, args[:1]])
        steps = _wrap_diff(loop_a)
        bad = np.abs(steps) >= PHASE_STEP_LIMIT
        if not bad.any():
            total = steps.sum() / (2.0 * np.pi)
            winding = round(float(total))
            assert abs(total - winding) < 0.25, f"non-integer winding {total}"
            return winding
        mids = (loop_t[:-1][bad] + loop_t[1:][bad]) / 2.0
        mids = np.mod(mids, 4.0)
        if ts.size + mids.size > MAX_BOUNDARY_SAMPLES:
            # a zero pinned to the boundary keeps the refinement alive forever
            raise _BoundaryTooClose()
        new_args = eval_args(mids)
        ts = np.concatenate([ts, mids])
        order = np.argsort(ts, kind="stable")
        ts = ts[order]
        args = np.concatenate([args, new_args])[order]
    raise _BoundaryTooClose()


def _winding_once(config: PotentialConfig, window: Window) -> int:
    floor_log = math.log(BOUNDARY_FLOOR)

    def eval_args(t: np.ndarray) -> np.ndarray:
        batch = evaluate_dets(config, _boundary_points(window, t))
        if np.any(batch.log_abs < floor_log + batch.log_scale):
            raise _BoundaryTooClose()
        return batch.arg

    return _winding_core(window, eval_args, _phase_rate(config, window))


def winding_number(config: PotentialConfig, window: Window) -> int:
    """Zeros of the cleared determinant inside `window`, by argument principle.

    The boundary is sampled adaptively until each phase step is below pi/2.
    A sample too close to a zero (|F| under 1e-13 times the local term scale)
    inflates the window by 1% and retries, up to 5 times.
    """
    window.validate()
    check_overflow_guard(config, window.im_min)
    win = window
    for _ in range(INFLATE_RETRIES + 1):
        try:
            return _winding_once(config, win)
        except _BoundaryTooClose:
            win = win.inflated(INFLATE_FACTOR)
    raise BoundaryZero(
        f"boundary of {window} kept hitting zeros after {INFLATE_RETRIES} inflation retries"
    )


def _polish_root(
    config: PotentialConfig, box: Window, origin: complex
) -> Resonance | None:
    """Muller iteration in u = (z - center)/h inside a winding-1 box."""
    h = config.h
    center = box.center
    half_w = box.width / (2 * h)
    half_h = box.height / (2 * h)
    step_cap = 2.0 * max(half_w, half_h)

    if config.n <= MAX_EXPANSION_POLES:
        evaluator = ClearedSumEvaluator(config, center)

        def fval(u: complex) -> tuple[complex, float]:
            val, scale = evaluator(u)
            return val / scale, abs(val) / scale

    else:
        # matrix route; accuracy capped near ulp(|z|) by the phase smear
        ref_state = {"ref": None}

        def fval(u: complex) -> tuple[complex, float]:
            batch = evaluate_dets(config, np.array([center + u * h]))
            if ref_state["ref"] is None:
                ref_state["ref"] = float(batch.log_scale[0])
            val = complex(np.exp(batch.log_abs[0] - ref_state["ref"] + 1j * batch.arg[0]))
            rel = float(np.exp(batch.log_abs[0] - batch.log_scale[0]))
            return val, rel

    u0, u1, u2 = complex(0.3 * half_w), complex(0, -0.3 * half_h), complex(0)
    f0, _ = fval(u0)
    f1, _ = fval(u1)
    f2, rel2 = fval(u2)
    for _ in range(MULLER_MAX_STEPS):
        if rel2 <= CANCELLATION_FLOOR:
            break
        d10, d21, d20 = u1 - u0, u2 - u1, u2 - u0
        if d10 == 0 or d21 == 0 or d20 == 0:
            return None
        f01 = (f1 - f0) / d10
        f12 = (f2 - f1) / d21
        f012 = (f12 - f01) / d20
        w = f12 + d21 * f012
        disc = cmath.sqrt(complex(w * w - 4.0 * f2 * f012))
        den_a, den_b = w + disc, w - disc
        den = den_a if abs(den_a) >= abs(den_b) else den_b
        if den == 0:
            return None
        du = -2.0 * f2 / den
        if not (math.isfinite(du.real) and math.isfinite(du.imag)):
            return None
        if abs(du) > step_cap:
            du *= step_cap / abs(du)
        u3 = u2 + du
        f3, rel3 = fval(u3)
        u0, u1, u2 = u1, u2, u3
        f0, f1, f2 = f1, f2, f3
        rel2 = rel3
        if abs(du) <= MULLER_TOL:
            break
    else:
        if rel2 > RESIDUAL_TOL:
            return None

    z = center + u2 * h
    if not box.contains(z):
        return None
    if rel2 > RESIDUAL_TOL:
        return None
    gamma_est = -z.imag / (h * math.log(1.0 / h))
    return Resonance(
        z=z,
        residual=rel2,
        winding_cert=1,
        gamma_est=gamma_est,
        box=box,
        z_offset=(center - origin) + u2 * h,
    )


def _process_box(
    config: PotentialConfig,
    box: Window,
    depth: int,
    opts: SearchOptions,
    origin: complex,
) -> tuple[str, object]:
    try:
        w = winding_number(config, box)
    except BoundaryZero:
        return "uncertified", UncertifiedBox(box, -1, "boundary_zero")
    if w == 0:
        return "empty", None
    small = max(box.width, box.height) <= ISOLATION_FACTOR * config.h
    if w == 1 and small:
        res = _polish_root(config, box, origin)
        if res is not None:
            return "root", res
        # Muller escaped or stalled (root near an edge, neighbor pulled the
        # iteration out): shrink the certified box and try again.
        if depth >= opts.max_depth:
            return "uncertified", UncertifiedBox(box, 1, "no_convergence")
        return "split", None
    if depth >= opts.max_depth:
        return "uncertified", UncertifiedBox(box, w, "max_depth")
    return "split", None


def find_resonances(
    config: PotentialConfig, window: Window, opts: SearchOptions = SearchOptions()
) -> ResonanceSet:
    """All zeros of the cleared determinant in `window`, each certified by a
    winding-1 box and polished to the stated residual tolerance.

    Deterministic: the subdivision tree, all evaluations, and the output order
    depend only on (config, window, opts.max_depth), never on thread count.
    """
    window.validate()
    check_overflow_guard(config, window.im_min)
    total = winding_number(config, window)
    origin = window.center

    roots: list[Resonance] = []
    uncertified: list[UncertifiedBox] = []
    level: list[tuple[Window, int]] = [(window, 0)]
    workers = opts.threads if opts.threads > 0 else min(8, os.cpu_count() or 1)

    def work(item: tuple[Window, int]) -> tuple[str, object]:
        box, depth = item
        return _process_box(config, box, depth, opts, origin)

    while level:
        if workers > 1 and len(level) > 1:
            with ThreadPoolExecutor(max_workers=workers) as ex:
                outcomes = list(ex.map(work, level))
        else:
            outcomes = [work(item) for item in level]
        nxt: list[tuple[Window, int]] = []
        for (box, depth), (kind, payload) in zip(level, outcomes):
            if kind == "empty":
                continue
            if kind == "root":
                roots.append(payload)
            elif kind == "uncertified":
                uncertified.append(payload)
            else:
                nxt.extend((q, depth + 1) for q in box.quadrants())
        level = nxt

    roots.sort(key=lambda r: (r.z.real, r.z.imag))
    deduped: list[Resonance] = []
    for r in roots:
        if deduped and abs(r.z - deduped[-1].z) <= DEDUPE_TOL * config.h:
            continue
        deduped.append(r)
    uncertified.sort(key=lambda u: (u.window.re_min, u.window.im_min))
    return ResonanceSet(
        window=window,
        resonances=tuple(deduped),
        uncertified=tuple(uncertified),
        total_winding=total,
    )


# ---------------------------------------------------------------------------
# string classification


@dataclass(frozen=True)
class StringCluster:
    gamma: float
    count: int
    mean_gamma_est: float
    im_mean: float
    im_spread: float
    members: tuple[int, ...]
    flagged: bool

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "count": self.count,
            "mean_gamma_est": self.mean_gamma_est,
            "im_mean": self.im_mean,
            "im_spread": self.im_spread,
            "flagged": self.flagged,
        }


@dataclass(frozen=True)
class StringReport:
    clusters: tuple[StringCluster, ...]
    gamma_tol: float
    max_spread: float

    def to_dict(self) -> dict:
        return {
            "gamma_tol": self.gamma_tol,
            "max_spread": self.max_spread,
            "clusters": [c.to_dict() for c in self.clusters],
        }

    def cluster_of(self, index: int) -> int:
        for ci, c in enumerate(self.clusters):
            if index in c.members:
                return ci
        raise KeyError(index)


def classify_strings(
    resonances: ResonanceSet,
    candidates: Sequence,
    config: PotentialConfig,
    *,
    gamma_tol: float = 0.05,
) -> StringReport:
    """Assign each resonance to the nearest candidate rate gamma.

    Candidates may be GammaCandidate objects or bare floats.  Every candidate
    gets a cluster entry (possibly empty); a cluster whose mean empirical rate
    strays from its candidate by more than gamma_tol is flagged, not dropped.
    """
    gammas = [float(getattr(c, "gamma", c)) for c in candidates]
    if not gammas:
        raise ValueError("need at least one candidate gamma")
    if not resonances.resonances:
        raise ValueError("need at least one resonance")

    members: list[list[int]] = [[] for _ in gammas]
    for i, r in enumerate(resonances.resonances):
        j = min(range(len(gammas)), key=lambda j: abs(r.gamma_est - gammas[j]))
        members[j].append(i)

    clusters = []
    max_spread = 0.0
    for g, mem in zip(gammas, members):
        if mem:
            ims = [resonances.resonances[i].z.imag for i in mem]
            ests = [resonances.resonances[i].gamma_est for i in mem]
            spread = max(ims) - min(ims)
            mean_est = sum(ests) / len(ests)
            im_mean = sum(ims) / len(ims)
            flagged = abs(mean_est - g) > gamma_tol
            max_spread = max(max_spread, spread)
        else:
            spread, mean_est, im_mean, flagged = 0.0, math.nan, math.nan, False
        clusters.append(
            StringCluster(
                gamma=g,
                count=len(mem),
                mean_gamma_est=mean_est,
                im_mean=im_mean,
                im_spread=spread,
                members=tuple(mem),
                flagged=flagged,
            )
        )
    return StringReport(clusters=tuple(clusters), gamma_tol=gamma_tol, max_spread=max_spread)


# ---------------------------------------------------------------------------
# resonant states


@dataclass(frozen=True)
class ResonantState:
    """Amplitudes of the outgoing solution at a resonance z.

    y holds the interior amplitudes (y_1^-, y_1^+, ..., y_{N-1}^-, y_{N-1}^+),
    largest component normalized to 1.  v_plus/v_minus are the per-interval
    wave amplitudes, index j = 0..N, with v_plus[0] = v_minus[N] = 0 (the
    outgoing condition).  u evaluates the solution pointwise.
    """

    z: complex
    y: np.ndarray
    y0_minus: complex
    yN_plus: complex
    v_plus: np.ndarray
    v_minus: np.ndarray
    positions: np.ndarray
    h: float

    def u(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        j = np.searchsorted(self.positions, x, side="right")
        return self.u_on_interval(j, x)

    def u_on_interval(self, j, x) -> np.ndarray:
        """Evaluate interval j's wave pair at x, also outside the interval.

        Lets tests compare the two one-sided limits at a pole position
        exactly, without finite-offset phase drift."""
        zp = np.exp(1j * self.z * np.asarray(x, dtype=float) / self.h)
        return self.v_plus[j] * zp + self.v_minus[j] / zp


def resonant_state(config: PotentialConfig, z: complex) -> ResonantState:
    """Null vector of the secular matrix at a certified resonance.

    One inverse-iteration step from a fixed-seed start vector, then a second
    polishing step.  If the smallest-singular-value proxy is not tiny
    compared to the matrix scale, z is not actually a resonance.
    """
    b, _ = assemble(config, np.array([complex(z)]))
    mat = b[0]
    d = mat.shape[0]
    scale = float(np.max(np.sqrt(np.sum(np.abs(mat) ** 2, axis=1))))

    rng = np.random.default_rng(_STATE_SEED)
    q = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    q /= np.linalg.norm(q)
    try:
        y = np.linalg.solve(mat, q)
        sigma_proxy = 1.0 / float(np.linalg.norm(y))
        y = y / np.linalg.norm(y)
        y2 = np.linalg.solve(mat, y)
        sigma_proxy = min(sigma_proxy, 1.0 / float(np.linalg.norm(y2)))
        y = y2 / np.linalg.norm(y2)
    except np.linalg.LinAlgError:
        # exactly singular to machine precision: take the null vector directly
        _, s, vh = np.linalg.svd(mat)
        sigma_proxy = float(s[-1])
        y = vh[-1].conj()

    if sigma_proxy > 1e-4 * scale:
        raise NotNearSingular(sigma_proxy, scale)

    y = y / y[np.argmax(np.abs(y))]

    h = config.h
    n = config.n
    xs = config.positions()
    lengths = config.lengths
    coeffs = scattering_coefficients(config, z)

    y0_minus = coeffs.T[0] * np.exp(1j * lengths[0] * z / h) * y[0]
    yN_plus = coeffs.T[n - 1] * np.exp(1j * lengths[n - 2] * z / h) * y[d - 1]

    v_plus = np.zeros(n + 1, dtype=complex)
    v_minus = np.zeros(n + 1, dtype=complex)
    # interior intervals j = 1..N-1: y_j^- at 2(j-1), y_j^+ at 2(j-1)+1
    for j in range(1, n):
        v_plus[j] = y[2 * (j - 1) + 1] * np.exp(-1j * xs[j - 1] * z / h)
        v_minus[j] = y[2 * (j - 1)] * np.exp(1j * xs[j] * z / h)
    v_minus[0] = y0_minus * np.exp(1j * xs[0] * z / h)
    v_plus[n] = yN_plus * np.exp(-1j * xs[n - 1] * z / h)

    return ResonantState(
        z=complex(z),
        y=y,
        y0_minus=complex(y0_minus),
        yN_plus=complex(yN_plus),
        v_plus=v_plus,
        v_minus=v_minus,
        positions=xs,
        h=h,
    )
