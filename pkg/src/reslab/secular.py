"""Secular matrix, determinant evaluation, and its exact expansion.

Resonances are the z in the lower half-plane where the outgoing transfer
system has a nontrivial solution, i.e. where det(A - I) = 0 for the
2(N-1) x 2(N-1) secular matrix A built from the per-pole scattering
coefficients and the interval phases w**(-l_k) with w = exp(-i z / h).

Two evaluation routes are kept deliberately separate:

* a numeric route (LU via slogdet) used by the root finder, carried in log
  form so deep windows neither overflow nor underflow, and
* an exact symbolic route that expands det(A - I) * w**(2|l|) * prod(1-Vt_j)**2
  into integer-coefficient polynomials in Vtilde_1..Vtilde_N, one polynomial
  per interval subset alpha, with w-exponent 2*(|l| - alpha.l).

The symbolic route feeds the Newton polygon; the numeric route is checked
against it term by term in the tests.
"""

from __future__ import annotations

import cmath
import json
from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    OverflowGuard,
    SingularCoefficient,
    TooManyPoles,
    ZeroSpectralParameter,
)
from .potential import SINGULAR_FLOOR, PotentialConfig, vtilde_batch

# Exact expansion cap: term count and DFS cost grow ~2**N.
MAX_EXPANSION_POLES = 12

# Entry-level overflow guard: |exp(i l z / h)| = exp(l |Im z| / h) must fit a double.
GUARD_EXPONENT = 600.0


# ---------------------------------------------------------------------------
# structure


@dataclass(frozen=True)
class MatrixEntry:
    """One off-diagonal entry of A: coefficient kind('R'|'T') of `pole`, times w**(-l_{length_index})."""

    row: int
    col: int
    kind: str
    pole: int          # 1-based pole index
    length_index: int  # 1-based gap index


@dataclass(frozen=True)
class SecularMatrixSpec:
    n_poles: int
    dim: int
    entries: tuple[MatrixEntry, ...]


@lru_cache(maxsize=None)
def matrix_structure(n_poles: int) -> SecularMatrixSpec:
    """Positions and kinds of the nonzero entries of A for N poles.

    Unknown ordering is (y_1^-, y_1^+, ..., y_{N-1}^-, y_{N-1}^+).  Row
    2(j-1) states the equation for y_j^-, row 2(j-1)+1 the one for y_j^+.
    The matrix is pentadiagonal with a zero diagonal.
    """
    if n_poles < 2:
        raise ValueError("secular matrix needs at least 2 poles")
    entries: list[MatrixEntry] = []
    for j in range(1, n_poles):  # interior amplitude index
        r_minus = 2 * (j - 1)
        r_plus = r_minus + 1
        # y_j^- couples forward through pole j+1
        entries.append(MatrixEntry(r_minus, r_minus + 1, "R", j + 1, j))
        if j + 1 <= n_poles - 1:
            entries.append(MatrixEntry(r_minus, r_minus + 2, "T", j + 1, j + 1))
        # y_j^+ couples backward through pole j
        entries.append(MatrixEntry(r_plus, r_plus - 1, "R", j, j))
        if j - 1 >= 1:
            entries.append(MatrixEntry(r_plus, r_plus - 2, "T", j, j - 1))
    for e in entries:
        assert 0 < abs(e.row - e.col) <= 2
    return SecularMatrixSpec(n_poles, 2 * (n_poles - 1), tuple(entries))


# ---------------------------------------------------------------------------
# numeric evaluation


@dataclass
class DetBatch:
    """Determinant data for a flat batch of z values, kept in log form.

    cleared = det(A - I) * w**(2|l|) * prod_j (1 - Vt_j)**2.  log_scale is a
    Hadamard-style bound on |cleared| (product of row norms times the clearing
    factor) used as the local term scale for residuals and near-zero tests.
    """

    z: np.ndarray
    cleared: np.ndarray
    log_abs: np.ndarray
    arg: np.ndarray
    log_scale: np.ndarray
    raw_sign: np.ndarray
    raw_log_abs: np.ndarray


def _wrap_angle(a: np.ndarray) -> np.ndarray:
    """Wrap to (-pi, pi]."""
    w = np.mod(a + np.pi, 2.0 * np.pi) - np.pi
    return np.where(w == -np.pi, np.pi, w)


def check_overflow_guard(config: PotentialConfig, im_extreme: float) -> None:
    if abs(im_extreme) * max(config.lengths) / config.h > GUARD_EXPONENT:
        raise OverflowGuard(
            f"|Im z| = {abs(im_extreme):.3e} too deep for h = {config.h:.3e}: "
            f"|Im z| * max(lengths) / h must stay <= {GUARD_EXPONENT:g}"
        )


def assemble(config: PotentialConfig, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Assemble A - I for a flat array of z.  Returns (B, denom) with
    B of shape (M, dim, dim) and denom = 1 - Vtilde of shape (M, N)."""
    spec = matrix_structure(config.n)
    z = np.asarray(z, dtype=complex).ravel()
    if (z == 0).any():
        raise ZeroSpectralParameter()
    check_overflow_guard(config, float(np.abs(z.imag).max(initial=0.0)))

    v = vtilde_batch(config, z)
    denom = 1.0 - v
    small = np.abs(denom) < SINGULAR_FLOOR
    if small.any():
        raise SingularCoefficient(int(np.argmax(small.any(axis=0))))
    t_coef = 1.0 / denom
    r_coef = v * t_coef

    lengths = config.lengths_array()
    phases = np.exp(1j * z[:, None] * lengths[None, :] / config.h)  # w**(-l_k)

    m = z.shape[0]
    b = np.zeros((m, spec.dim, spec.dim), dtype=complex)
    idx = np.arange(spec.dim)
    b[:, idx, idx] = -1.0
    for e in spec.entries:
        coef = r_coef if e.kind == "R" else t_coef
        b[:, e.row, e.col] = coef[:, e.pole - 1] * phases[:, e.length_index - 1]
    return b, denom


def evaluate_dets(config: PotentialConfig, z) -> DetBatch:
    """Evaluate raw and cleared determinants over any array of z (flattened)."""
    z = np.asarray(z, dtype=complex).ravel()
    b, denom = assemble(config, z)
    sign, log_abs_raw = np.linalg.slogdet(b)

    # clearing factor w**(2|l|) * prod (1 - Vt_j)^2, as a complex log
    clear_log = (-2j * config.total_length / config.h) * z + 2.0 * np.sum(np.log(denom), axis=1)

    log_abs = log_abs_raw + clear_log.real
    arg = _wrap_angle(np.angle(sign) + clear_log.imag)
    with np.errstate(over="ignore", under="ignore"):
        cleared = sign * np.exp(log_abs_raw + clear_log)

    row_norms = np.sqrt(np.sum(np.abs(b) ** 2, axis=2))
    log_scale = np.sum(np.log(row_norms), axis=1) + clear_log.real

    return DetBatch(
        z=z,
        cleared=cleared,
        log_abs=log_abs,
        arg=arg,
        log_scale=log_scale,
        raw_sign=sign,
        raw_log_abs=log_abs_raw,
    )


@dataclass(frozen=True)
class SecularDet:
    raw: complex
    cleared: complex


def secular_det(config: PotentialConfig, z: complex) -> SecularDet:
    """det(A - I) at one z, raw and cleared.

    The raw value can overflow to inf in windows that are deep yet still
    within the entry-level guard; the cleared value stays representable.
    """
    batch = evaluate_dets(config, np.array([complex(z)]))
    with np.errstate(over="ignore", under="ignore"):
        raw = complex(batch.raw_sign[0] * np.exp(batch.raw_log_abs[0]))
    return SecularDet(raw=raw, cleared=complex(batch.cleared[0]))


# ---------------------------------------------------------------------------
# exact expansion

# A monomial over Vtilde_1..Vtilde_N is stored as a fixed-width base-3 integer:
# digit j (0-based, least significant) is the exponent of Vtilde_{j+1}, always
# in {0, 1, 2}.  An interval subset alpha is an (N-1)-bit mask, bit k set when
# gap k+1 is absent from the w-exponent: w-power = 2 * (|l| - alpha . l).

_POW3 = tuple(3**j for j in range(MAX_EXPANSION_POLES + 1))


def monomial_key(m: Sequence[int]) -> int:
    key = 0
    for j, e in enumerate(m):
        if not 0 <= e <= 2:
            raise ValueError(f"exponent {e} out of range {{0,1,2}} at position {j}")
        key += e * _POW3[j]
    return key


def monomial_exponents(key: int, n_poles: int) -> tuple[int, ...]:
    out = []
    for _ in range(n_poles):
        key, r = divmod(key, 3)
        out.append(r)
    return tuple(out)


def alpha_bits(alpha: int, n_poles: int) -> str:
    return "".join("1" if (alpha >> k) & 1 else "0" for k in range(n_poles - 1))


def alpha_from_bits(bits: str) -> int:
    return sum(1 << k for k, c in enumerate(bits) if c == "1")


@dataclass(frozen=True)
class ExponentPoint:
    """Newton-polygon input point for one alpha: (nu, lam) with
    nu = min over monomials of sum_j m_j beta_j and lam = 2(|l| - alpha.l)."""

    nu: float
    lam: float
    alpha: int


@dataclass(frozen=True)
class SecularExpansion:
    """Exact integer expansion of the cleared determinant.

    terms[alpha][key] is the integer coefficient of the base-3 monomial `key`
    in the coefficient polynomial of w**(2(|l| - alpha.l)).
    """

    n_poles: int
    terms: Mapping[int, Mapping[int, int]]

    def alphas(self) -> list[int]:
        return sorted(self.terms)

    def monomials(self, alpha: int) -> list[tuple[tuple[int, ...], int]]:
        return [
            (monomial_exponents(k, self.n_poles), c)
            for k, c in sorted(self.terms[alpha].items())
        ]

    def w_exponent(self, alpha: int, config: PotentialConfig) -> float:
        lengths = config.lengths
        drop = sum(lengths[k] for k in range(len(lengths)) if (alpha >> k) & 1)
        return 2.0 * (config.total_length - drop)

    def evaluate(self, config: PotentialConfig, z) -> np.ndarray:
        """Termwise numeric value of the cleared determinant (oracle route)."""
        z = np.asarray(z, dtype=complex).ravel()
        if (z == 0).any():
            raise ZeroSpectralParameter()
        v = vtilde_batch(config, z)
        total = np.zeros(z.shape, dtype=complex)
        for alpha in self.alphas():
            coeff = np.zeros(z.shape, dtype=complex)
            for key, c in sorted(self.terms[alpha].items()):
                mono = np.ones(z.shape, dtype=complex)
                for j, e in enumerate(monomial_exponents(key, self.n_poles)):
                    if e:
                        mono = mono * v[:, j] ** e
                coeff += c * mono
            lam = self.w_exponent(alpha, config)
            total += coeff * np.exp(-1j * lam / config.h * z)
        return total

    def to_json(self) -> str:
        payload = {
            "n_poles": self.n_poles,
            "terms": [
                {
                    "alpha": alpha_bits(alpha, self.n_poles),
                    "monomials": [
                        {"m": list(monomial_exponents(k, self.n_poles)), "coeff": c}
                        for k, c in sorted(self.terms[alpha].items())
                    ],
                }
                for alpha in self.alphas()
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "SecularExpansion":
        payload = json.loads(text)
        n = payload["n_poles"]
        terms: dict[int, dict[int, int]] = {}
        for item in payload["terms"]:
            alpha = alpha_from_bits(item["alpha"])
            terms[alpha] = {
                monomial_key(mono["m"]): int(mono["coeff"]) for mono in item["monomials"]
            }
        return SecularExpansion(n_poles=n, terms=terms)


def _perm_sign(perm: Sequence[int]) -> int:
    seen = [False] * len(perm)
    sign = 1
    for i in range(len(perm)):
        if seen[i]:
            continue
        length = 0
        j = i
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def _accumulate_term(terms, n_poles, sign, r_counts, t_counts, len_counts) -> None:
    """Fold one Leibniz term, already cleared by prod_j (1 - Vt_j)**2, into `terms`.

    Clearing turns R_j**a T_j**b (1-Vt_j)**2 into Vt_j**a (1-Vt_j)**(2-a-b);
    the factors for different j touch disjoint variables so the product is a
    plain outer product of the per-pole binomials.
    """
    alpha = 0
    for k, c in enumerate(len_counts):
        if c == 0:
            continue
        if c != 2:
            raise AssertionError(f"gap {k + 1} used {c} times in one term; expected 0 or 2")
        alpha |= 1 << k
    monos: dict[tuple[int, ...], int] = {tuple([0] * n_poles): sign}
    for j in range(n_poles):
        a = r_counts[j]
        c = 2 - a - t_counts[j]
        if c < 0:
            raise AssertionError(f"pole {j + 1} used more than twice in one term")
        # (1 - Vt_j)**c, shifted by Vt_j**a
        if c == 0:
            binom = ((a, 1),)
        elif c == 1:
            binom = ((a, 1), (a + 1, -1))
        else:
            binom = ((a, 1), (a + 1, -2), (a + 2, 1))
        if binom == ((0, 1),):
            continue
        new: dict[tuple[int, ...], int] = {}
        for m, coeff in monos.items():
            for e, bc in binom:
                key = m[:j] + (e,) + m[j + 1 :]
                new[key] = new.get(key, 0) + coeff * bc
        monos = new
    bucket = terms.setdefault(alpha, {})
    for m, coeff in monos.items():
        k = monomial_key(m)
        tot = bucket.get(k, 0) + coeff
        if tot:
            bucket[k] = tot
        else:
            bucket.pop(k, None)


@lru_cache(maxsize=None)
def _expansion_for(n_poles: int) -> SecularExpansion:
    """DFS over the nonzero Leibniz terms of det(A - I), then clear denominators.

    Rows are assigned in order; each row takes its diagonal (-1) or one unused
    off-diagonal column.  The band structure keeps the live branch count small,
    so this stays cheap well past the N <= 12 cap.
    """
    spec = matrix_structure(n_poles)
    d = spec.dim
    by_row: list[list[MatrixEntry]] = [[] for _ in range(d)]
    for e in spec.entries:
        by_row[e.row].append(e)

    terms: dict[int, dict[int, int]] = {}
    perm = [0] * d
    chosen: list[MatrixEntry | None] = [None] * d

    def dfs(row: int, used: int) -> None:
        if row == d:
            sign = _perm_sign(perm)
            r_counts = [0] * n_poles
            t_counts = [0] * n_poles
            len_counts = [0] * (n_poles - 1)
            n_diag = 0
            for ch in chosen:
                if ch is None:
                    n_diag += 1
                    continue
                if ch.kind == "R":
                    r_counts[ch.pole - 1] += 1
                else:
                    t_counts[ch.pole - 1] += 1
                len_counts[ch.length_index - 1] += 1
            if n_diag % 2 == 1:
                sign = -sign
            _accumulate_term(terms, n_poles, sign, r_counts, t_counts, len_counts)
            return
        bit = 1 << row
        if not used & bit:
            perm[row] = row
            chosen[row] = None
            dfs(row + 1, used | bit)
        for e in by_row[row]:
            cbit = 1 << e.col
            if used & cbit:
                continue
            perm[row] = e.col
            chosen[row] = e
            dfs(row + 1, used | cbit)
        chosen[row] = None

    dfs(0, 0)
    frozen = {alpha: dict(poly) for alpha, poly in terms.items() if poly}
    return SecularExpansion(n_poles=n_poles, terms=frozen)


def expand_terms(config: PotentialConfig) -> SecularExpansion:
    """Exact expansion of the cleared determinant; structure depends only on N."""
    if config.n > MAX_EXPANSION_POLES:
        raise TooManyPoles(config.n, MAX_EXPANSION_POLES)
    return _expansion_for(config.n)


# --- independent brute-force oracle ----------------------------------------


def _poly_mul(p: dict, q: dict) -> dict:
    out: dict[tuple[int, ...], int] = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            m = tuple(a + b for a, b in zip(m1, m2))
            tot = out.get(m, 0) + c1 * c2
            if tot:
                out[m] = tot
            else:
                out.pop(m, None)
    return out


def expand_terms_bruteforce(config: PotentialConfig) -> SecularExpansion:
    """Leibniz-sum oracle for the exact expansion, N <= 4 only.

    Works on the row-cleared matrix: multiplying the y_j^- row by
    (1 - Vt_{j+1}) and the y_j^+ row by (1 - Vt_j) makes every entry a plain
    polynomial; det then picks up all clearing factors except one (1 - Vt_1)
    and one (1 - Vt_N), which are multiplied back in at the end.  This shares
    nothing with the DFS route except the storage encoding.
    """
    n = config.n
    if n > 4:
        raise ValueError("brute-force oracle is limited to 4 poles")
    d = 2 * (n - 1)
    unit = tuple([0] * n)

    def var(j: int) -> tuple[int, ...]:  # exponent vector of Vtilde_j, 1-based j
        return tuple(1 if i == j - 1 else 0 for i in range(n))

    # entry -> (polynomial, length index or 0)
    empty: dict = {}
    mat: list[list[tuple[dict, int]]] = [[(empty, 0)] * d for _ in range(d)]
    for j in range(1, n):
        r_minus, r_plus = 2 * (j - 1), 2 * (j - 1) + 1
        mat[r_minus][r_minus] = ({unit: -1, var(j + 1): 1}, 0)       # -(1 - Vt_{j+1})
        mat[r_minus][r_minus + 1] = ({var(j + 1): 1}, j)             # Vt_{j+1} w^{-l_j}
        if j + 1 <= n - 1:
            mat[r_minus][r_minus + 2] = ({unit: 1}, j + 1)           # w^{-l_{j+1}}
        mat[r_plus][r_plus] = ({unit: -1, var(j): 1}, 0)             # -(1 - Vt_j)
        mat[r_plus][r_plus - 1] = ({var(j): 1}, j)                   # Vt_j w^{-l_j}
        if j - 1 >= 1:
            mat[r_plus][r_plus - 2] = ({unit: 1}, j - 1)             # w^{-l_{j-1}}

    acc: dict[int, dict] = {}
    for perm in permutations(range(d)):
        poly = {unit: 1}
        len_counts = [0] * (n - 1)
        ok = True
        for r in range(d):
            entry, lidx = mat[r][perm[r]]
            if not entry:
                ok = False
                break
            poly = _poly_mul(poly, entry)
            if lidx:
                len_counts[lidx - 1] += 1
        if not ok or not poly:
            continue
        sign = _perm_sign(perm)
        alpha = 0
        for k, c in enumerate(len_counts):
            if c == 0:
                continue
            if c != 2:
                raise AssertionError(f"gap {k + 1} used {c} times in one term")
            alpha |= 1 << k
        bucket = acc.setdefault(alpha, {})
        for m, c in poly.items():
            tot = bucket.get(m, 0) + sign * c
            if tot:
                bucket[m] = tot
            else:
                bucket.pop(m, None)

    # restore the missing clearing factors
    tail = _poly_mul({unit: 1, var(1): -1}, {unit: 1, var(n): -1})
    terms: dict[int, dict[int, int]] = {}
    for alpha, poly in acc.items():
        cleared = _poly_mul(poly, tail)
        if cleared:
            terms[alpha] = {monomial_key(m): c for m, c in cleared.items()}
    return SecularExpansion(n_poles=n, terms=terms)


# ---------------------------------------------------------------------------
# high-accuracy point evaluation for root polishing
#
# Evaluating through the matrix route rounds z to a double first; at
# Re z ~ 1, h ~ 1e-6 that smears every interval phase by roughly
# ulp(1) * 2|l|/h ~ 4e-9 rad and caps the attainable root accuracy at about
# 1e-9 of a string spacing.  The evaluator below works on the expansion
# instead, splitting each w-power phase into a base part (reduced mod 2pi in
# double-double arithmetic, computed once) plus an exact local offset, so the
# phase error per evaluation stays near 1e-14 rad.

_SPLITTER = 134217729.0  # 2**27 + 1, Dekker splitting constant
_TAU_HI = 6.283185307179586
_TAU_LO = 2.4492935982947064e-16


def _two_sum(a: float, b: float) -> tuple[float, float]:
    s = a + b
    t = s - a
    return s, (a - (s - t)) + (b - t)


def _two_prod(a: float, b: float) -> tuple[float, float]:
    p = a * b
    aa = _SPLITTER * a
    a_hi = aa - (aa - a)
    a_lo = a - a_hi
    bb = _SPLITTER * b
    b_hi = bb - (bb - b)
    b_lo = b - b_hi
    return p, ((a_hi * b_hi - p) + a_hi * b_lo + a_lo * b_hi) + a_lo * b_lo


def _dd_div(a: float, b: float) -> tuple[float, float]:
    q1 = a / b
    p, e = _two_prod(q1, b)
    return _two_sum(q1, ((a - p) - e) / b)


def _dd_scale(hi: float, lo: float, s: float) -> tuple[float, float]:
    p, e = _two_prod(hi, s)
    return _two_sum(p, e + lo * s)


def _dd_mod_tau(hi: float, lo: float) -> float:
    """Reduce the double-double angle hi+lo into (-pi, pi], to ~1e-16 abs."""
    k = round((hi + lo) / _TAU_HI)
    p1, e1 = _two_prod(float(k), _TAU_HI)
    p2, e2 = _two_prod(float(k), _TAU_LO)
    s_hi, s_lo = _two_sum(p1, e1 + p2 + e2)
    # hi and s_hi agree to within ~pi out of ~1e7, so this difference is exact
    return (hi - s_hi) + (lo - s_lo)


class ClearedSumEvaluator:
    """Cleared determinant as an explicit exponential sum in u = (z - z_base)/h.

    Built once per base point; each call costs one pass over the expansion.
    Values are returned together with the local term scale sum(|a_alpha w^lam|),
    the natural yardstick for a residual at z.
    """

    def __init__(self, config: PotentialConfig, z_base: complex):
        expansion = expand_terms(config)
        self.config = config
        self.z_base = z_base
        x0 = _dd_div(z_base.real, config.h)
        y0 = z_base.imag / config.h
        self._parts = []
        for alpha in expansion.alphas():
            monos = expansion.monomials(alpha)
            exps = np.array([m for m, _ in monos], dtype=np.int64)
            coeffs = np.array([c for _, c in monos], dtype=float)
            lam = expansion.w_exponent(alpha, config)
            # w**lam = exp(-i lam z / h): phase -lam (x0 + Re u), growth lam (y0 + Im u)
            ph = _dd_mod_tau(*_dd_scale(x0[0], x0[1], -lam))
            self._parts.append((exps, coeffs, lam, ph, lam * y0))

    def __call__(self, u: complex) -> tuple[complex, float]:
        """(value, term_scale) at z = z_base + u*h; value is NOT normalized."""
        z = self.z_base + u * self.config.h
        if z == 0:
            raise ZeroSpectralParameter()
        v = vtilde_batch(self.config, np.array([z]))[0]
        total = 0j
        scale = 0.0
        for exps, coeffs, lam, ph_base, mag_base in self._parts:
            mono = np.prod(np.power(v[None, :], exps), axis=1)
            coeff = complex(coeffs @ mono)
            factor = cmath.exp(complex(mag_base + lam * u.imag, ph_base - lam * u.real))
            total += coeff * factor
            scale += abs(coeff) * abs(factor)
        return total, scale


def exponent_points(expansion: SecularExpansion, config: PotentialConfig) -> list[ExponentPoint]:
    """One (nu, lam) point per alpha, ready for the Newton polygon."""
    if expansion.n_poles != config.n:
        raise ValueError("expansion and config disagree on the number of poles")
    betas = config.betas()
    points = []
    for alpha in expansion.alphas():
        nu = min(
            float(np.dot(monomial_exponents(key, config.n), betas))
            for key in expansion.terms[alpha]
        )
        points.append(ExponentPoint(nu=nu, lam=expansion.w_exponent(alpha, config), alpha=alpha))
    points.sort(key=lambda p: (p.nu, p.lam, p.alpha))
    return points
