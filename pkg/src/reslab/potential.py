"""Delta-potential configurations and per-pole scattering coefficients.

A configuration is N >= 2 delta poles at sorted positions x_1 < ... < x_N with
couplings C_j != 0 and strength exponents beta_j > 0, plus a semiclassical
parameter h in (0, 1).  The pole at x_j carries weight C_j * h**(1 + beta_j),
so every pole fades as h -> 0 but at its own rate.

At spectral parameter z != 0 each pole scatters plane waves with

    Vtilde_j = C_j * h**beta_j / (2 i z)
    T_j      = 1 / (1 - Vtilde_j)          (transmission)
    R_j      = Vtilde_j / (1 - Vtilde_j)   (reflection)

so T_j - R_j = 1 identically.  Coefficients are recomputed per z; nothing is
cached between calls.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from numbers import Real
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    BadH,
    ConfigError,
    DuplicatePosition,
    NonpositiveBeta,
    SingularCoefficient,
    TooFewPoles,
    ZeroCoupling,
    ZeroSpectralParameter,
)

# |1 - Vtilde_j| below this is treated as an exact zero of the denominator.
SINGULAR_FLOOR = 1e-300


@dataclass(frozen=True)
class Pole:
    """One delta pole: position, coupling, strength exponent."""

    x: float
    C: float
    beta: float


@dataclass(frozen=True)
class PotentialConfig:
    """Validated, immutable N-pole configuration.

    ``poles`` is sorted by position; ``lengths[k]`` is x_{k+2} - x_{k+1}
    (the k-th gap, 0-based) and ``total_length`` their sum.
    """

    h: float
    poles: tuple[Pole, ...]
    lengths: tuple[float, ...]
    total_length: float

    @property
    def n(self) -> int:
        return len(self.poles)

    def positions(self) -> np.ndarray:
        return np.array([p.x for p in self.poles], dtype=float)

    def couplings(self) -> np.ndarray:
        return np.array([p.C for p in self.poles], dtype=float)

    def betas(self) -> np.ndarray:
        return np.array([p.beta for p in self.poles], dtype=float)

    def lengths_array(self) -> np.ndarray:
        return np.array(self.lengths, dtype=float)

    def as_dict(self) -> dict:
        return {
            "h": self.h,
            "deltas": [{"x": p.x, "C": p.C, "beta": p.beta} for p in self.poles],
        }


def _require_finite_real(value, what: str, index: int) -> float:
    # bool is a Real; reject it along with complex and non-numbers
    if isinstance(value, bool) or not isinstance(value, Real):
        raise ConfigError(f"pole {index}: {what} must be a real number, got {value!r}")
    v = float(value)
    if not math.isfinite(v):
        raise ConfigError(f"pole {index}: {what} must be finite, got {value!r}")
    return v


def validate_config(h, poles: Iterable) -> PotentialConfig:
    """Validate an unordered pole list plus h and return a sorted config.

    Accepts poles as ``Pole``, ``(x, C, beta)`` tuples, or mappings with those
    keys.  Per-pole errors (ZeroCoupling, NonpositiveBeta) report the position
    in the input order; DuplicatePosition reports the sorted index.
    """
    if isinstance(h, bool) or not isinstance(h, Real) or not math.isfinite(float(h)):
        raise BadH(h)
    h = float(h)
    if not 0.0 < h < 1.0:
        raise BadH(h)

    parsed: list[Pole] = []
    for i, raw in enumerate(poles):
        if isinstance(raw, Pole):
            x, c, b = raw.x, raw.C, raw.beta
        elif isinstance(raw, Mapping):
            x, c, b = raw["x"], raw["C"], raw["beta"]
        else:
            x, c, b = raw
        x = _require_finite_real(x, "x", i)
        c = _require_finite_real(c, "C", i)
        b = _require_finite_real(b, "beta", i)
        if c == 0.0:
            raise ZeroCoupling(i)
        if b <= 0.0:
            raise NonpositiveBeta(i, b)
        parsed.append(Pole(x, c, b))

    if len(parsed) < 2:
        raise TooFewPoles(len(parsed))

    parsed.sort(key=lambda p: p.x)
    for i in range(len(parsed) - 1):
        if parsed[i].x == parsed[i + 1].x:
            raise DuplicatePosition(i, parsed[i].x)

    lengths = tuple(parsed[i + 1].x - parsed[i].x for i in range(len(parsed) - 1))
    return PotentialConfig(
        h=h,
        poles=tuple(parsed),
        lengths=lengths,
        total_length=float(sum(lengths)),
    )


def config_from_dict(data: Mapping, default_coupling: float = 1.0) -> PotentialConfig:
    """Build a config from the JSON schema {"h": num, "deltas": [{"x","C","beta"}]}.

    "C" may be omitted per delta (defaults to ``default_coupling``); any other
    unknown field, at either level, is rejected.
    """
    if not isinstance(data, Mapping):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - {"h", "deltas"}
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    if "h" not in data or "deltas" not in data:
        raise ConfigError('config needs both "h" and "deltas"')
    deltas = data["deltas"]
    if not isinstance(deltas, Sequence) or isinstance(deltas, (str, bytes)):
        raise ConfigError('"deltas" must be an array of objects')
    poles = []
    for i, entry in enumerate(deltas):
        if not isinstance(entry, Mapping):
            raise ConfigError(f"delta {i} must be an object")
        bad = set(entry) - {"x", "C", "beta"}
        if bad:
            raise ConfigError(f"delta {i}: unknown fields {sorted(bad)}")
        if "x" not in entry or "beta" not in entry:
            raise ConfigError(f'delta {i}: needs "x" and "beta"')
        poles.append({"x": entry["x"], "C": entry.get("C", default_coupling), "beta": entry["beta"]})
    return validate_config(data["h"], poles)


def load_config(path) -> PotentialConfig:
    """Read and validate a JSON config file."""
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from e
    return config_from_dict(data)


@dataclass(frozen=True)
class ScatteringCoefficients:
    """Per-pole Vtilde, T, R at one spectral parameter z."""

    z: complex
    vtilde: tuple[complex, ...]
    T: tuple[complex, ...]
    R: tuple[complex, ...]


def vtilde_batch(config: PotentialConfig, z: np.ndarray) -> np.ndarray:
    """Vtilde_j for an array of z; shape (*z.shape, N).  No singularity checks."""
    z = np.asarray(z, dtype=complex)
    weights = config.couplings() * config.h ** config.betas()  # C_j h^beta_j
    return weights / (2j * z[..., None])


def scattering_coefficients(config: PotentialConfig, z: complex) -> ScatteringCoefficients:
    """Compute (Vtilde_j, T_j, R_j) at a single z.

    Raises ZeroSpectralParameter at z=0 and SingularCoefficient(j) when
    |1 - Vtilde_j| < 1e-300 (T_j, R_j undefined there).
    """
    z = complex(z)
    if z == 0:
        raise ZeroSpectralParameter()
    v = vtilde_batch(config, np.array(z))
    denom = 1.0 - v
    small = np.abs(denom) < SINGULAR_FLOOR
    if small.any():
        raise SingularCoefficient(int(np.argmax(small)))
    t = 1.0 / denom
    r = v * t
    return ScatteringCoefficients(
        z=z,
        vtilde=tuple(complex(c) for c in v),
        T=tuple(complex(c) for c in t),
        R=tuple(complex(c) for c in r),
    )
