"""Newton polygon of the cleared secular equation and admissible string slopes.

Each interval subset alpha contributes one point (nu, lam): nu is the smallest
h-exponent among its monomials, lam the w-exponent.  The polygon is the
lower-left boundary of the convex hull of the union of quadrants
(nu, lam) + [0, inf)^2, including the semi-infinite vertical and horizontal
rays.  A string of resonances with Im z ~ -gamma h log(1/h) can only balance
two terms whose points span a finite edge, so gamma = -1/slope of some edge.

The candidates are necessary conditions only: every realized string rate
appears here, but an edge's rate need not be realized (leading coefficients
can cancel).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Sequence

from .secular import ExponentPoint

HULL_REL_TOL = 1e-9


@dataclass(frozen=True)
class PolygonEdge:
    """Finite hull edge from `start` to `end` (both (nu, lam) pairs), nu increasing."""

    start: tuple
    end: tuple
    slope: object  # Delta lam / Delta nu; float, or Fraction in exact mode
    gamma: object  # -1/slope


@dataclass(frozen=True)
class GammaCandidate:
    gamma: object
    edge: PolygonEdge | None
    provenance: str  # "polygon" | "closed_form_2delta" | "closed_form_3delta"


@dataclass(frozen=True)
class NewtonPolygon:
    points: tuple              # input points as (nu, lam, alpha-or-None)
    hull_vertices: tuple       # (nu, lam) vertices, nu ascending
    edges: tuple[PolygonEdge, ...]
    on_hull: tuple[bool, ...]  # per input point: lies on a finite edge or a ray

    def to_dict(self) -> dict:
        return {
            "points": [
                {"nu": _as_jsonable(p[0]), "lam": _as_jsonable(p[1]), "alpha": p[2], "on_hull": oh}
                for p, oh in zip(self.points, self.on_hull)
            ],
            "hull_vertices": [[_as_jsonable(v[0]), _as_jsonable(v[1])] for v in self.hull_vertices],
            "edges": [
                {
                    "from": [_as_jsonable(e.start[0]), _as_jsonable(e.start[1])],
                    "to": [_as_jsonable(e.end[0]), _as_jsonable(e.end[1])],
                    "slope": _as_jsonable(e.slope),
                    "gamma": _as_jsonable(e.gamma),
                }
                for e in self.edges
            ],
            "gammas": [_as_jsonable(e.gamma) for e in self.edges],
        }


def _as_jsonable(x):
    if isinstance(x, Rational) and not isinstance(x, int):
        return float(x)
    return x


def _normalize(points: Iterable) -> list[tuple]:
    out = []
    for p in points:
        if isinstance(p, ExponentPoint):
            nu, lam, alpha = p.nu, p.lam, p.alpha
        else:
            nu, lam = p[0], p[1]
            alpha = p[2] if len(p) > 2 else None
        if not _is_finite(nu) or not _is_finite(lam):
            raise ValueError(f"nonfinite polygon point ({nu}, {lam})")
        if nu < 0 or lam < 0:
            raise ValueError(f"negative polygon coordinate ({nu}, {lam})")
        out.append((nu, lam, alpha))
    if not out:
        raise ValueError("polygon needs at least one point")
    return out


def _is_finite(x) -> bool:
    if isinstance(x, Rational):
        return True
    return x == x and abs(x) != float("inf")


def _cross(o, a, b):
    """Orientation of o->a->b; positive = counterclockwise.  Exact for rationals."""
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _cross_tol(o, a, b, exact: bool, rel_tol: float):
    if exact:
        return 0
    da = ((a[0] - o[0]) ** 2 + (a[1] - o[1]) ** 2) ** 0.5
    db = ((b[0] - o[0]) ** 2 + (b[1] - o[1]) ** 2) ** 0.5
    return rel_tol * da * db


def build_polygon(points: Iterable, *, rel_tol: float = HULL_REL_TOL) -> NewtonPolygon:
    """Lower-left hull of the quadrant union anchored at `points`.

    Accepts ExponentPoint objects or bare (nu, lam) / (nu, lam, alpha) tuples.
    When every coordinate is rational (int or Fraction) all hull predicates are
    exact; otherwise collinearity is decided by cross products with relative
    tolerance `rel_tol`.
    """
    raw = _normalize(points)
    exact = all(
        isinstance(p[0], Rational) and isinstance(p[1], Rational) for p in raw
    )

    # Pareto frontier: only points minimal in both coordinates can touch the
    # lower-left boundary.
    coords = sorted({(p[0], p[1]) for p in raw})  # nu asc, lam asc within nu
    frontier: list[tuple] = []
    best_lam = None
    for nu, lam in coords:
        if frontier and frontier[-1][0] == nu:
            continue  # same nu, larger lam is dominated
        if best_lam is not None and lam >= best_lam:
            continue
        frontier.append((nu, lam))
        best_lam = lam

    # Monotone-chain lower hull over the frontier; collinear middles popped.
    hull: list[tuple] = []
    for p in frontier:
        while len(hull) >= 2:
            c = _cross(hull[-2], hull[-1], p)
            if c <= _cross_tol(hull[-2], hull[-1], p, exact, rel_tol):
                hull.pop()
            else:
                break
        hull.append(p)

    edges = []
    for a, b in zip(hull, hull[1:]):
        dnu = b[0] - a[0]
        dlam = b[1] - a[1]
        slope = dlam / dnu
        edges.append(PolygonEdge(start=a, end=b, slope=slope, gamma=-dnu / dlam))

    on_hull = tuple(_on_hull(p, hull, edges, exact, rel_tol) for p in raw)
    return NewtonPolygon(
        points=tuple(raw),
        hull_vertices=tuple(hull),
        edges=tuple(edges),
        on_hull=on_hull,
    )


def _on_hull(p, hull, edges, exact: bool, rel_tol: float) -> bool:
    nu, lam = p[0], p[1]

    def close(a, b) -> bool:
        if exact:
            return a == b
        scale = max(abs(a), abs(b), 1.0)
        return abs(a - b) <= rel_tol * scale

    if any(close(nu, v[0]) and close(lam, v[1]) for v in hull):
        return True
    # vertical ray above the first vertex
    first, last = hull[0], hull[-1]
    if close(nu, first[0]) and lam >= first[1]:
        return True
    # horizontal ray right of the last vertex
    if close(lam, last[1]) and nu >= last[0]:
        return True
    for e in edges:
        if not (e.start[0] <= nu <= e.end[0]):
            continue
        c = _cross(e.start, e.end, (nu, lam))
        if exact:
            if c == 0:
                return True
        elif abs(c) <= _cross_tol(e.start, e.end, (nu, lam), False, rel_tol):
            return True
    return False


def gamma_candidates(polygon: NewtonPolygon) -> list[GammaCandidate]:
    """One candidate per finite edge, gamma = -1/slope, sorted ascending.

    Hull convexity makes the edge order already ascending in gamma; this is
    asserted rather than re-sorted so a violation surfaces loudly.
    """
    out = [
        GammaCandidate(gamma=e.gamma, edge=e, provenance="polygon")
        for e in polygon.edges
    ]
    for a, b in zip(out, out[1:]):
        assert a.gamma < b.gamma, "hull edges out of gamma order"
    return out


def edges_csv(polygon: NewtonPolygon) -> str:
    """Edge table for external plotting."""
    lines = ["nu_from,lam_from,nu_to,lam_to,slope,gamma"]
    for e in polygon.edges:
        lines.append(
            f"{float(e.start[0])!r},{float(e.start[1])!r},"
            f"{float(e.end[0])!r},{float(e.end[1])!r},"
            f"{float(e.slope)!r},{float(e.gamma)!r}"
        )
    return "\n".join(lines) + "\n"
