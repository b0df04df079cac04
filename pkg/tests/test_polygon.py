from __future__ import annotations

import json
import math
from fractions import Fraction

import numpy as np
import pytest

from reslab.asymptotics import three_delta_gammas
from reslab.polygon import build_polygon, edges_csv, gamma_candidates
from reslab.potential import validate_config
from reslab.secular import expand_terms, exponent_points

ROOT2 = math.sqrt(2.0)


def test_three_pole_reference_hull():
    # betas (0.9, 0.1, 1.0), gaps (5, 3*sqrt(2)): candidates 0.1 and 0.9/(6*sqrt(2))
    cfg = validate_config(1e-6, [(-5.0, 1.0, 0.9), (0.0, 1.0, 0.1), (3 * ROOT2, 1.0, 1.0)])
    poly = build_polygon(exponent_points(expand_terms(cfg), cfg))
    cands = gamma_candidates(poly)
    assert [c.gamma for c in cands] == pytest.approx([0.1, 0.9 / (6 * ROOT2)], abs=1e-14)
    total = 2 * (5 + 3 * ROOT2)
    verts = [(v[0], v[1]) for v in poly.hull_vertices]
    assert verts[0] == pytest.approx((0.0, total))
    assert verts[-1] == pytest.approx((1.9, 0.0))


def test_collinear_middle_is_on_hull_but_not_vertex():
    poly = build_polygon([(0, 4), (1, 2), (2, 0)])
    assert len(poly.hull_vertices) == 2
    assert all(poly.on_hull)  # the popped middle still sits on the edge
    cands = gamma_candidates(poly)
    assert len(cands) == 1
    assert cands[0].gamma == pytest.approx(0.5)


def test_exact_mode_keeps_barely_off_edge_vertex():
    # a 1e-15 bulge is below the float tolerance but exact for Fractions
    eps = Fraction(1, 10**15)
    pts_exact = [(Fraction(0), Fraction(4)), (Fraction(1), Fraction(2) - eps), (Fraction(2), Fraction(0))]
    assert len(build_polygon(pts_exact).hull_vertices) == 3
    pts_float = [(0.0, 4.0), (1.0, 2.0 - 1e-15), (2.0, 0.0)]
    assert len(build_polygon(pts_float).hull_vertices) == 2


def test_dominated_points_never_reach_hull():
    base = [(0, 6), (1, 1), (3, 0)]
    noisy = base + [(2, 5), (1, 7), (4, 2), (3, 1)]
    a = build_polygon(base)
    b = build_polygon(noisy)
    assert a.hull_vertices == b.hull_vertices
    # noisy extras all sit strictly inside
    assert list(b.on_hull[3:]) == [False, False, False, False]


def test_single_point_has_no_edges():
    poly = build_polygon([(0.0, 3.0)])
    assert len(poly.hull_vertices) == 1
    assert poly.edges == ()
    assert gamma_candidates(poly) == []


def test_gammas_ascending_and_positive():
    rng = np.random.default_rng(21)
    for _ in range(30):
        n = int(rng.integers(2, 6))
        xs = np.sort(rng.uniform(-6.0, 6.0, size=n))
        while np.min(np.diff(xs)) < 0.4:
            xs = np.sort(rng.uniform(-6.0, 6.0, size=n))
        cfg = validate_config(
            1e-6,
            [(float(xs[i]), 1.0, float(b)) for i, b in enumerate(rng.uniform(0.05, 2.0, size=n))],
        )
        gs = [c.gamma for c in gamma_candidates(build_polygon(exponent_points(expand_terms(cfg), cfg)))]
        assert gs == sorted(gs)
        assert all(g > 0 for g in gs)
        assert len(gs) <= 2 ** (n - 1) - 1


def test_agrees_with_three_delta_formulas():
    rng = np.random.default_rng(22)
    for _ in range(50):
        b = rng.uniform(0.05, 2.0, size=3)
        l1, l2 = rng.uniform(0.5, 6.0, size=2)
        cfg = validate_config(
            1e-6, [(0.0, 1.0, float(b[0])), (l1, 1.0, float(b[1])), (l1 + l2, 1.0, float(b[2]))]
        )
        got = sorted(c.gamma for c in gamma_candidates(build_polygon(exponent_points(expand_terms(cfg), cfg))))
        want = sorted(three_delta_gammas(cfg).as_set())
        assert len(got) == len(want)
        assert got == pytest.approx(want, abs=1e-12)


def test_to_dict_is_jsonable():
    poly = build_polygon([(Fraction(0), Fraction(4)), (Fraction(1), Fraction(1)), (Fraction(2), Fraction(0))])
    text = json.dumps(poly.to_dict())
    assert "hull_vertices" in json.loads(text)


def test_edges_csv_layout():
    poly = build_polygon([(0, 4), (1, 1), (2, 0)])
    lines = edges_csv(poly).strip().splitlines()
    assert lines[0].startswith("nu_from")
    assert len(lines) == 3


def test_nonfinite_point_rejected():
    with pytest.raises(ValueError):
        build_polygon([(0.0, float("nan")), (1.0, 1.0)])
