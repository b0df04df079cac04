from __future__ import annotations

import cmath
import math

import numpy as np
import pytest

from reslab.asymptotics import (
    K_BAND,
    k_range_for_window,
    reflect_config,
    three_delta_equal_strings,
    three_delta_gammas,
    two_delta_string,
)
from reslab.errors import NotEqualSpacing, NotTwoDeltas
from reslab.potential import scattering_coefficients, validate_config
from reslab.rootfind import Window
from reslab.secular import ClearedSumEvaluator

from conftest import ROOT2, default_window, three_delta_config, two_delta_config

TWO_DELTA_GAMMA = 1.5 / (2 * (10 + 5 * ROOT2))


def _window_preds(config, window, prediction):
    return [p for p in prediction.per_k if window.contains(p.z_pred)]


def test_two_delta_gamma_closed_form():
    cfg = two_delta_config(1e-6)
    pred = two_delta_string(cfg, range(5433890, 5433895))
    assert pred.gamma == pytest.approx(TWO_DELTA_GAMMA, abs=1e-15)


def test_two_delta_fixed_point_solves_resonance_equation():
    # each prediction must satisfy R1 R2 exp(2 i z l / h) = 1; at h=1e-3 the
    # phase evaluation itself is good to ~1e-11
    h = 1e-3
    cfg = two_delta_config(h)
    win = default_window(cfg)
    pred = two_delta_string(cfg, k_range_for_window(cfg, win.re_min, win.re_max))
    ell = cfg.total_length
    for p in pred.per_k:
        sc = scattering_coefficients(cfg, p.z_pred)
        res = abs(sc.R[0] * sc.R[1] * cmath.exp(2j * p.z_pred * ell / h) - 1.0)
        assert res < 1e-10


def test_two_delta_re_increasing_in_k():
    cfg = two_delta_config(1e-4)
    win = default_window(cfg)
    pred = two_delta_string(cfg, k_range_for_window(cfg, win.re_min, win.re_max))
    res = [p.z_pred.real for p in pred.per_k]
    assert all(a < b for a, b in zip(res, res[1:]))
    ks = [p.k for p in pred.per_k]
    assert ks == sorted(ks)


def test_refined_lattice_sits_half_spacing_below_base():
    # C1 C2 > 0 shifts the string half a spacing below the pi h k / l lattice
    cfg = two_delta_config(1e-6)
    win = default_window(cfg)
    pred = two_delta_string(cfg, k_range_for_window(cfg, win.re_min, win.re_max))
    spacing = math.pi * cfg.h / cfg.total_length
    for p in pred.per_k:
        assert (p.z_refined.real / spacing) % 1.0 == pytest.approx(0.5, abs=1e-6)


def test_fixed_point_offsets_track_coupling_sign():
    h = 1e-6
    spacing_of = lambda cfg: math.pi * h / cfg.total_length
    offs = {}
    for c2 in (1.0, -1.0):
        cfg = two_delta_config(h, c2=c2)
        win = default_window(cfg)
        pred = two_delta_string(cfg, k_range_for_window(cfg, win.re_min, win.re_max))
        vals = [(p.z_pred.real / spacing_of(cfg)) % 1.0 for p in _window_preds(cfg, win, pred)]
        offs[c2] = np.mean(vals)
    assert offs[1.0] == pytest.approx(0.5, abs=2e-3)
    # same-sign-free lattice: offset wraps to ~0 (equivalently ~1)
    assert min(offs[-1.0], 1.0 - offs[-1.0]) == pytest.approx(0.0, abs=2e-3)


def test_k_range_covers_window():
    cfg = two_delta_config(1e-4)
    win = default_window(cfg)
    spacing = math.pi * cfg.h / cfg.total_length
    ks = k_range_for_window(cfg, win.re_min, win.re_max)
    # every base lattice point inside the window has its index in the range
    k_lo = math.ceil(win.re_min / spacing)
    k_hi = math.floor(win.re_max / spacing)
    assert ks.start <= k_lo and k_hi < ks.stop
    # and the range overshoots by at most a couple of indices
    assert k_lo - ks.start <= 2
    assert ks.stop - 1 - k_hi <= 2


def test_k_range_clipped_to_band():
    cfg = two_delta_config(1e-3)
    lo, hi = K_BAND
    spacing = math.pi * cfg.h / cfg.total_length
    ks = k_range_for_window(cfg, 5.0, 6.0)  # entirely above the band
    assert all(lo <= k * spacing <= hi for k in ks)


def test_two_delta_rejects_other_sizes():
    cfg = three_delta_config(1e-3, (0.5, 0.5, 0.5))
    with pytest.raises(NotTwoDeltas) as exc:
        two_delta_string(cfg, range(10, 12))
    assert exc.value.n == 3


def test_equal_strings_require_equal_gaps():
    cfg = three_delta_config(1e-3, (0.5, 0.5, 0.5))  # gaps 5 and 3*sqrt(2)
    with pytest.raises(NotEqualSpacing):
        three_delta_equal_strings(cfg, range(10, 12))


def test_equal_strings_predictions_annihilate_cleared_determinant():
    h = 1e-3
    cfg = validate_config(h, [(0.0, 1.0, 0.2), (2.5, 1.0, 0.15), (5.0, 1.0, 0.7)])
    win = default_window(cfg)
    minus, plus = three_delta_equal_strings(cfg, k_range_for_window(cfg, win.re_min, win.re_max))
    ev = ClearedSumEvaluator(cfg, win.center)
    checked = 0
    for p in list(minus.per_k) + list(plus.per_k):
        if not win.contains(p.z_pred):
            continue
        val, scale = ev(complex(p.z_pred - win.center) / h)
        assert abs(val) / scale < 1e-11
        checked += 1
    # the default window admits 9-10 predictions depending on edge rounding
    assert checked >= 8


def test_equal_strings_both_regimes_give_two_gammas():
    h = 1e-6
    distinct = validate_config(h, [(0.0, 1.0, 0.1), (3.0, 1.0, 0.1), (6.0, 1.0, 0.5)])
    ks = k_range_for_window(distinct, 1 - 5 * h, 1 + 5 * h)
    minus, plus = three_delta_equal_strings(distinct, ks)
    assert plus.gamma != pytest.approx(minus.gamma, abs=1e-3)
    equal = validate_config(h, [(0.0, 1.0, 0.3), (3.0, 1.0, 0.2), (6.0, 1.0, 0.5)])
    minus, plus = three_delta_equal_strings(equal, ks)
    assert plus.gamma == pytest.approx(minus.gamma, abs=1e-2)


def test_three_delta_gammas_reference_cases():
    got = three_delta_gammas(three_delta_config(1e-6, (0.9, 0.1, 1.0)))
    assert got.case_id == 2
    assert got.gamma_plus == pytest.approx(0.9 / (6 * ROOT2), abs=1e-15)
    assert got.gamma_minus == pytest.approx(0.1, abs=1e-15)

    flat = three_delta_gammas(three_delta_config(1e-6, (1.0, 1.0, 1.0)))
    assert flat.case_id == 1
    assert flat.gamma_plus == flat.gamma_minus == pytest.approx(1.0 / (5 + 3 * ROOT2), abs=1e-15)


def test_three_delta_case_three_mirrors_case_two():
    cfg = three_delta_config(1e-6, (0.9, 0.1, 1.0))
    mirrored = three_delta_gammas(reflect_config(cfg))
    assert mirrored.case_id == 3
    assert sorted(mirrored.as_set()) == pytest.approx(sorted(three_delta_gammas(cfg).as_set()), abs=1e-15)


def test_three_delta_boundary_counts_as_case_one():
    # beta_1 l_2 equals beta_2 (l_1 + l_2) + beta_3 l_1 exactly
    cfg = validate_config(1e-3, [(0.0, 1.0, 1.4), (1.0, 1.0, 0.4), (2.0, 1.0, 0.6)])
    got = three_delta_gammas(cfg)
    assert got.case_id == 1
    assert got.gamma_plus == pytest.approx(0.5)


def test_reflect_config_is_involution():
    cfg = validate_config(1e-3, [(-3.0, 1.0, 0.4), (0.5, -2.0, 0.7), (4.0, 0.3, 1.1)])
    rcfg = reflect_config(cfg)
    np.testing.assert_allclose(rcfg.positions(), [-4.0, -0.5, 3.0])
    np.testing.assert_array_equal(rcfg.betas(), cfg.betas()[::-1])
    assert reflect_config(rcfg) == cfg
