"""Two delta wells: predicted resonance string vs certified roots.

Two point scatterers whose strength shrinks like h^(1+beta) trap waves
between them.  The trapped part leaks, and the leak rate shows up as a
horizontal string of resonances at depth Im z ~ -gamma h log(1/h).
This script predicts the string in closed form, then hunts the same
window with the argument-principle solver and lines the two up.
"""

import math

import numpy as np

from reslab import (
    SearchOptions,
    Window,
    find_resonances,
    k_range_for_window,
    two_delta_string,
    validate_config,
)

H = 1e-4
X_LEFT, X_RIGHT = -10.0, 5.0 * math.sqrt(2.0)
BETAS = (1.0, 0.5)

cfg = validate_config(H, [(X_LEFT, 1.0, BETAS[0]), (X_RIGHT, 1.0, BETAS[1])])
ell = cfg.total_length
win = Window(1 - 3 * H, 1 + 3 * H, -3 * H, 0.0)

pred = two_delta_string(cfg, k_range_for_window(cfg, win.re_min, win.re_max))
in_window = [p for p in pred.per_k if win.contains(p.z_pred)]

print(f"h = {H}, separation l = {ell:.6f}")
print(f"string gamma = (b1+b2)/(2l) = {pred.gamma:.12f}")
print(f"leading depth  -gamma h log(1/h) = {-pred.gamma * H * math.log(1 / H):.6e}")
print(f"lattice spacing pi h / l = {math.pi * H / ell:.6e}")
print(f"{len(in_window)} predictions inside {win}")

rs = find_resonances(cfg, win, SearchOptions(threads=1))
print(f"solver found {len(rs.resonances)} roots, total winding {rs.total_winding}")
print()
print(f"{'k':>6} {'Re z (predicted)':>20} {'Re z (found)':>20} {'|dz|':>10} {'Im found':>13}")

found = list(rs.resonances)
for p in in_window:
    j = int(np.argmin([abs(r.z - p.z_refined) for r in found]))
    r = found[j]
    dz = abs(r.z - p.z_refined)
    print(f"{p.k:>6} {p.z_refined.real:>20.12f} {r.z.real:>20.12f} {dz:>10.2e} {r.z.imag:>13.6e}")

ims = np.array([r.z.imag for r in found])
print()
print(f"depth spread across the string: {ims.max() - ims.min():.3e}")
print(f"worst residual: {max(r.residual for r in found):.3e}")
