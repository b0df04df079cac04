"""Reading decay rates off a Newton polygon, five wells at a time.

The cleared determinant is a sum of blocks h^nu * w^lambda.  Plotting
one point (nu, lambda) per block and taking the lower-left convex hull
turns the question "which blocks can balance as h -> 0" into geometry:
each hull edge of slope -1/(2 gamma) is a candidate decay rate gamma.
This script walks the whole pipeline for a five-well configuration and
prints what each stage produces.
"""

import math

from reslab import (
    build_polygon,
    edges_csv,
    expand_terms,
    exponent_points,
    gamma_candidates,
    validate_config,
)

H = 1e-4
WELLS = [
    (-5.0, 1.0, 1.0),
    (-math.sqrt(2.0), 1.0, 0.6),
    (0.0, 1.0, 0.1),
    (2.0 * math.sqrt(2.0), 1.0, 0.6),
    (7.0, 1.0, 1.0),
]

cfg = validate_config(H, WELLS)
exp = expand_terms(cfg)

n_monomials = sum(len(block) for block in exp.terms.values())
print(f"{exp.n_poles} wells -> {len(exp.terms)} exponent blocks, {n_monomials} integer monomials")

pts = exponent_points(exp, cfg)
print("\nexponent points (nu = h-power, lambda = w-power):")
for p in pts:
    print(f"  alpha={p.alpha:0{exp.n_poles - 1}b}  nu={float(p.nu):.4f}  lambda={float(p.lam):.4f}")

poly = build_polygon(pts)
print(f"\nlower-left hull: {len(poly.hull_vertices)} vertices, {len(poly.edges)} edges")
print(edges_csv(poly))

print("candidate decay rates:")
for c in gamma_candidates(poly):
    print(f"  gamma = {c.gamma:.9f}  ({c.provenance})")

print("note: the hull gives every rate the exponents allow; a configuration")
print("does not have to populate all of them.")
