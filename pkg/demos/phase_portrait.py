"""Phase portrait of the cleared determinant around a resonance string.

Domain coloring in grayscale: each pixel is arg(det) mapped to a byte,
so every zero shows up as a point where all shades meet.  The string
sits just below the real axis; at this zoom you can count the roots by
eye.  Output is a plain PGM, viewable with most image tools.

Usage: python3 demos/phase_portrait.py [out.pgm]
"""

import math
import sys

import numpy as np

from reslab import evaluate_dets, validate_config

H = 1e-4
W, HPX = 480, 160

cfg = validate_config(H, [(-10.0, 1.0, 1.0), (5.0 * math.sqrt(2.0), 1.0, 0.5)])
re_min, re_max = 1 - 3 * H, 1 + 3 * H
im_min, im_max = -3 * H, 0.0

js = (np.arange(W) + 0.5) / W
is_ = (np.arange(HPX) + 0.5) / HPX
re = re_min + js * (re_max - re_min)
im = im_max - is_ * (im_max - im_min)
zz = (re[None, :] + 1j * im[:, None]).ravel()

batch = evaluate_dets(cfg, zz)
arg = batch.arg.reshape(HPX, W)
bytes_ = np.clip(np.floor((arg + math.pi) / (2 * math.pi) * 256), 0, 255).astype(np.uint8)

out = sys.argv[1] if len(sys.argv) > 1 else "two_delta_phase.pgm"
with open(out, "wb") as f:
    f.write(f"P5\n{W} {HPX}\n255\n".encode("ascii"))
    f.write(bytes_.tobytes())

spacing = math.pi * H / cfg.total_length
print(f"wrote {out} ({W}x{HPX})")
print(f"window [{re_min}, {re_max}] x [{im_min}, {im_max}]")
print(f"string spacing pi h / l = {spacing:.3e}, so expect ~{(re_max - re_min) / spacing:.0f} zeros across")
