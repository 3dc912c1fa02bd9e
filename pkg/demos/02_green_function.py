"""Structural identities of the terminating-guide Green function.

Checks reciprocity, the image representation against the full guide, and
the vanishing tangential trace on the terminating plate, then plots how
the trace decays while approaching the plate.
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

import wgimage as wg
from wgimage.green import GreenEvaluator

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

spec = wg.WaveguideSpec(10.0, 10.0)
basis = wg.enumerate_modes(spec, 3.0, wg.EvanescentPolicy.for_gap(1.0))
ev = GreenEvaluator(basis)
rng = np.random.default_rng(0)

print("Reciprocity G(x,y) = G(y,x)^T over 50 random pairs:")
worst = 0.0
for _ in range(50):
    x = np.array([rng.uniform(1, 9), rng.uniform(1, 9), rng.uniform(-4.5, -1.5)])
    y = np.array([rng.uniform(1, 9), rng.uniform(1, 9), rng.uniform(-9, -6)])
    g1, g2 = ev.half(x, y), ev.half(y, x)
    worst = max(worst, np.abs(g1 - g2.T).max() / np.abs(g1).max())
print(f"  worst relative deviation: {worst:.2e}")

print("\nImage representation: half-guide kernel from the full guide plus a")
print("mirror source with flipped axial polarization:")
flip = np.diag([1.0, 1.0, -1.0])
x = np.array([3.3, 4.2, -2.0])
y = np.array([6.1, 2.7, -7.0])
lhs = ev.half(x, y)
rhs = ev.full(x, y) - flip @ ev.full(wg.mirror_point(x), y)
print(f"  deviation: {np.abs(lhs - rhs).max() / np.abs(lhs).max():.2e}")

print("\nTangential trace on the terminating plate (x3 = 0):")
plate = ev.half(np.array([4.0, 5.5, 0.0]), y)
print(f"  max tangential entry: {np.abs(plate[:2, :]).max():.2e}")
print(f"  normal-row magnitude: {np.abs(plate[2, :]).max():.2e}")

offsets = np.logspace(-6, -0.5, 40)
trace = []
for eps in offsets:
    g = ev.half(np.array([4.0, 5.5, -eps]), y)
    trace.append(np.abs(g[:2, :]).max() / np.abs(g).max())
fig, ax = plt.subplots(figsize=(6, 4))
ax.loglog(offsets, trace, marker=".", lw=0.8)
ax.loglog(offsets, trace[0] / offsets[0] * offsets, ls="--", color="gray", label="linear in |x3|")
ax.set_xlabel("distance from the plate")
ax.set_ylabel("relative tangential trace")
ax.legend()
fig.tight_layout()
fig.savefig(OUT / "plate_trace_decay.png", dpi=150)
print(f"\nwrote {OUT / 'plate_trace_decay.png'}")
