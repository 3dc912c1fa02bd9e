"""Mode spectrum of the 10 x 10 guide.

Walks the cutoff ladder for a few wavenumbers, prints the propagating
counts, and plots the cutoff spectrum with the wavenumber thresholds.
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

import wgimage as wg

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

spec = wg.WaveguideSpec(10.0, 10.0)

print("Propagating mode counts (TE family M, TM family N):")
for k in (1.0, 3.0, 5.0):
    basis = wg.enumerate_modes(spec, k)
    print(f"  k={k}:  M={basis.M:4d}  N={basis.N:4d}  total={basis.M + basis.N}")

basis = wg.enumerate_modes(spec, 3.0)
print("\nLowest ten TE modes at k=3:")
print(f"{'pair':>8} {'cutoff':>10} {'axial':>10}")
for m in basis.te_modes[:10]:
    print(f"{str(m.pair):>8} {m.cutoff:10.6f} {m.axial.real:10.6f}")

fig, ax = plt.subplots(figsize=(7, 4))
wide = wg.enumerate_modes(spec, 5.2)
te_cuts = [m.cutoff for m in wide.te_modes]
tm_cuts = [m.cutoff for m in wide.tm_modes]
ax.plot(te_cuts, np.arange(len(te_cuts)), drawstyle="steps-post", label="TE family")
ax.plot(tm_cuts, np.arange(len(tm_cuts)), drawstyle="steps-post", label="TM family")
for k in (1.0, 3.0, 5.0):
    ax.axvline(k, color="gray", ls="--", lw=0.8)
    ax.text(k, 5, f" k={k}", rotation=90, va="bottom", fontsize=8)
ax.set_xlabel("cutoff")
ax.set_ylabel("modes below cutoff")
ax.legend()
fig.tight_layout()
fig.savefig(OUT / "mode_spectrum.png", dpi=150)
print(f"\nwrote {OUT / 'mode_spectrum.png'}")
