"""Dressed-state structure: three coupled oscillators, one nearly dark.

python3 demos/02_eigenvalue_structure.py
"""

import os

import numpy as np

from toroidsim import model

HERE = os.path.dirname(os.path.abspath(__file__))
KI, KEX, H, GAM = 8.379, 9.621, 5.0, 2.6
G0 = 50.0

# ==== splitting versus azimuthal position ====================================
# The atom sits somewhere along the rim; the phase kx decides how the two
# standing waves share the coupling.  The outer splitting barely moves.
print("phase kx   outer splitting   middle branch")
for frac in (0.0, 0.125, 0.25, 0.375, 0.5):
    g = (G0 / np.sqrt(2.0)) * np.exp(1j * np.pi * frac)
    p = model.SystemParams(g_tw=g, kappa_i=KI, kappa_ex=KEX, h=H, gamma=GAM)
    f = np.sort(model.eigenvalues(p).values.real)
    print(f"{frac:4.3f} pi    {f[2] - f[0]:7.2f} MHz      {f[1]:+7.2f} MHz")

# ==== branches versus atom-cavity detuning ===================================
grid = np.linspace(-120.0, 120.0, 241)
branches = np.empty((3, len(grid)))
decays = np.empty((3, len(grid)))
g = G0 / np.sqrt(2.0)
for i, dac in enumerate(grid):
    p = model.SystemParams(g_tw=g, kappa_i=KI, kappa_ex=KEX, h=H, gamma=GAM,
                           delta=0.0, delta_A=-dac)
    ev = model.eigenvalues(p)
    branches[:, i] = ev.values.real
    decays[:, i] = ev.values.imag

print(f"\navoided crossing: closest approach "
      f"{np.min(branches[2] - branches[1]):.2f} MHz between upper branches")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    print("matplotlib not installed, skipping the figure")
else:
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    for j in range(3):
        ax1.plot(grid, branches[j], color="C0")
        ax2.plot(grid, decays[j], color="C3")
    ax1.plot(grid, -grid, ":", color="gray", lw=1, label="bare atom")
    ax1.set_ylabel("frequency (MHz)")
    ax1.legend()
    ax2.set_ylabel("decay rate (MHz)")
    ax2.set_xlabel("atom-cavity detuning (MHz)")
    fig.tight_layout()
    out = os.path.join(HERE, "eigenvalue_structure.png")
    fig.savefig(out, dpi=150)
    print("wrote", out)
