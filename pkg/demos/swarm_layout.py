"""One swarm run on the 20x20 grid with 100 elements ON.

Prints the convergence trace and an ASCII map of the chosen block. With
matplotlib installed (``pip install .[demos]``) it also saves layout.png.
"""
import sys

import numpy as np

from fris_ambc.config import ScenarioConfig
from fris_ambc.pso import PsoConfig, optimize

encoding = sys.argv[1] if len(sys.argv) > 1 else "mask"
scn = ScenarioConfig(gain_scale=3.4e3)   # roughly the calibrated multiplier
res = optimize(scn, PsoConfig(encoding=encoding), seed=1)

print("gbest trace:", " ".join(f"{v:.2f}" for v in res.trace[::5]))
print("final rate: %.3f bps/Hz" % res.best_fitness)

on = res.mask.as_bool().reshape(scn.grid_dims[1], scn.grid_dims[0])
for row in on[::-1]:
    print("".join("#" if v else "." for v in row))

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    sys.exit(0)

pos = res.layout.positions / scn.wavelength
sel = res.mask.as_bool()
fig, ax = plt.subplots(figsize=(4, 4))
ax.scatter(pos[~sel, 0], pos[~sel, 1], s=6, c="lightgray", label="OFF")
ax.scatter(pos[sel, 0], pos[sel, 1], s=10, c="tab:blue", label="ON")
ax.set_xlabel("x / wavelength")
ax.set_ylabel("z / wavelength")
ax.set_aspect("equal")
ax.legend(loc="upper right", fontsize=7)
fig.tight_layout()
fig.savefig("layout.png", dpi=150)
print("wrote layout.png")
