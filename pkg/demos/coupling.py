"""How FV and DG fields are exchanged.

A FV field becomes a DG field with only the mean mode set, and a DG field
goes back to FV by taking cell means.  The first direction is lossless; the
second drops the higher modes.
"""

import numpy as np

from hybridch import BasisSet, FvField, build_cartesian_mesh, dg_to_fvm, fvm_to_dg, project_function

sides = {"left": "left", "right": "right", "bottom": "bottom", "top": "top"}
mesh = build_cartesian_mesh(2, [8, 4], [(0.0, 2.0), (0.0, 1.0)], sides)
basis = BasisSet(2, 2)

fv = FvField(mesh, np.random.default_rng(3).uniform(-1, 1, mesh.n_cells))
dg = fvm_to_dg(fv, basis)
print("modes per cell:", basis.n_modes)
print("higher modes after injection are zero:", not np.any(dg.coeffs[:, 1:]))
print("round trip error:", np.abs(dg_to_fvm(dg).values - fv.values).max())

smooth = project_function(mesh, basis, lambda x, y: np.sin(np.pi * x) * y)
back = fvm_to_dg(dg_to_fvm(smooth), basis)
print("cell means kept:", np.allclose(back.cell_means(), smooth.cell_means()))
print("higher-mode content lost:", np.abs(smooth.coeffs[:, 1:]).max())
