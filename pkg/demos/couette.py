"""Start plane Couette flow from rest and let it settle to the linear profile."""

import os

import numpy as np

from hybridch.harness import cases, io
from hybridch.harness.config import load_config

HERE = os.path.dirname(os.path.abspath(__file__))
out = os.path.join(HERE, "output", "couette")

cfg = load_config(os.path.join(HERE, "..", "cases", "couette.cfg"), {"output.dir": out})
report = cases.run_case(cfg)
print(f"steady after {report['steps']} steps")
print(f"max deviation from u = y: {report['max_deviation']:.2e}")
print(f"largest divergence seen: {report['max_divergence']:.1e}")

header, data = io.read_vtk(os.path.join(out, "U_final.vtk"))
nx, ny = header["dimensions"][0] - 1, header["dimensions"][1] - 1
ux = data["U"][:, 0].reshape(ny, nx).mean(axis=1)
for j in range(0, ny, 3):
    print(f"  row {j:2d}  u = {ux[j]:.6f}")
