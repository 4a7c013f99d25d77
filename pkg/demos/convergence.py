"""Mesh refinement study of the steady 1D interface.

Prints the L2 error on 20, 40 and 80 cells and the fitted order.
Pass ``1`` or ``3`` as the first argument to change the element degree.
"""

import os
import sys

import numpy as np

from hybridch.harness import cases
from hybridch.harness.config import load_config

HERE = os.path.dirname(os.path.abspath(__file__))
degree = sys.argv[1] if len(sys.argv) > 1 else "2"
out = os.path.join(HERE, "output", f"convergence_p{degree}")

cfg = load_config(os.path.join(HERE, "..", "cases", "ch_convergence.cfg"),
                  {"dg.degree": degree, "output.dir": out})
report = cases.run_case(cfg)
for n, err in zip(report["resolutions"], report["l2_errors"]):
    print(f"{n:4d} cells   L2 error {err:.4e}")
print(f"fitted slope {report['slope']:.3f} (p + 1 = {int(degree) + 1})")

# the same study without time stepping isolates the approximation error
h, err, slope = cases.projection_study(lambda x: np.sin(np.pi * x), int(degree), (10, 20, 40))
print(f"projection of sin(pi x): slope {slope:.3f}")
