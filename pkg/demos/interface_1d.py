"""Relax a sharp 1D interface and compare it with the tanh profile.

Starts from sgn(x) on 20 cells with quadratic elements, steps the
Cahn-Hilliard system until it stops changing and prints the error.
"""

import os
import sys

import numpy as np

from hybridch.harness import cases, io
from hybridch.harness.config import load_config

HERE = os.path.dirname(os.path.abspath(__file__))
out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(HERE, "output", "interface_1d")

cfg = load_config(os.path.join(HERE, "..", "cases", "ch1d_profile.cfg"), {"output.dir": out})
report = cases.run_case(cfg)
print(f"steady after {report['steps']} steps, L2 error {report['l2_error']:.3e}")

prof = io.read_csv_profile(os.path.join(out, "profile_20.csv"))
for x, c, ref in list(zip(prof["x"], prof["c_numeric"], prof["c_analytic"]))[::20]:
    print(f"  x = {x:+.3f}   c = {c:+.5f}   tanh = {ref:+.5f}")
print(f"largest deviation {np.max(np.abs(prof['c_numeric'] - prof['c_analytic'])):.2e}")
