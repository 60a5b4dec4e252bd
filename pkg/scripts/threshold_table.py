"""Print the large-power threshold of each discrete preset next to its A1/A3 gap.

Above the threshold the first pass of A1 is exact, so the gap column should
be zero to solver precision for every budget at or beyond it.
"""
import numpy as np

from cfpower import algo_a1, algo_a3, threshold_pbar
from cfpower.config import build_model, preset

for name in ("example1", "example2"):
    cfg = preset(name)
    model = build_model(cfg.model, len(cfg.a))
    t = threshold_pbar(model, cfg.a)
    print(f"{name}: threshold {t:.6f}")
    for pbar in np.round(t * np.array([0.5, 0.9, 1.01, 1.5, 2.0]), 4):
        first = algo_a1(model, cfg.a, pbar).details["first_pass"].expected_rate
        best = algo_a3(model, cfg.a, pbar).expected_rate
        print(f"  pbar {pbar:8.4f}  A3 {best:.6f}  A3 - A1(first pass) {best - first:.2e}")

cfg = preset("example3")
print(f"example3: threshold {threshold_pbar(build_model(cfg.model, 2), cfg.a):.6f}")
