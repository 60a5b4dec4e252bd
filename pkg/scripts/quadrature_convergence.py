"""Rate of each continuous algorithm as the quadrature grid is refined.

Compares the midpoint rule (default) with the trapezoid rule. For a = (1, 1)
the axes bound the good region, which costs the trapezoid rule its second
order and can flip the shaping loop's improvement test between grids.
"""
from cfpower import ContinuousChannelModel, algo_a0_continuous, algo_a1_continuous, algo_iterative_continuous

A = (1, 1)
ALGOS = (("A0", algo_a0_continuous), ("A1", algo_a1_continuous), ("A2", algo_iterative_continuous))

for rule in ("midpoint", "trapezoid"):
    print(f"rule {rule}")
    for pbar in (0.5, 1.0, 2.0, 4.0):
        cells = []
        for nodes in (64, 128, 256):
            model = ContinuousChannelModel.gaussian(nodes=nodes, rule=rule)
            cells.append(" ".join(f"{alg(model, A, pbar).expected_rate:.6f}" for _, alg in ALGOS))
        print(f"  pbar {pbar:3.1f}  " + "  |  ".join(cells))
