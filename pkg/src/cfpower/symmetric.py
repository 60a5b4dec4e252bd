"""Symmetric-policy allocation: KKT powers, multiplier bisection, A0-A3.

With every user sending the same power at a state, the per-state rate is
concave in that power on good states, so the problem restricted to a fixed
support is solved exactly by bisection on the Lagrange multiplier. The hard
part is choosing the support; the algorithms below differ only in that.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import activeset
from .errors import ArgumentError, CapacityError, SolverError
from .rates import (
    DiscreteChannelModel,
    SolveReport,
    StateQuantities,
    as_coefficients,
    classify_states,
    make_report,
    order_criterion,
    symmetric_rate_slope,
    symmetric_rate_unclamped,
)

MAX_WIDEN = 6
A3_MAX_STATES = 20
THRESHOLD_X_MAX = 1e8


@dataclass(frozen=True)
class BisectionConfig:
    lambda_lo: float = 1e-6
    lambda_hi: float = 1e6
    power_tol: float = 1e-3
    max_iter: int = 200

    def __post_init__(self):
        if not 0 < self.lambda_lo < self.lambda_hi:
            raise ArgumentError("need 0 < lambda_lo < lambda_hi")
        if self.power_tol <= 0:
            raise ArgumentError("power_tol must be positive")
        if self.max_iter < 1:
            raise ArgumentError("max_iter must be at least 1")


@dataclass(frozen=True)
class KktCoefficients:
    """Coefficients of the stationarity quadratic ``d P^2 + b P + c(lam) = 0``."""

    d: float
    b: float
    proj2: float
    a2: float

    def c(self, lam: float) -> float:
        return self.a2 - self.proj2 / lam

    @classmethod
    def of(cls, h, a):
        q = StateQuantities.of(h, as_coefficients(a))
        return cls(
            d=float(q.norm2[0] * q.eps[0]),
            b=float(q.norm2[0] * q.a2 + q.eps[0]),
            proj2=float(q.proj2[0]),
            a2=q.a2,
        )


def _p_kkt(q: StateQuantities, lam: float) -> np.ndarray:
    """Unclamped KKT power for every state in ``q`` at multiplier ``lam``."""
    b = q.norm2 * q.a2 + q.eps
    d = q.norm2 * q.eps
    c = q.a2 - q.proj2 / lam
    disc = np.maximum(b * b - 4.0 * d * c, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        # -2c / (b + sqrt(disc)) is the positive root without cancellation
        general = -2.0 * c / (b + np.sqrt(disc))
        water = 1.0 / lam - 1.0 / q.norm2
    out = np.where(q.collinear, water, general)
    return np.where(q.norm2 > 0, out, -np.inf)


def p_kkt(h, a, lam: float) -> float:
    """Stationary power of one state at multiplier ``lam``; may be negative."""
    if not lam > 0:
        raise ArgumentError(f"multiplier must be positive, got {lam}")
    h = np.asarray(h, dtype=float)
    if not np.any(h):
        raise ArgumentError("channel gain vector must be nonzero")
    return float(_p_kkt(StateQuantities.of(h, as_coefficients(a)), lam)[0])


def multiplier_for_power(h, a, power: float) -> float:
    """Inverse of :func:`p_kkt`: the multiplier at which the KKT power equals ``power``."""
    q = StateQuantities.of(h, as_coefficients(a))
    return float(q.proj2[0] / ((1.0 + power * q.norm2[0]) * (q.a2 + power * q.eps[0])))


def bisect_multiplier(q: Callable[[float], float], pbar: float, cfg: BisectionConfig):
    """Bisection on a decreasing budget map ``q`` until ``0 <= pbar - q <= tol``.

    The initial bracket is widened by a factor of 10 per side, at most
    ``MAX_WIDEN`` times, before giving up. Returns ``(lam, q(lam), iterations)``.
    """
    lo, hi = cfg.lambda_lo, cfg.lambda_hi
    for _ in range(MAX_WIDEN):
        if q(lo) > pbar:
            break
        lo *= 0.1
    if not q(lo) > pbar:
        raise SolverError(f"budget {pbar} not exceeded even at multiplier {lo:g}", bracket=(lo, hi))
    for _ in range(MAX_WIDEN):
        if q(hi) < pbar:
            break
        hi *= 10.0
    if not q(hi) < pbar:
        raise SolverError(f"budget {pbar} still exceeded at multiplier {hi:g}", bracket=(lo, hi))

    lam = 0.5 * (lo + hi)
    value = q(lam)
    it = 0
    while pbar - value > cfg.power_tol or pbar - value < 0:
        if it >= cfg.max_iter:
            raise SolverError(f"bisection did not converge in {cfg.max_iter} iterations", bracket=(lo, hi))
        if pbar - value > 0:
            hi = lam
        else:
            lo = lam
        lam = 0.5 * (lo + hi)
        value = q(lam)
        it += 1
    return lam, value, it


def solve_dp2s(model: DiscreteChannelModel, a, support, pbar: float,
               cfg: Optional[BisectionConfig] = None) -> SolveReport:
    """Optimal symmetric powers on a fixed support; zero power elsewhere."""
    cfg = cfg or BisectionConfig()
    a = as_coefficients(a)
    support = np.asarray(sorted(set(int(m) for m in support)), dtype=int)
    if support.size == 0:
        raise ArgumentError("support must be nonempty")
    if support.min() < 0 or support.max() >= model.M:
        raise ArgumentError(f"support indices must lie in [0, {model.M})")
    if not pbar > 0:
        raise ArgumentError(f"power budget must be positive, got {pbar}")

    q = StateQuantities.of(model.gains[support], a)
    f = model.probs[support]

    def budget(lam):
        return float(f @ np.maximum(_p_kkt(q, lam), 0.0))

    lam, used, it = bisect_multiplier(budget, pbar, cfg)
    policy = np.zeros(model.M)
    policy[support] = np.maximum(_p_kkt(q, lam), 0.0)
    return make_report(model, a, policy, "DP2s", multiplier=lam, iterations=it, budget_used=used)


def _zero(model, a, algorithm_id):
    return make_report(model, a, np.zeros(model.M), algorithm_id)


def _relabel(report: SolveReport, algorithm_id: str, **details) -> SolveReport:
    out = dataclasses.replace(report, algorithm_id=algorithm_id, details=dict(report.details))
    out.details.update(details)
    return out


def _bisect_increasing(fn, lo, hi, tol=1e-13, max_iter=400):
    flo, fhi = fn(lo), fn(hi)
    if flo >= 0:
        return lo
    if fhi <= 0:
        raise SolverError(f"no sign change on [{lo:g}, {hi:g}]", bracket=(lo, hi))
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if fn(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def threshold_pbar(model: DiscreteChannelModel, a) -> float:
    """Budget above which the good set is an optimal active set.

    For each good state, find the power ``x`` where the rate equals its
    tangent-line value at the origin (``R(x) = R'(x) x``), map it to a
    multiplier, take the smallest multiplier and sum the clamped KKT powers
    of the good states there.
    """
    a = as_coefficients(a)
    good, _ = classify_states(model, a)
    if not good:
        raise ArgumentError("good set is empty; no threshold exists")
    lams = []
    for m in good:
        h = model.gains[m]

        def gap(x, h=h):
            return symmetric_rate_unclamped(h, a, x) - symmetric_rate_slope(h, a, x) * x

        x = _bisect_increasing(gap, 0.0, THRESHOLD_X_MAX)
        lams.append(multiplier_for_power(h, a, x))
    lam_o = min(lams)
    q = StateQuantities.of(model.gains[list(good)], a)
    return float(model.probs[list(good)] @ np.maximum(_p_kkt(q, lam_o), 0.0))


def algo_a0(model: DiscreteChannelModel, a, pbar: float) -> SolveReport:
    """Constant power ``pbar`` on every good state."""
    if pbar < 0:
        raise ArgumentError("power budget must be non-negative")
    good, _ = classify_states(model, a)
    policy = np.zeros(model.M)
    policy[list(good)] = pbar
    return make_report(model, a, policy, "A0")


def algo_a1(model: DiscreteChannelModel, a, pbar: float,
            cfg: Optional[BisectionConfig] = None) -> SolveReport:
    """Water-filling on the good set, then once more on positive-rate survivors.

    The first-pass report is kept in ``details["first_pass"]``.
    """
    good, _ = classify_states(model, a)
    second, first = activeset.two_pass(
        model, a, good, lambda s: solve_dp2s(model, a, s, pbar, cfg), _zero(model, a, "A1")
    )
    return _relabel(second, "A1", first_pass=_relabel(first, "A1-first"))


def ordering(model: DiscreteChannelModel, a, states, method: int) -> list:
    """``states`` sorted from worst to best by the ordering criterion; ties by index."""
    return sorted(states, key=lambda m: (order_criterion(model.gains[m], a, method), m))


def algo_a2(model: DiscreteChannelModel, a, pbar: float, method: Optional[int] = None,
            cfg: Optional[BisectionConfig] = None) -> SolveReport:
    """Order-based elimination over the good set.

    With ``method=None`` both orderings run and the larger rate is kept
    (ordering 1 on ties).
    """
    if method is None:
        one = algo_a2(model, a, pbar, 1, cfg)
        two = algo_a2(model, a, pbar, 2, cfg)
        return two if two.expected_rate > one.expected_rate else one
    good, _ = classify_states(model, a)
    best = activeset.ordered_elimination(
        model, a, ordering(model, a, good, method),
        lambda s: solve_dp2s(model, a, s, pbar, cfg), _zero(model, a, "A2"),
    )
    return _relabel(best, "A2", ordering=method)


def algo_a3(model: DiscreteChannelModel, a, pbar: float, cfg: Optional[BisectionConfig] = None,
            restrict_to_good: bool = True) -> SolveReport:
    """Exhaustive search over supports (subsets of the good set by default)."""
    if model.M > A3_MAX_STATES:
        raise CapacityError(
            f"exhaustive search needs M <= {A3_MAX_STATES}, model has M={model.M}; use A2 instead"
        )
    good, _ = classify_states(model, a)
    candidates = good if restrict_to_good else range(model.M)
    best = activeset.exhaustive(
        candidates, lambda s: solve_dp2s(model, a, s, pbar, cfg), _zero(model, a, "A3")
    )
    return _relabel(best, "A3")
