"""Asymmetric (per-user) power allocation.

The per-support subproblem is smooth but non-convex in the per-user powers,
so it is attacked with multi-start projected gradient ascent. Each user's
budget set ``{P >= 0, sum_m f_m P_m <= pbar}`` is a scaled simplex and is
projected onto exactly.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import activeset
from .errors import ArgumentError, CapacityError, SolverError
from .rates import DiscreteChannelModel, SolveReport, as_coefficients, cross_norm2, make_report
from .symmetric import BisectionConfig, ordering, solve_dp2s

A3_ASYM_MAX_STATES = 12
GRAD_FLOOR = 1e-12
ARMIJO_C = 1e-4
MIN_STEP = 1e-20
MAX_STEP = 1e6


@dataclass(frozen=True)
class NlpConfig:
    starts: int = 8
    step_init: float = 0.1
    grad_tol: float = 1e-7
    max_iter: int = 5000
    seed: int = 0

    def __post_init__(self):
        if self.starts < 1:
            raise ArgumentError("starts must be at least 1")
        if self.step_init <= 0 or self.grad_tol <= 0:
            raise ArgumentError("step_init and grad_tol must be positive")
        if self.max_iter < 1:
            raise ArgumentError("max_iter must be at least 1")


def project_budget(y, weights, budget):
    """Euclidean projection of ``y`` onto ``{x >= 0, weights . x <= budget}``.

    Exact, via sorting the breakpoints ``y_i / w_i``.
    """
    y = np.asarray(y, dtype=float)
    w = np.asarray(weights, dtype=float)
    x = np.maximum(y, 0.0)
    if w @ x <= budget:
        return x
    ratio = y / w
    order = np.argsort(-ratio, kind="stable")
    wy = np.cumsum(w[order] * y[order])
    ww = np.cumsum(w[order] ** 2)
    tau = (wy - budget) / ww
    # the active coordinates form a prefix of the sorted order
    k = np.flatnonzero(ratio[order] > tau)[-1]
    return np.maximum(y - tau[k] * w, 0.0)


def _objective(gains, probs, a, P, floor=0.0, with_grad=True):
    """Smooth objective and gradient on the columns of ``P`` (L x k).

    ``floor`` > 0 evaluates the gradient at ``max(P, floor)``, which turns the
    infinite one-sided slopes at zero power into large finite ones.
    """
    h = gains.T
    a2 = a @ a
    amp = np.sqrt(P)
    x = amp * h
    s = np.sum(x * x, axis=0)
    t = a @ x
    num = 1.0 + s
    den = a2 + cross_norm2(x.T, a)
    value = float(probs @ (0.5 * np.log2(num / den)))
    if not with_grad:
        return value, None
    ha = h * a[:, None]
    t_rest = t[None, :] - amp * ha
    if floor > 0:
        root = np.sqrt(np.maximum(P, floor))
        dt2 = ha * ha + t_rest * ha / root
    else:
        cross = t_rest * ha
        with np.errstate(divide="ignore", invalid="ignore"):
            dt2 = np.where(amp > 0, ha * ha + cross / amp, np.where(cross == 0, ha * ha, np.sign(cross) * np.inf))
    h2 = h * h
    grad = (h2 / num - (a2 * h2 - dt2) / den) / (2.0 * np.log(2.0)) * probs
    return value, grad


def dp2_objective_grad(model: DiscreteChannelModel, a, support, P):
    """Unclamped objective over ``support`` and its gradient in every ``P[l, m]``.

    The gradient is an (L, M) array, zero outside ``support``. At zero power
    the one-sided derivative is returned, which is ``+inf`` where another
    user already transmits in the same state with a useful alignment.
    """
    a = as_coefficients(a)
    P = np.asarray(P, dtype=float)
    if P.shape != (model.L, model.M):
        raise ArgumentError(f"policy must have shape ({model.L}, {model.M})")
    if np.any(P < 0):
        raise ArgumentError("powers must be non-negative")
    support = sorted(set(support))
    value, g = _objective(model.gains[support], model.probs[support], a, P[:, support])
    grad = np.zeros_like(P)
    grad[:, support] = g
    return value, grad


def _project_rows(Y, weights, budget):
    """Row-wise :func:`project_budget`, vectorised over users."""
    X = np.maximum(Y, 0.0)
    inside = X @ weights <= budget
    if inside.all():
        return X
    rows = np.arange(Y.shape[0])[:, None]
    ratio = Y / weights
    order = np.argsort(-ratio, axis=1, kind="stable")
    ws = weights[order]
    tau = (np.cumsum(ws * Y[rows, order], axis=1) - budget) / np.cumsum(ws * ws, axis=1)
    valid = ratio[rows, order] > tau
    k = valid.shape[1] - 1 - np.argmax(valid[:, ::-1], axis=1)
    shift = tau[rows[:, 0], k]
    out = np.maximum(Y - shift[:, None] * weights, 0.0)
    out[inside] = X[inside]
    return out


def _ascend(gains, probs, a, budget, P, cfg: NlpConfig):
    """Projected gradient ascent from ``P``.

    Trial steps follow the Barzilai-Borwein rule and are backtracked until
    the Armijo condition holds, so the objective never decreases.
    """
    value, grad = _objective(gains, probs, a, P, floor=GRAD_FLOOR)
    step = cfg.step_init
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        residual = np.max(np.abs(_project_rows(P + grad, probs, budget) - P))
        if residual <= cfg.grad_tol * max(1.0, P.max()):
            converged = True
            break
        while True:
            trial = _project_rows(P + step * grad, probs, budget)
            d = trial - P
            new_value, _ = _objective(gains, probs, a, trial, with_grad=False)
            if new_value >= value + ARMIJO_C * np.sum(grad * d):
                break
            step *= 0.5
            if step < MIN_STEP:
                break
        if step < MIN_STEP or not d.any():
            # no representable ascent step left
            converged = True
            break
        P = trial
        value, new_grad = _objective(gains, probs, a, P, floor=GRAD_FLOOR)
        curvature = -np.sum(d * (new_grad - grad))
        step = min(np.sum(d * d) / curvature, MAX_STEP) if curvature > 0 else min(2.0 * step, MAX_STEP)
        grad = new_grad
    return P, value, it, converged


def _symmetric_start(model, a, support, pbar):
    try:
        sym = solve_dp2s(model, a, support, pbar, BisectionConfig()).policy[support]
    except SolverError:
        sym = np.full(len(support), pbar / model.probs[support].sum())
    return np.tile(sym, (model.L, 1))


def solve_dp2(model: DiscreteChannelModel, a, support, pbar: float,
              cfg: Optional[NlpConfig] = None) -> SolveReport:
    """Best local optimum of the per-user problem on ``support`` over several starts.

    Start 0 is the optimal symmetric policy on the support; the others draw
    each user's budget split from a flat Dirichlet, seeded by ``cfg.seed``.
    Starts are ranked by the smooth objective, ties to the earlier start.
    """
    cfg = cfg or NlpConfig()
    a = as_coefficients(a)
    support = sorted(set(int(m) for m in support))
    if not support:
        raise ArgumentError("support must be nonempty")
    if support[0] < 0 or support[-1] >= model.M:
        raise ArgumentError(f"support indices must lie in [0, {model.M})")
    if not pbar > 0:
        raise ArgumentError(f"power budget must be positive, got {pbar}")

    gains = model.gains[support]
    probs = model.probs[support]
    rng = np.random.default_rng(cfg.seed)
    starts = [_symmetric_start(model, a, support, pbar)]
    for _ in range(cfg.starts - 1):
        starts.append(rng.dirichlet(np.ones(len(support)), size=model.L) * pbar / probs)

    best = None
    n_converged = 0
    total_iter = 0
    for k, P0 in enumerate(starts):
        P, value, it, ok = _ascend(gains, probs, a, pbar, P0, cfg)
        n_converged += ok
        total_iter += it
        if best is None or value > best[1]:
            best = (P, value, k)

    policy = np.zeros((model.L, model.M))
    policy[:, support] = best[0]
    report = make_report(
        model, a, policy, "DP2", iterations=total_iter,
        objective=best[1], best_start=best[2], converged_starts=n_converged,
    )
    if n_converged == 0:
        raise SolverError(f"no start converged within {cfg.max_iter} iterations", best=report)
    return report


def _zero(model, a, algorithm_id):
    return make_report(model, a, np.zeros((model.L, model.M)), algorithm_id)


def _relabel(report, algorithm_id, **details):
    out = dataclasses.replace(report, algorithm_id=algorithm_id, details=dict(report.details))
    out.details.update(details)
    return out


def algo_a0_asym(model: DiscreteChannelModel, a, pbar: float) -> SolveReport:
    """Every user sends ``pbar`` in every state."""
    if pbar < 0:
        raise ArgumentError("power budget must be non-negative")
    return make_report(model, a, np.full((model.L, model.M), float(pbar)), "A0")


def algo_a1_asym(model: DiscreteChannelModel, a, pbar: float,
                 cfg: Optional[NlpConfig] = None) -> SolveReport:
    """Two-pass allocation starting from all states (bad states can carry rate here)."""
    second, first = activeset.two_pass(
        model, a, range(model.M), lambda s: solve_dp2(model, a, s, pbar, cfg), _zero(model, a, "A1")
    )
    return _relabel(second, "A1", first_pass=_relabel(first, "A1-first"))


def algo_a2_asym(model: DiscreteChannelModel, a, pbar: float, method: Optional[int] = None,
                 cfg: Optional[NlpConfig] = None) -> SolveReport:
    if method is None:
        one = algo_a2_asym(model, a, pbar, 1, cfg)
        two = algo_a2_asym(model, a, pbar, 2, cfg)
        return two if two.expected_rate > one.expected_rate else one
    best = activeset.ordered_elimination(
        model, a, ordering(model, a, range(model.M), method),
        lambda s: solve_dp2(model, a, s, pbar, cfg), _zero(model, a, "A2"),
    )
    return _relabel(best, "A2", ordering=method)


def algo_a3_asym(model: DiscreteChannelModel, a, pbar: float,
                 cfg: Optional[NlpConfig] = None) -> SolveReport:
    """Exhaustive support search; each support is only solved to a local optimum."""
    if model.M > A3_ASYM_MAX_STATES:
        raise CapacityError(
            f"asymmetric exhaustive search needs M <= {A3_ASYM_MAX_STATES}, "
            f"model has M={model.M}; use A2 instead"
        )
    best = activeset.exhaustive(
        range(model.M), lambda s: solve_dp2(model, a, s, pbar, cfg), _zero(model, a, "A3")
    )
    return _relabel(best, "A3", certified=False, note="best local optimum found")
