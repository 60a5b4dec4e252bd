"""Symmetric power allocation for continuously distributed channel gains.

Expectations over the channel density are computed with a tensor-product
quadrature rule on a truncated box. A policy is represented by its water
level ``mu`` together with the support domain it is applied on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ArgumentError, SolverError
from .rates import StateQuantities, as_coefficients
from .symmetric import BisectionConfig, _p_kkt, bisect_multiplier

MIN_NODES = 16
RULES = ("midpoint", "trapezoid")


class ContinuousChannelModel:
    """Channel density on a box, discretised for a tensor-product quadrature rule.

    The default midpoint rule keeps nodes off the box faces. Those faces are
    often where the good domain ends (the axes, for ``a = (1, 1)``), and a
    trapezoid node sitting on such a face sees an indicator jump, which
    degrades the rule to first order.

    Parameters
    ----------
    pdf : callable
        Maps an (N, L) array of gain vectors to (N,) density values.
    support_box : sequence of (lo, hi)
        Truncation bounds per user.
    nodes : int
        Quadrature nodes per dimension.
    rule : {"midpoint", "trapezoid"}
    total_mass : float
        Known mass of ``pdf`` over its whole support; the box must retain at
        least ``min_mass_fraction`` of it.
    """

    def __init__(self, pdf: Callable, support_box: Sequence, nodes: int = 128,
                 total_mass: float = 1.0, min_mass_fraction: float = 0.999, name: str = "custom",
                 rule: str = "midpoint"):
        if rule not in RULES:
            raise ArgumentError(f"rule must be one of {RULES}, got {rule!r}")
        if nodes < MIN_NODES:
            raise ArgumentError(f"need at least {MIN_NODES} nodes per dimension, got {nodes}")
        box = [(float(lo), float(hi)) for lo, hi in support_box]
        if len(box) < 2 or any(not hi > lo for lo, hi in box):
            raise ArgumentError("support_box needs >= 2 dimensions with lo < hi")
        if any(lo < 0 for lo, _ in box):
            raise ArgumentError("channel gains are non-negative; box must lie in the orthant")
        self.pdf = pdf
        self.support_box = tuple(box)
        self.nodes = int(nodes)
        self.name = name
        self.rule = rule

        axes, axis_weights = [], []
        for lo, hi in box:
            if rule == "trapezoid":
                x = np.linspace(lo, hi, nodes)
                w = np.full(nodes, (hi - lo) / (nodes - 1))
                w[0] *= 0.5
                w[-1] *= 0.5
            else:
                w = np.full(nodes, (hi - lo) / nodes)
                x = lo + (np.arange(nodes) + 0.5) * w
            axes.append(x)
            axis_weights.append(w)
        mesh = np.meshgrid(*axes, indexing="ij")
        self.points = np.stack([m.ravel() for m in mesh], axis=1)
        weights = axis_weights[0]
        for w in axis_weights[1:]:
            weights = np.multiply.outer(weights, w)
        density = np.asarray(pdf(self.points), dtype=float)
        if density.shape != (self.points.shape[0],) or np.any(density < 0):
            raise ArgumentError("pdf must return one non-negative value per point")
        self.weights = weights.ravel() * density
        self.mass = float(self.weights.sum())
        if self.mass < min_mass_fraction * total_mass:
            raise ArgumentError(
                f"box keeps mass {self.mass:.6f}, below {min_mass_fraction} of {total_mass}"
            )

    @classmethod
    def gaussian(cls, L: int = 2, box=(0.0, 5.0), nodes: int = 128, rule: str = "midpoint"):
        """Independent unit-variance gains folded onto the positive half-line."""
        scale = (2.0 / math.pi) ** (L / 2.0)

        def pdf(h):
            return scale * np.exp(-0.5 * np.sum(h * h, axis=1))

        return cls(pdf, [box] * L, nodes=nodes, name="gaussian", rule=rule)

    @property
    def L(self) -> int:
        return self.points.shape[1]

    def __repr__(self):
        return f"ContinuousChannelModel({self.name}, L={self.L}, nodes={self.nodes})"


def _criterion(q: StateQuantities, ordering: int) -> np.ndarray:
    if ordering == 1:
        return q.norm2 - q.eps
    if ordering == 2:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(q.collinear, np.inf, q.norm2 / q.eps)
    raise ArgumentError(f"ordering must be 1 or 2, got {ordering!r}")


@dataclass(frozen=True)
class ShapedDomain:
    """``{h good : O(h) > threshold}`` for ordering criterion ``O``."""

    a: tuple
    threshold: float
    ordering: int = 1

    def __call__(self, h) -> np.ndarray:
        q = StateQuantities.of(np.atleast_2d(h), np.asarray(self.a, dtype=float))
        good = q.norm2 > q.eps
        return good & (_criterion(q, self.ordering) > self.threshold)

    def __str__(self):
        if self.threshold == -np.inf:
            return "good"
        return f"O{self.ordering}>{self.threshold:g}"


def shape_domain(model, a, threshold: float, ordering: int = 1) -> ShapedDomain:
    """Good-domain states whose ordering criterion strictly exceeds ``threshold``."""
    if ordering not in (1, 2):
        raise ArgumentError(f"ordering must be 1 or 2, got {ordering!r}")
    return ShapedDomain(tuple(as_coefficients(a).tolist()), float(threshold), ordering)


def good_domain(a) -> ShapedDomain:
    return ShapedDomain(tuple(as_coefficients(a).tolist()), -np.inf, 1)


def p_continuous(h, a, mu: float):
    """Clamped KKT power at gain vector(s) ``h`` for water level ``mu``."""
    if not mu > 0:
        raise ArgumentError(f"mu must be positive, got {mu}")
    h = np.asarray(h, dtype=float)
    q = StateQuantities.of(np.atleast_2d(h), as_coefficients(a))
    out = np.maximum(_p_kkt(q, mu), 0.0)
    return float(out[0]) if h.ndim == 1 else out


def _mask(model, domain) -> np.ndarray:
    if domain is None:
        return np.ones(model.points.shape[0], dtype=bool)
    return np.asarray(domain(model.points), dtype=bool)


def expected_power(model: ContinuousChannelModel, a, domain, mu: float) -> float:
    """Quadrature of ``P(h, mu) f(h)`` over ``domain`` (``None`` = whole box)."""
    mask = _mask(model, domain)
    if not mask.any():
        return 0.0
    return float(model.weights[mask] @ p_continuous(model.points[mask], a, mu))


def _clamped_rate(q: StateQuantities, power) -> np.ndarray:
    return np.maximum(0.5 * np.log2((1.0 + power * q.norm2) / (q.a2 + power * q.eps)), 0.0)


def policy_rate(model: ContinuousChannelModel, a, power) -> float:
    """Expected clamped rate of a power policy sampled on ``model.points``."""
    q = StateQuantities.of(model.points, as_coefficients(a))
    return float(model.weights @ _clamped_rate(q, np.asarray(power, dtype=float)))


@dataclass
class ContinuousSolution:
    """Water level ``mu`` on ``domain`` (``mu`` is None for constant power)."""

    mu: Optional[float]
    domain: Callable
    expected_rate: float
    budget_used: float
    algorithm_id: str = "CP2"
    iterations: int = 0
    threshold: Optional[float] = None
    details: dict = field(default_factory=dict)

    def power(self, model: ContinuousChannelModel, a) -> np.ndarray:
        """Power policy sampled on the model's quadrature nodes."""
        mask = _mask(model, self.domain)
        out = np.zeros(model.points.shape[0])
        if self.mu is None:
            out[mask] = self.details["constant_power"]
        elif mask.any():
            out[mask] = p_continuous(model.points[mask], a, self.mu)
        return out


def solve_cp2(model: ContinuousChannelModel, a, domain, pbar: float,
              cfg: Optional[BisectionConfig] = None) -> ContinuousSolution:
    """Optimal water level on a fixed domain; rate is evaluated over the whole box."""
    cfg = cfg or BisectionConfig()
    a = as_coefficients(a)
    if not pbar > 0:
        raise ArgumentError(f"power budget must be positive, got {pbar}")
    mask = _mask(model, domain)
    w = model.weights[mask]
    if not w.sum() > 0:
        raise ArgumentError("domain has zero probability mass")
    q = StateQuantities.of(model.points[mask], a)

    def budget(mu):
        return float(w @ np.maximum(_p_kkt(q, mu), 0.0))

    mu, used, it = bisect_multiplier(budget, pbar, cfg)
    power = np.maximum(_p_kkt(q, mu), 0.0)
    # states outside the domain get zero power and hence zero clamped rate
    rate = float(w @ _clamped_rate(q, power))
    return ContinuousSolution(mu, domain, rate, used, iterations=it)


def algo_a0_continuous(model: ContinuousChannelModel, a, pbar: float) -> ContinuousSolution:
    """Constant power ``pbar`` on the good domain."""
    if pbar < 0:
        raise ArgumentError("power budget must be non-negative")
    domain = good_domain(a)
    mask = _mask(model, domain)
    q = StateQuantities.of(model.points[mask], as_coefficients(a))
    rate = float(model.weights[mask] @ _clamped_rate(q, float(pbar)))
    used = float(pbar * model.weights[mask].sum())
    return ContinuousSolution(None, domain, rate, used, algorithm_id="A0",
                              details={"constant_power": float(pbar)})


def algo_a1_continuous(model: ContinuousChannelModel, a, pbar: float,
                       cfg: Optional[BisectionConfig] = None) -> ContinuousSolution:
    """Water-filling over the whole good domain."""
    sol = solve_cp2(model, a, good_domain(a), pbar, cfg)
    sol.algorithm_id = "A1"
    return sol


@dataclass(frozen=True)
class ShapingConfig:
    initial_threshold: float = 0.0
    step: float = 0.1
    rate_tol: float = 1e-3
    ordering: int = 1
    max_rounds: int = 10_000

    def __post_init__(self):
        if not self.step > 0:
            raise ArgumentError("shaping step must be positive")
        if self.rate_tol <= 0:
            raise ArgumentError("rate_tol must be positive")
        if self.ordering not in (1, 2):
            raise ArgumentError("ordering must be 1 or 2")


def algo_iterative_continuous(model: ContinuousChannelModel, a, pbar: float,
                              cfg: Optional[ShapingConfig] = None,
                              bisection: Optional[BisectionConfig] = None) -> ContinuousSolution:
    """Shrink the support along the ordering criterion while the rate keeps improving.

    The threshold grows by ``cfg.step`` per round; the search stops at the
    first round whose gain in expected (clamped, whole-box) rate is not above
    ``cfg.rate_tol``, or whose domain is empty, and returns the round before.
    """
    cfg = cfg or ShapingConfig()
    threshold = cfg.initial_threshold
    current = solve_cp2(model, a, shape_domain(model, a, threshold, cfg.ordering), pbar, bisection)
    current.threshold = threshold
    rounds = 1
    history = [(threshold, current.expected_rate)]
    while rounds < cfg.max_rounds:
        threshold = cfg.initial_threshold + rounds * cfg.step
        domain = shape_domain(model, a, threshold, cfg.ordering)
        if not model.weights[_mask(model, domain)].sum() > 0:
            break
        try:
            candidate = solve_cp2(model, a, domain, pbar, bisection)
        except SolverError:
            break
        rounds += 1
        history.append((threshold, candidate.expected_rate))
        if candidate.expected_rate - current.expected_rate <= cfg.rate_tol:
            break
        candidate.threshold = threshold
        current = candidate
    current.algorithm_id = "A2"
    current.iterations = rounds
    current.details["history"] = history
    current.details["ordering"] = cfg.ordering
    return current
