"""Channel model, computation-rate expressions and state classification.

All logarithms are base 2, so rates are in bits per channel use. Channel
states are indexed from 0 in code; active sets are tuples of those indices.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ArgumentError

PROB_TOL = 1e-9
COLLINEAR_RTOL = 1e-12


def as_coefficients(a) -> np.ndarray:
    """Validate an integer coefficient vector and return it as a float array."""
    arr = np.asarray(a)
    if arr.ndim != 1 or arr.size < 2:
        raise ArgumentError(f"coefficient vector must have length >= 2, got shape {arr.shape}")
    if not np.all(np.asarray(arr, dtype=float) == np.round(np.asarray(arr, dtype=float))):
        raise ArgumentError(f"coefficient vector must be integer valued, got {arr.tolist()}")
    arr = arr.astype(float)
    if not np.any(arr):
        raise ArgumentError("coefficient vector must not be all zero")
    return arr


def _pair(h, a):
    h = np.asarray(h, dtype=float)
    a = np.asarray(a, dtype=float)
    if h.shape[-1] != a.shape[-1]:
        raise ArgumentError(f"dimension mismatch: h has {h.shape[-1]} users, a has {a.shape[-1]}")
    return h, a


def cross_norm2(x, a):
    """``||x||^2 ||a||^2 - (x.a)^2`` via Lagrange's identity (last axis = users).

    Summing the squared 2x2 minors avoids the cancellation of the direct
    form, so the result is non-negative and exactly 0 for ``x`` parallel to ``a``.
    """
    x = np.asarray(x, dtype=float)
    minors = x[..., :, None] * a[None, :] - x[..., None, :] * a[:, None]
    return 0.5 * np.sum(minors * minors, axis=(-2, -1))


def misalignment(h, a):
    """``||h||^2 ||a||^2 - (h.a)^2``, never negative.

    Works on a single gain vector or on a stack of them (last axis = users).
    """
    h, a = _pair(h, a)
    eps = cross_norm2(h, a)
    return float(eps) if np.ndim(eps) == 0 else eps


def is_collinear(h, a):
    """Relative-tolerance test for ``h`` parallel to ``a``."""
    h, a = _pair(h, a)
    scale = np.sum(h * h, axis=-1) * (a @ a)
    out = misalignment(h, a) < COLLINEAR_RTOL * scale
    return bool(out) if np.ndim(out) == 0 else out


def asymmetric_rate_unclamped(h, a, p) -> float:
    """Per-state computation rate for per-user powers ``p`` (may be negative)."""
    h, a = _pair(h, a)
    p = np.asarray(p, dtype=float)
    if p.shape != h.shape:
        raise ArgumentError(f"power vector shape {p.shape} does not match gain shape {h.shape}")
    if np.any(p < 0):
        raise ArgumentError("powers must be non-negative")
    g = np.sqrt(p) * h
    s = g @ g
    a2 = a @ a
    den = a2 + float(cross_norm2(g, a))
    return 0.5 * float(np.log2((1.0 + s) / den))


def symmetric_rate_unclamped(h, a, power):
    """Rate when every user transmits with the same ``power`` (scalar or array)."""
    h, a = _pair(h, a)
    power = np.asarray(power, dtype=float)
    if np.any(power < 0):
        raise ArgumentError("power must be non-negative")
    n = float(h @ h)
    eps = misalignment(h, a)
    out = 0.5 * np.log2((1.0 + power * n) / (a @ a + power * eps))
    return float(out) if out.ndim == 0 else out


def symmetric_rate_slope(h, a, power):
    """Derivative of :func:`symmetric_rate_unclamped` with respect to power."""
    h, a = _pair(h, a)
    power = np.asarray(power, dtype=float)
    n = float(h @ h)
    eps = misalignment(h, a)
    out = (h @ a) ** 2 / (2.0 * np.log(2.0) * (1.0 + power * n) * (a @ a + power * eps))
    return float(out) if out.ndim == 0 else out


def clamped(rate):
    return np.maximum(rate, 0.0) if np.ndim(rate) else max(float(rate), 0.0)


def order_criterion(h, a, method: int) -> float:
    """Goodness score of a state: additive (1) or asymptotic-ratio (2).

    Method 2 is ``+inf`` for states collinear with ``a``.
    """
    h, a = _pair(h, a)
    n = float(h @ h)
    eps = misalignment(h, a)
    if method == 1:
        return n - eps
    if method == 2:
        if is_collinear(h, a):
            return float("inf")
        return n / eps
    raise ArgumentError(f"ordering method must be 1 or 2, got {method!r}")


class DiscreteChannelModel:
    """Finite set of joint channel states with probabilities.

    Build from per-user marginals with :meth:`from_marginals` (independent
    users, states enumerated with user 1 varying slowest) or directly from a
    list of joint states.

    Attributes
    ----------
    gains : ndarray, shape (M, L)
    probs : ndarray, shape (M,)
    marginals : tuple of (values, probs) per user, or None
    """

    def __init__(self, gains, probs, marginals=None):
        gains = np.atleast_2d(np.asarray(gains, dtype=float))
        probs = np.asarray(probs, dtype=float).ravel()
        if gains.shape[0] != probs.size:
            raise ArgumentError(f"{gains.shape[0]} states but {probs.size} probabilities")
        if gains.shape[1] < 2:
            raise ArgumentError("need at least two users")
        if np.any(gains < 0):
            raise ArgumentError("channel gains must be non-negative")
        if np.any(np.sum(gains * gains, axis=1) <= 0):
            raise ArgumentError("every state needs at least one nonzero gain")
        if np.any(probs <= 0) or np.any(probs > 1 + PROB_TOL):
            raise ArgumentError("state probabilities must lie in (0, 1]")
        if abs(probs.sum() - 1.0) > PROB_TOL:
            raise ArgumentError(f"state probabilities sum to {probs.sum():.12g}, not 1")
        self.gains = gains
        self.probs = probs / probs.sum()
        self.marginals = marginals
        self.gains.setflags(write=False)
        self.probs.setflags(write=False)

    @classmethod
    def from_marginals(cls, values: Sequence[Sequence[float]], probs: Sequence[Sequence[float]]):
        if len(values) != len(probs):
            raise ArgumentError("values and probs must list the same number of users")
        vals, ps = [], []
        for i, (v, p) in enumerate(zip(values, probs)):
            v = np.asarray(v, dtype=float)
            p = np.asarray(p, dtype=float)
            if v.shape != p.shape or v.ndim != 1 or v.size == 0:
                raise ArgumentError(f"user {i + 1}: values and probs must be equal-length lists")
            if abs(p.sum() - 1.0) > PROB_TOL:
                raise ArgumentError(f"user {i + 1}: marginal probabilities sum to {p.sum():.12g}, not 1")
            vals.append(v)
            ps.append(p / p.sum())
        gains, joint = [], []
        for idx in itertools.product(*(range(v.size) for v in vals)):
            gains.append([vals[i][j] for i, j in enumerate(idx)])
            joint.append(np.prod([ps[i][j] for i, j in enumerate(idx)]))
        marginals = tuple((tuple(v.tolist()), tuple(p.tolist())) for v, p in zip(vals, ps))
        return cls(gains, joint, marginals=marginals)

    @property
    def L(self) -> int:
        return self.gains.shape[1]

    @property
    def M(self) -> int:
        return self.gains.shape[0]

    def __repr__(self):
        return f"DiscreteChannelModel(L={self.L}, M={self.M})"


@dataclass
class StateQuantities:
    """Per-state scalars shared by the symmetric solvers."""

    norm2: np.ndarray  # ||h||^2
    proj2: np.ndarray  # (h.a)^2
    eps: np.ndarray  # misalignment
    a2: float
    collinear: np.ndarray

    @classmethod
    def of(cls, gains, a):
        gains, a = _pair(np.atleast_2d(gains), a)
        norm2 = np.sum(gains * gains, axis=1)
        a2 = float(a @ a)
        eps = cross_norm2(gains, a)
        return cls(norm2, (gains @ a) ** 2, eps, a2, eps < COLLINEAR_RTOL * norm2 * a2)


def classify_states(model: DiscreteChannelModel, a):
    """Split states into good (``||h||^2 > misalignment``) and bad index tuples."""
    q = StateQuantities.of(model.gains, as_coefficients(a))
    good = q.norm2 > q.eps
    return tuple(np.flatnonzero(good).tolist()), tuple(np.flatnonzero(~good).tolist())


def state_rates(model: DiscreteChannelModel, a, policy) -> np.ndarray:
    """Unclamped rate at every state for a symmetric (M,) or asymmetric (L, M) policy."""
    a = as_coefficients(a)
    policy = np.asarray(policy, dtype=float)
    if policy.shape == (model.M,):
        if np.any(policy < 0):
            raise ArgumentError("powers must be non-negative")
        q = StateQuantities.of(model.gains, a)
        return 0.5 * np.log2((1.0 + policy * q.norm2) / (q.a2 + policy * q.eps))
    if policy.shape == (model.L, model.M):
        if np.any(policy < 0):
            raise ArgumentError("powers must be non-negative")
        g = np.sqrt(policy) * model.gains.T
        s = np.sum(g * g, axis=0)
        a2 = a @ a
        den = a2 + cross_norm2(g.T, a)
        return 0.5 * np.log2((1.0 + s) / den)
    raise ArgumentError(
        f"policy shape {policy.shape} matches neither ({model.M},) nor ({model.L}, {model.M})"
    )


def expected_rate(model: DiscreteChannelModel, a, policy) -> float:
    """Probability-weighted sum of clamped per-state rates."""
    return float(model.probs @ np.maximum(state_rates(model, a, policy), 0.0))


def active_set_of(policy) -> tuple:
    policy = np.asarray(policy, dtype=float)
    power = policy if policy.ndim == 1 else np.linalg.norm(policy, axis=0)
    return tuple(np.flatnonzero(power > 0).tolist())


@dataclass
class SolveReport:
    """Outcome of one allocation run.

    ``policy`` is an (M,) vector for symmetric runs and an (L, M) matrix for
    asymmetric ones. ``multiplier`` is None for methods without one.
    """

    policy: np.ndarray
    active_set: tuple
    expected_rate: float
    algorithm_id: str
    multiplier: Optional[float] = None
    iterations: int = 0
    details: dict = field(default_factory=dict)

    @property
    def kind(self) -> str:
        return "symmetric" if self.policy.ndim == 1 else "asymmetric"

    def bitmask(self) -> str:
        """Active set as a 0/1 string, character m standing for state m+1."""
        n = self.policy.shape[-1]
        active = set(self.active_set)
        return "".join("1" if m in active else "0" for m in range(n))


def make_report(model, a, policy, algorithm_id, multiplier=None, iterations=0, **details) -> SolveReport:
    policy = np.asarray(policy, dtype=float)
    return SolveReport(
        policy=policy,
        active_set=active_set_of(policy),
        expected_rate=expected_rate(model, a, policy),
        algorithm_id=algorithm_id,
        multiplier=multiplier,
        iterations=iterations,
        details=details,
    )
