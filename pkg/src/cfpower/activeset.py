"""Active-set search strategies shared by the symmetric and asymmetric solvers.

Each strategy takes ``solve(support) -> SolveReport``, which allocates power
on a support set and leaves every other state at zero power.
"""
from __future__ import annotations

import itertools
import logging

from .errors import SolverError
from .rates import state_rates

log = logging.getLogger(__name__)

TIE_TOL = 1e-12


def _positive_survivors(model, a, report, support):
    rates = state_rates(model, a, report.policy)
    return [m for m in support if rates[m] > 0]


def two_pass(model, a, candidates, solve, zero):
    """Solve on ``candidates``, drop non-positive-rate states, solve again.

    Returns ``(second, first)``.
    """
    candidates = list(candidates)
    if not candidates:
        return zero, zero
    first = solve(candidates)
    survivors = _positive_survivors(model, a, first, candidates)
    second = solve(survivors) if survivors else zero
    return second, first


def ordered_elimination(model, a, order, solve, zero):
    """Drop the worst remaining state each round while the rate does not decrease.

    ``order`` runs from the worst state to the best. Within a round, states
    whose rate comes out non-positive are pruned and the support re-solved.
    """
    support = list(order)
    best = zero
    rounds = 0
    while support:
        rounds += 1
        report = solve(support)
        survivors = _positive_survivors(model, a, report, support)
        if len(survivors) < len(support):
            report = solve(survivors) if survivors else zero
        if report.expected_rate < best.expected_rate:
            break
        best = report
        support = support[1:]
    best.details.setdefault("rounds", rounds)
    return best


def exhaustive(candidates, solve, zero):
    """Best report over every subset of ``candidates``.

    Subsets are visited by size, then lexicographically, and a later subset
    replaces the incumbent only if strictly better, so ties favour smaller
    and lexicographically earlier supports.
    """
    candidates = sorted(candidates)
    best = zero
    visited = skipped = 0
    for k in range(1, len(candidates) + 1):
        for subset in itertools.combinations(candidates, k):
            visited += 1
            try:
                report = solve(list(subset))
            except SolverError as exc:
                # a support with no usable state cannot be bracketed; it contributes nothing
                log.debug("skipping support %s: %s", subset, exc)
                skipped += 1
                continue
            if report.expected_rate > best.expected_rate + TIE_TOL:
                best = report
                best.details["support"] = subset
    best.details["subsets_visited"] = visited
    best.details["subsets_skipped"] = skipped
    return best
