"""Tail bounds for random submatrices and sufficient recovery conditions.

All evaluators return the raw formula value, which may exceed one; clip
with :func:`clip_probability` for reporting. A scale of zero in an exponent
denominator makes that failure mode impossible, so the corresponding term
is dropped from the minimum (it is ``+inf``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Sequence

import numpy as np

from .model import GramQuantities, Support, SupportModel
from .sampling import rejective_indices

E2 = math.e ** 2
OMP_GATE = 1.0 / (4.0 * E2)
BRUTE_FORCE_MAX_S = 15


class BoundDomainError(ValueError):
    """Argument outside the range where a bound statement applies."""


def clip_probability(x: float) -> float:
    return min(1.0, max(0.0, x))


def validity_floor(q: GramQuantities) -> float:
    """Smallest ``r`` for which the operator-norm tail bound applies."""
    return 2.0 * E2 * q.whw_op


def _ratio(num, den):
    return math.inf if den == 0.0 else num / den


def theorem1_bound(q: GramQuantities, r: float, symmetric: bool = False) -> float:
    """Tail bound on ``P_S(||H_{I,I}|| >= r)`` for a hollow ``H``.

    ``216 K exp(-min{r^2/(4e^2 ||HW||_{inf,2}^2), r^2/(4e^2 ||WH||_{2,1}^2),
    r/(2 mu)})``. With ``symmetric=True`` (hollow Gram of a unit-norm
    dictionary) the second term coincides with the first and is omitted.
    """
    if r < validity_floor(q):
        raise BoundDomainError(f"r={r:g} below validity floor {validity_floor(q):g}")
    # squares of ratios rather than ratios of squares: no underflow for tiny norms
    two_e = 2.0 * math.e
    a = _ratio(r, two_e * q.hw_inf2)
    terms = [a * a, _ratio(r, 2.0 * q.mu)]
    if not symmetric:
        b = _ratio(r, two_e * q.wh_21)
        terms.append(b * b)
    expo = min(terms)
    if r <= 0.0:
        expo = 0.0
    return 216.0 * q.K * math.exp(-expo)


def corollary2_bound(q: GramQuantities, r: float) -> float:
    """Same closed form for a cross-Gram ``Psi* Phi - diag``; ``q.mu`` is the
    cross-coherence."""
    return theorem1_bound(q, r, symmetric=False)


def lemma1_bound(q: GramQuantities, v: float) -> float:
    """``2K (e ||HW||_{inf,2}^2 / v^2)^(v^2/mu^2)`` bounding ``P_S(||H_I||_{inf,2} >= v)``."""
    if v <= 0.0:
        raise BoundDomainError("v must be positive")
    if q.hw_inf2 == 0.0 or q.mu == 0.0:
        # every row norm is zero, so the event is impossible
        return 0.0
    ratio = v / q.mu
    expo = ratio * ratio
    log_base = 1.0 + 2.0 * math.log(q.hw_inf2 / v)
    if log_base == 0.0:
        return 2.0 * q.K
    logval = math.log(2.0 * q.K) + expo * log_base
    return math.exp(logval) if logval < 700 else math.inf


def hoeffding_bound(m_inf2: float, x_inf: float, K: int, t: float) -> float:
    """``2K exp(-t^2 / (2 ||M||_{inf,2}^2 ||x||_inf^2))`` for Rademacher-signed ``x``."""
    if m_inf2 <= 0.0 or x_inf <= 0.0:
        raise BoundDomainError("scale parameters must be positive")
    if t < 0.0:
        raise BoundDomainError("t must be nonnegative")
    return 2.0 * K * math.exp(-t * t / (2.0 * m_inf2 ** 2 * x_inf ** 2))


# -- recovery conditions -----------------------------------------------------

@dataclass(frozen=True)
class ConditionReport:
    """Outcome of a sufficient-condition check; ``margins`` holds rhs - lhs."""

    holds: bool
    margins: dict = field(default_factory=dict)


def _report(pairs):
    margins = {name: rhs - lhs for name, (lhs, rhs) in pairs.items()}
    return ConditionReport(all(lhs <= rhs for lhs, rhs in pairs.values()), margins)


def _magnitudes(c):
    c = np.abs(np.asarray(c, dtype=float).ravel())
    if c.size == 0:
        raise ValueError("coefficient vector is empty")
    if np.any(c <= 0):
        raise ValueError("magnitudes must be strictly positive")
    return c


def _check_eps(eps):
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")


def min_peak_ratio(c) -> float:
    """``min over nonempty L of ||c_L||_inf / ||c_L||_2``.

    A set ``L`` whose largest entry is ``c_k`` can only gain 2-norm by
    adding every entry not exceeding ``c_k``, so the minimum is attained at
    a suffix of the descending order; scanning the ``S`` suffixes suffices.
    """
    c = np.sort(_magnitudes(c))[::-1]
    tail = np.sqrt(np.cumsum((c ** 2)[::-1])[::-1])
    return float(np.min(c / tail))


def min_peak_ratio_brute(c) -> float:
    """Exhaustive version of :func:`min_peak_ratio` (for ``S <= 15``)."""
    c = _magnitudes(c)
    if c.size > BRUTE_FORCE_MAX_S:
        raise ValueError("too many coefficients for brute force")
    best = math.inf
    for k in range(1, c.size + 1):
        for L in combinations(range(c.size), k):
            sub = c[list(L)]
            best = min(best, float(sub.max() / np.linalg.norm(sub)))
    return best


def thresholding_condition(c, q: GramQuantities, eps: float) -> ConditionReport:
    c = _magnitudes(c)
    _check_eps(eps)
    dyn = (c.min() / c.max()) ** 2
    log_term = math.log(4.0 * q.K / eps)
    return _report({
        "coherence": (q.mu ** 2, dyn / (8.0 * log_term)),
        "weighted_row_norm": (q.hw_inf2 ** 2, dyn / (8.0 * E2 * log_term)),
    })


def omp_condition(c, q: GramQuantities, eps: float) -> ConditionReport:
    c = _magnitudes(c)
    _check_eps(eps)
    ratio = min_peak_ratio(c)
    log216 = math.log(216.0 * q.K / eps)
    log218 = math.log(218.0 * q.K / eps)
    return _report({
        "whw_gate": (q.whw_op, OMP_GATE),
        "weighted_row_norm": (q.hw_inf2 ** 2,
                              min(ratio ** 2 / (16.0 * E2), 1.0 / (16.0 * E2 * log216))),
        "coherence": (q.mu, min(ratio / (4.0 * math.sqrt(log218)), 1.0 / (4.0 * log218))),
    })


def bp_condition(q: GramQuantities, eps: float) -> ConditionReport:
    _check_eps(eps)
    log220 = math.log(220.0 * q.K / eps)
    return _report({
        "whw_gate": (q.whw_op, OMP_GATE),
        "coherence": (q.mu, 1.0 / (4.0 * log220)),
        "weighted_row_norm": (q.hw_inf2 ** 2, 1.0 / (16.0 * E2 * log220)),
    })


def sensing_thresholding_condition(c, q_cross: GramQuantities, eps: float) -> ConditionReport:
    """Thresholding with a sensing dictionary; ``q_cross`` describes
    ``Psi* Phi - I`` (its ``mu`` is ``||H||_{inf,1}``)."""
    return thresholding_condition(c, q_cross, eps)


def sensing_omp_condition(c, q_gram: GramQuantities, q_cross: GramQuantities,
                          eps: float) -> ConditionReport:
    c = _magnitudes(c)
    _check_eps(eps)
    ratio = min_peak_ratio(c)
    log216 = math.log(216.0 * q_gram.K / eps)
    log218 = math.log(218.0 * q_gram.K / eps)
    return _report({
        "whw_gate": (q_gram.whw_op, OMP_GATE),
        "weighted_row_norm": (q_gram.hw_inf2 ** 2, 1.0 / (16.0 * E2 * log216)),
        "coherence": (q_gram.mu, 1.0 / (4.0 * log218)),
        "cross_weighted_row_norm": (q_cross.hw_inf2 ** 2, ratio ** 2 / (16.0 * E2)),
        "cross_coherence": (q_cross.mu, ratio / (4.0 * math.sqrt(log218))),
    })


# -- empirical tails ---------------------------------------------------------

def empirical_tail(statistic: Callable[[Support], float], model: SupportModel,
                   thresholds: Sequence[float], n_trials: int, seed: int,
                   domain: str = "tail") -> np.ndarray:
    """Fraction of rejective draws with ``statistic(I) >= r`` for each ``r``.

    Statistics with a ``batch`` method are evaluated on whole blocks of
    draws at once; others are called per support.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    idx = rejective_indices(model, n_trials, seed, domain=domain)
    values = statistic_values(statistic, idx)
    r = np.asarray(thresholds, dtype=float)
    return (values[None, :] >= r[:, None]).mean(axis=1)


def statistic_values(statistic, idx):
    batch = getattr(statistic, "batch", None)
    if batch is not None:
        return np.asarray(batch(idx), dtype=float)
    return np.array([statistic(Support.from_zero_based(row)) for row in idx], dtype=float)


def mc_slack(prob, n, sigmas=3.0):
    """``sigmas`` binomial standard deviations at success probability ``prob``."""
    prob = np.clip(prob, 0.0, 1.0)
    return sigmas * np.sqrt(prob * (1.0 - prob) / n)
