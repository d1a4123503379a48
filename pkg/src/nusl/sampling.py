"""Poisson and rejective support sampling, plus exact enumeration oracles.

Poisson sampling includes each atom independently with probability ``p_i``.
Rejective (conditional Bernoulli) sampling is Poisson sampling conditioned on
``|I| = S``; we draw it by rejection, which is exact by construction.

Subsets of ``{1..K}`` are encoded as bitmasks internally: bit ``i-1`` set
means atom ``i`` is present. Enumeration tables list every mask together
with its exact probability and are the oracle the samplers are tested
against.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Union

import numpy as np

from .model import ModelError, Support, SupportModel
from .rng import stream

MAX_ENUM_K = 20
MAX_MONOTONE_CHECK_K = 12
MAX_CHAIN_K = 16
DEFAULT_MAX_ATTEMPTS = 100_000
BLOCK_SIZE = 4096
EXACT_TOL = 1e-12


class SamplingError(RuntimeError):
    pass


def _split(model: SupportModel):
    """Indices forced in (p=1), free (0<p<1), and the residual sparsity."""
    p = model.p
    forced = np.flatnonzero(p >= 1.0)
    free = np.flatnonzero((p > 0.0) & (p < 1.0))
    s_free = model.S - forced.size
    if s_free < 0 or s_free > free.size:
        raise ModelError("no support of size S has positive probability")
    return forced, free, s_free


def poisson_sample(model: SupportModel, rng) -> Support:
    hit = rng.random(model.K) < model.p
    return Support.from_zero_based(np.flatnonzero(hit))


def rejective_sample(model: SupportModel, rng, max_attempts: int = DEFAULT_MAX_ATTEMPTS) -> Support:
    """Draw one support of size exactly ``S`` from the rejective model.

    Atoms with ``p_i = 1`` are always included and atoms with ``p_i = 0``
    never, so the rejection loop only runs over the genuinely random atoms.
    """
    forced, free, s_free = _split(model)
    if s_free == 0:
        return Support.from_zero_based(forced)
    pf = model.p[free]
    for _ in range(max_attempts):
        hit = rng.random(free.size) < pf
        if np.count_nonzero(hit) == s_free:
            out = Support.from_zero_based(np.concatenate([forced, free[hit]]))
            assert len(out) == model.S
            return out
    raise SamplingError(f"rejective sampling exceeded {max_attempts} attempts")


def _rejective_block(model, rng, n, max_attempts):
    forced, free, s_free = _split(model)
    if s_free == 0:
        return np.broadcast_to(forced, (n, forced.size)).copy()
    pf = model.p[free]
    accepted = []
    have = 0
    # rows per round sized from the acceptance rate estimate P(|I|=s_free)
    rate = max(poisson_binomial_pmf(pf)[s_free], 1e-6)
    attempts = 0
    while have < n:
        m = int(min(max(64, 1.3 * (n - have) / rate), 2_000_000 // max(free.size, 1) + 64))
        hits = rng.random((m, free.size)) < pf
        rows = hits[hits.sum(axis=1) == s_free]
        attempts += m
        if rows.shape[0]:
            accepted.append(rows)
            have += rows.shape[0]
        elif attempts > max_attempts * n:
            raise SamplingError("rejective sampling exceeded attempt cap")
    hits = np.concatenate(accepted)[:n]
    cols = np.nonzero(hits)[1].reshape(n, s_free)
    idx = np.concatenate([np.broadcast_to(forced, (n, forced.size)), free[cols]], axis=1)
    idx.sort(axis=1)
    return idx


def rejective_indices(model: SupportModel, n: int, seed: int, domain: str = "rejective",
                      block_size: int = BLOCK_SIZE,
                      max_attempts: int = DEFAULT_MAX_ATTEMPTS) -> np.ndarray:
    """``n`` rejective draws as an ``(n, S)`` array of sorted 0-based indices.

    Draws are produced in fixed blocks of ``block_size``; block ``b`` uses
    ``stream(seed, b, domain)``, so the result depends only on ``(seed, n,
    block_size)`` and not on how blocks are scheduled.
    """
    out = np.empty((n, model.S), dtype=np.intp)
    for b, start in enumerate(range(0, n, block_size)):
        m = min(block_size, n - start)
        out[start:start + m] = _rejective_block(model, stream(seed, b, domain), m, max_attempts)
    return out


def poisson_masks(model: SupportModel, n: int, seed: int, domain: str = "poisson",
                  block_size: int = BLOCK_SIZE) -> np.ndarray:
    """``n`` Poisson draws as an ``(n, K)`` boolean inclusion matrix."""
    out = np.empty((n, model.K), dtype=bool)
    for b, start in enumerate(range(0, n, block_size)):
        m = min(block_size, n - start)
        out[start:start + m] = stream(seed, b, domain).random((m, model.K)) < model.p
    return out


# -- exact enumeration -------------------------------------------------------

def _subset_products(p):
    """Poisson probability of every mask, in mask order, built by doubling."""
    probs = np.ones(1)
    for pi in p:
        probs = np.concatenate([probs * (1.0 - pi), probs * pi])
    return probs


def popcounts(K: int) -> np.ndarray:
    c = np.zeros(1, dtype=np.int16)
    for _ in range(K):
        c = np.concatenate([c, c + 1])
    return c


@dataclass(frozen=True, eq=False)
class SupportDistributionTable:
    """Exact probabilities of supports under one sampling model.

    ``masks[j]`` encodes a support and ``probs[j]`` is its probability.
    """

    masks: np.ndarray
    probs: np.ndarray
    kind: str
    K: int
    S: int

    @property
    def entries(self) -> dict:
        return {Support.from_mask(int(m)): float(q) for m, q in zip(self.masks, self.probs)}

    def probability(self, support: Support) -> float:
        hit = np.flatnonzero(self.masks == support.mask)
        return float(self.probs[hit[0]]) if hit.size else 0.0

    def sample(self, rng, n: int) -> np.ndarray:
        """Inverse-CDF draws of ``n`` masks; free of rejection-loop randomness."""
        cdf = np.cumsum(self.probs)
        cdf /= cdf[-1]
        return self.masks[np.searchsorted(cdf, rng.random(n), side="right").clip(max=len(cdf) - 1)]


def _check_enum_size(K):
    if K > MAX_ENUM_K:
        raise ValueError(f"K={K} too large for enumeration (max {MAX_ENUM_K})")


def enumerate_poisson(model: SupportModel) -> SupportDistributionTable:
    _check_enum_size(model.K)
    probs = _subset_products(model.p)
    masks = np.arange(probs.size, dtype=np.int64)
    return SupportDistributionTable(masks, probs, "poisson", model.K, model.S)


def enumerate_rejective(model: SupportModel) -> SupportDistributionTable:
    """Size-``S`` supports of positive mass with ``P(I | |I| = S)``; the
    normalizing constant is the reciprocal of the total mass on size-``S`` sets."""
    _check_enum_size(model.K)
    probs = _subset_products(model.p)
    sel = np.flatnonzero((popcounts(model.K) == model.S) & (probs > 0.0))
    mass = probs[sel]
    total = mass.sum()
    if total <= 0.0:
        raise ModelError("no size-S subset has positive mass")
    return SupportDistributionTable(sel.astype(np.int64), mass / total, "rejective", model.K, model.S)


def poisson_binomial_pmf(p) -> np.ndarray:
    """Distribution of the number of successes of independent trials."""
    pmf = np.ones(1)
    for pi in np.ravel(p):
        nxt = np.zeros(pmf.size + 1)
        nxt[:-1] += pmf * (1.0 - pi)
        nxt[1:] += pmf * pi
        pmf = nxt
    return pmf


# -- monotone indicators -----------------------------------------------------

Indicator = Union[Callable[[Support], int], np.ndarray]


def indicator_table(f: Indicator, K: int) -> np.ndarray:
    """Evaluate a set indicator on every mask of ``{1..K}``.

    ``f`` may already be a table, may expose a vectorized ``table(K)``
    method, or is called once per subset.
    """
    if isinstance(f, np.ndarray):
        vals = np.asarray(f)
        if vals.shape != (1 << K,):
            raise ValueError(f"indicator table must have length 2**{K}")
    elif hasattr(f, "table"):
        vals = np.asarray(f.table(K))
    else:
        vals = np.array([f(Support.from_mask(m)) for m in range(1 << K)])
    if not np.all((vals == 0) | (vals == 1)):
        raise ValueError("indicator must be 0/1 valued")
    return vals.astype(np.uint8)


def is_monotone(values: np.ndarray, K: int) -> bool:
    masks = np.arange(1 << K)
    for j in range(K):
        lo = masks[(masks >> j) & 1 == 0]
        if np.any(values[lo] > values[lo | (1 << j)]):
            return False
    return True


def _monotone_values(f, K):
    vals = indicator_table(f, K)
    if K <= MAX_MONOTONE_CHECK_K and not is_monotone(vals, K):
        raise ValueError("indicator is not monotone: f(I) > f(I + {j}) for some I, j")
    return vals


class CardinalityAtLeast:
    def __init__(self, t):
        self.t = t

    def __call__(self, support):
        return int(len(support) >= self.t)

    def table(self, K):
        return (popcounts(K) >= self.t).astype(np.uint8)


class ContainsAny:
    """1 iff the support contains one of the given generator sets."""

    def __init__(self, generators):
        self.generators = [Support.of(g) for g in generators]

    def __call__(self, support):
        s = set(support.indices)
        return int(any(set(g.indices) <= s for g in self.generators))

    def table(self, K):
        masks = np.arange(1 << K, dtype=np.int64)
        out = np.zeros(masks.size, dtype=bool)
        for g in self.generators:
            gm = g.mask
            out |= (masks & gm) == gm
        return out.astype(np.uint8)


class NormAtLeast:
    """1 iff a submatrix norm statistic of ``H`` reaches ``t``.

    ``kind="op"`` uses ``||H_{I,I}||_{2,2}``; ``kind="row"`` uses
    ``||H_I||_{inf,2}``. Both grow when atoms are added.
    """

    def __init__(self, H, t, kind="op"):
        self.H = np.asarray(H, dtype=float)
        self.t = t
        self.kind = kind

    def value(self, support):
        idx = support.zero_based
        if idx.size == 0:
            return 0.0
        if self.kind == "op":
            return float(np.linalg.norm(self.H[np.ix_(idx, idx)], 2))
        return float(np.sqrt(np.max(np.sum(self.H[:, idx] ** 2, axis=1))))

    def __call__(self, support):
        return int(self.value(support) >= self.t)


def random_monotone_indicator(K: int, rng, max_generators: int = 4) -> np.ndarray:
    """A random monotone indicator table: the up-set of a few random sets."""
    n = int(rng.integers(1, max_generators + 1))
    gens = []
    for _ in range(n):
        size = int(rng.integers(1, K + 1))
        gens.append(tuple(int(i) + 1 for i in rng.choice(K, size, replace=False)))
    return ContainsAny(gens).table(K)


# -- exact verification ------------------------------------------------------

@dataclass(frozen=True)
class PoissonisationReport:
    lhs: float
    rhs: float
    holds: bool


@dataclass(frozen=True)
class MedianReport:
    tail: float
    holds: bool


def verify_poissonisation(model: SupportModel, f: Indicator) -> PoissonisationReport:
    """Exact check of ``P_S(f=1) <= 2 P(f=1)`` for a monotone indicator."""
    _check_enum_size(model.K)
    vals = _monotone_values(f, model.K)
    poisson = enumerate_poisson(model)
    rej = enumerate_rejective(model)
    rhs = 2.0 * float(np.dot(vals[poisson.masks], poisson.probs))
    lhs = float(np.dot(vals[rej.masks], rej.probs))
    return PoissonisationReport(lhs, rhs, lhs <= rhs + EXACT_TOL)


def conditional_chain(model: SupportModel, f: Indicator) -> dict:
    """``T -> P(f(I)=1 | |I|=T)`` under Poisson sampling, for every ``T``
    with positive probability."""
    if model.K > MAX_CHAIN_K:
        raise ValueError(f"K={model.K} too large (max {MAX_CHAIN_K})")
    vals = _monotone_values(f, model.K)
    probs = _subset_products(model.p)
    card = popcounts(model.K)
    mass = np.bincount(card, weights=probs, minlength=model.K + 1)
    hit = np.bincount(card, weights=probs * vals, minlength=model.K + 1)
    return {T: hit[T] / mass[T] for T in range(model.K + 1) if mass[T] > 0}


def verify_conditional_monotonicity(model: SupportModel, f: Indicator) -> bool:
    chain = list(conditional_chain(model, f).values())
    return all(a <= b + EXACT_TOL for a, b in zip(chain, chain[1:]))


def verify_median_property(model: SupportModel) -> MedianReport:
    """``P(|I| >= S) >= 1/2`` under Poisson sampling, by exact convolution."""
    _check_enum_size(model.K)
    tail = float(poisson_binomial_pmf(model.p)[model.S:].sum())
    return MedianReport(tail, tail >= 0.5 - EXACT_TOL)


def total_variation(table: SupportDistributionTable, masks: np.ndarray) -> float:
    """TV distance between a table and the empirical law of sampled masks."""
    counts = np.bincount(np.asarray(masks, dtype=np.int64), minlength=1 << table.K)
    emp = counts / counts.sum()
    ref = np.zeros(1 << table.K)
    ref[table.masks] = table.probs
    return 0.5 * float(np.abs(emp - ref).sum())


def masks_from_indices(idx: np.ndarray) -> np.ndarray:
    """Row-wise bitmasks for an ``(n, S)`` array of 0-based indices."""
    return np.bitwise_or.reduce(np.left_shift(np.int64(1), idx.astype(np.int64)), axis=1) \
        if idx.shape[1] else np.zeros(idx.shape[0], dtype=np.int64)
