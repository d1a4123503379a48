"""Independent reference implementations used only by the tests.

Everything here is written as directly as possible (itertools, mpmath,
plain loops) so that it shares no code path with the package.
"""

from itertools import combinations, product

import mpmath as mp
import numpy as np

mp.mp.dps = 50


def poisson_table(p):
    """{frozenset of 1-based indices: probability} over all subsets."""
    K = len(p)
    out = {}
    for bits in product([0, 1], repeat=K):
        prob = 1.0
        for b, pi in zip(bits, p):
            prob *= pi if b else 1.0 - pi
        out[frozenset(i + 1 for i, b in enumerate(bits) if b)] = prob
    return out


def rejective_table(p, S):
    full = poisson_table(p)
    sub = {I: v for I, v in full.items() if len(I) == S}
    c = sum(sub.values())
    return {I: v / c for I, v in sub.items()}


def cardinality_tail(p, S):
    return sum(v for I, v in poisson_table(p).items() if len(I) >= S)


def submatrix_tail(mu, hw, wh, K, r, symmetric=False):
    e2 = mp.e ** 2
    r = mp.mpf(r)
    terms = []
    if hw:
        terms.append(r ** 2 / (4 * e2 * mp.mpf(hw) ** 2))
    if wh and not symmetric:
        terms.append(r ** 2 / (4 * e2 * mp.mpf(wh) ** 2))
    if mu:
        terms.append(r / (2 * mp.mpf(mu)))
    if not terms:
        return mp.mpf(0)
    return 216 * K * mp.exp(-min(terms))


def row_norm_tail(mu, hw, K, v):
    v = mp.mpf(v)
    return 2 * K * (mp.e * mp.mpf(hw) ** 2 / v ** 2) ** (v ** 2 / mp.mpf(mu) ** 2)


def hoeffding(m, x, K, t):
    return 2 * K * mp.exp(-mp.mpf(t) ** 2 / (2 * mp.mpf(m) ** 2 * mp.mpf(x) ** 2))


def l1_min_bruteforce(a, y, tol=1e-9):
    """Smallest ||x||_1 over basic feasible solutions of ``a x = y``.

    An l1 minimizer can always be taken at a vertex, i.e. supported on a set
    of linearly independent columns; enumerate them all.
    """
    d, K = a.shape
    best = np.inf
    if not np.any(y):
        return 0.0
    for k in range(1, d + 1):
        for J in combinations(range(K), k):
            sub = a[:, J]
            if np.linalg.matrix_rank(sub, tol=1e-10) < k:
                continue
            z = np.linalg.lstsq(sub, y, rcond=None)[0]
            if np.linalg.norm(sub @ z - y) <= tol:
                best = min(best, float(np.abs(z).sum()))
    return best


def peak_ratio_subsets(c):
    best = np.inf
    c = np.asarray(c, dtype=float)
    for k in range(1, len(c) + 1):
        for L in combinations(range(len(c)), k):
            v = c[list(L)]
            best = min(best, v.max() / np.sqrt((v ** 2).sum()))
    return best


def orthonormal(n, rng):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def unit_columns(d, K, rng):
    g = rng.standard_normal((d, K))
    return g / np.linalg.norm(g, axis=0)
