"""Hollow Gram and cross-Gram matrices and the norms the bounds consume.

Norm conventions: ``||A||_{inf,2}`` is the largest row 2-norm,
``||A||_{2,1}`` the largest column 2-norm, ``||A||_{inf,1}`` the largest
absolute entry and ``||A||_{2,2}`` the operator norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Dictionary, GramQuantities, ModelError, Support, SupportModel, as_matrix

SVD_MAX_DIM = 512
POWER_TOL = 1e-12
POWER_MAX_ITER = 5000
SYMMETRY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class HollowMatrix:
    """A matrix with exactly zero diagonal."""

    entries: np.ndarray
    symmetric: bool

    def __post_init__(self):
        m = np.array(self.entries, dtype=float, copy=True)
        n = min(m.shape)
        if np.any(m[np.arange(n), np.arange(n)] != 0.0):
            raise ModelError("hollow matrix must have zero diagonal")
        if self.symmetric and (m.shape[0] != m.shape[1]
                               or np.max(np.abs(m - m.T), initial=0.0) > SYMMETRY_TOL):
            raise ModelError("matrix flagged symmetric is not")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def shape(self):
        return self.entries.shape

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


def _zero_diag(g):
    g = np.array(g, dtype=float)
    n = min(g.shape)
    g[np.arange(n), np.arange(n)] = 0.0
    return g


def hollow_gram(phi) -> HollowMatrix:
    """``H = Phi* Phi - I`` for a dictionary with unit-norm columns."""
    m = as_matrix(phi)
    if np.max(np.abs(np.linalg.norm(m, axis=0) - 1.0)) > 1e-9:
        raise ModelError("hollow_gram requires unit-norm columns")
    g = m.T @ m
    g = 0.5 * (g + g.T)
    return HollowMatrix(_zero_diag(g), symmetric=True)


def cross_gram(psi, phi) -> HollowMatrix:
    """``H = Psi* Phi - diag(Psi* Phi)``; no normalization of ``Psi`` needed."""
    a, b = as_matrix(psi), as_matrix(phi)
    if a.shape != b.shape:
        raise ModelError(f"shape mismatch: psi {a.shape} vs phi {b.shape}")
    return HollowMatrix(_zero_diag(a.T @ b), symmetric=False)


def operator_norm(m) -> float:
    """Largest singular value.

    Dense SVD up to ``SVD_MAX_DIM`` in the smaller dimension, power iteration
    on ``M^T M`` beyond that.
    """
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.size == 0:
        return 0.0
    if min(m.shape) <= SVD_MAX_DIM:
        return float(np.linalg.svd(m, compute_uv=False)[0])
    return _power_norm(m)


def _power_norm(m):
    rng = np.random.default_rng(0)
    v = rng.standard_normal(m.shape[1])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(POWER_MAX_ITER):
        w = m.T @ (m @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        new = np.sqrt(nw)
        if abs(new - est) <= POWER_TOL * new:
            return float(new)
        est = new
    return float(est)


def max_row_norm(m) -> float:
    m = np.atleast_2d(m)
    return float(np.sqrt(np.max(np.sum(m * m, axis=1)))) if m.size else 0.0


def max_col_norm(m) -> float:
    m = np.atleast_2d(m)
    return float(np.sqrt(np.max(np.sum(m * m, axis=0)))) if m.size else 0.0


def gram_quantities(h, model: SupportModel) -> GramQuantities:
    """Coherence and weighted norms of ``H`` under weights ``W = diag(sqrt p)``."""
    m = np.asarray(h, dtype=float)
    if m.shape[1] != model.K or m.shape[0] != model.K:
        raise ModelError(f"H has shape {m.shape}, expected {model.K}x{model.K}")
    w = model.weights
    hw = m * w[None, :]
    wh = w[:, None] * m
    return GramQuantities(
        mu=float(np.max(np.abs(m))),
        hw_inf2=max_row_norm(hw),
        wh_21=max_col_norm(wh),
        whw_op=operator_norm(w[:, None] * hw),
        K=model.K,
    )


def restricted_conditioning(phi, support: Support) -> float:
    """``||Phi_I* Phi_I - I||_{2,2}`` via the eigenvalues of the small Gram."""
    if len(support) == 0:
        return 0.0
    sub = as_matrix(phi)[:, support.zero_based]
    ev = np.linalg.eigvalsh(sub.T @ sub)
    return float(max(ev[-1] - 1.0, 1.0 - ev[0], 0.0))


def restricted_max_row_norm(h, support: Support) -> float:
    """``||H_I||_{inf,2}``: rows of ``H`` restricted to the columns in ``I``."""
    if len(support) == 0:
        return 0.0
    return max_row_norm(np.asarray(h, dtype=float)[:, support.zero_based])


def submatrix_norm(h, support: Support) -> float:
    """``||H_{I,I}||_{2,2}``."""
    idx = support.zero_based
    if idx.size == 0:
        return 0.0
    return operator_norm(np.asarray(h, dtype=float)[np.ix_(idx, idx)])


# -- batched statistics over many supports of equal size ---------------------

class SubmatrixOpNorm:
    """Statistic ``I -> ||H_{I,I}||_{2,2}`` with a batched evaluator."""

    name = "submatrix_op_norm"

    def __init__(self, h, chunk=4096):
        self.H = np.asarray(h, dtype=float)
        self.symmetric = self.H.shape[0] == self.H.shape[1] and np.allclose(self.H, self.H.T, atol=0, rtol=0)
        self.chunk = chunk

    def __call__(self, support):
        return submatrix_norm(self.H, support)

    def batch(self, idx):
        """Statistic for each row of an ``(n, S)`` array of 0-based indices."""
        n, s = idx.shape
        out = np.zeros(n)
        if s == 0:
            return out
        for a in range(0, n, self.chunk):
            ix = idx[a:a + self.chunk]
            sub = self.H[ix[:, :, None], ix[:, None, :]]
            if self.symmetric:
                out[a:a + len(ix)] = np.max(np.abs(np.linalg.eigvalsh(sub)), axis=1)
            else:
                out[a:a + len(ix)] = np.linalg.svd(sub, compute_uv=False)[:, 0]
        return out


class RestrictedRowNorm:
    """Statistic ``I -> ||H_I||_{inf,2}`` with a batched evaluator."""

    name = "restricted_row_norm"

    def __init__(self, h, chunk=1024):
        self.H = np.asarray(h, dtype=float)
        self.H2 = self.H ** 2
        self.chunk = chunk

    def __call__(self, support):
        return restricted_max_row_norm(self.H, support)

    def batch(self, idx):
        n, s = idx.shape
        out = np.zeros(n)
        if s == 0:
            return out
        for a in range(0, n, self.chunk):
            ix = idx[a:a + self.chunk]
            rows = self.H2[:, ix].sum(axis=2)
            out[a:a + len(ix)] = np.sqrt(rows.max(axis=0))
        return out
