"""Distribution-aware sensing dictionaries and BP preconditioners.

With ``P = diag(p)``, the greedy sensing dictionary minimizes
``||(Psi* Phi - I) W||_F`` subject to ``<psi_k, phi_k> = 1``; the Lagrange
conditions give ``Psi = (Phi P Phi*)^-1 Phi D`` with ``D`` fixing the
diagonal. For BP the analogous left transform is ``T = (Phi P Phi*)^-1/2``
with ``Psi = T Phi D^1/2`` scaled to unit-norm columns.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .model import ModelError, SupportModel, as_matrix

MAX_COND = 1e12
MIN_SENSE = 1e-12
EIG_NEG_TOL = 1e-12


class SensingError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SensingDictionary:
    """``entries`` is ``Psi``; ``normalization`` is the diagonal of ``D``."""

    entries: np.ndarray
    normalization: np.ndarray
    kind: str

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


@dataclass(frozen=True, eq=False)
class Preconditioner:
    transform: np.ndarray
    psi: SensingDictionary


def weighted_frame(phi, model: SupportModel, ridge: float = 0.0) -> np.ndarray:
    """``Phi P Phi* + ridge I``, checked for conditioning."""
    m = as_matrix(phi)
    if m.shape[1] != model.K:
        raise ModelError(f"dictionary has {m.shape[1]} atoms, model has {model.K}")
    g = (m * model.p) @ m.T
    g = 0.5 * (g + g.T)
    if ridge:
        g = g + ridge * np.eye(g.shape[0])
    return g


def suggested_ridge(phi, model: SupportModel) -> float:
    return 1e-10 * np.trace(weighted_frame(phi, model)) / as_matrix(phi).shape[0]


def _eig_checked(g):
    lam, v = np.linalg.eigh(g)
    if lam[0] < -EIG_NEG_TOL * max(lam[-1], 1.0):
        raise SensingError(f"Phi P Phi* has negative eigenvalue {lam[0]:.3g}")
    if lam[0] <= 0.0 or lam[-1] / lam[0] > MAX_COND:
        raise SensingError("Phi P Phi* is singular or too ill-conditioned; consider a ridge")
    return lam, v


def greedy_sensing(phi, model: SupportModel, ridge: float = 0.0) -> SensingDictionary:
    """Sensing dictionary for thresholding and OMP with ``<psi_k, phi_k> = 1``."""
    m = as_matrix(phi)
    g = weighted_frame(m, model, ridge)
    _eig_checked(g)
    mk = sla.solve(g, m, assume_a="pos")
    sense = np.einsum("ij,ij->j", mk, m)
    bad = np.flatnonzero(sense <= MIN_SENSE)
    if bad.size:
        raise SensingError(f"atom {bad[0] + 1} cannot be sensed (<m_k, phi_k> = {sense[bad[0]]:.3g})")
    D = 1.0 / sense
    return SensingDictionary(mk * D, D, "greedy")


def preconditioner(phi, model: SupportModel, ridge: float = 0.0) -> Preconditioner:
    """Left transform ``T = (Phi P Phi*)^-1/2`` and the unit-norm ``Psi = T Phi D^1/2``."""
    m = as_matrix(phi)
    lam, v = _eig_checked(weighted_frame(m, model, ridge))
    T = (v / np.sqrt(lam)) @ v.T
    T = 0.5 * (T + T.T)
    u = T @ m
    sq = np.einsum("ij,ij->j", u, u)
    if np.any(sq <= MIN_SENSE):
        raise SensingError("transformed atom vanished")
    D = 1.0 / sq
    psi = u * np.sqrt(D)
    return Preconditioner(T, SensingDictionary(psi, D, "precondition"))


def uniform_model(K: int, S: int) -> SupportModel:
    """``p_i = S/K`` for every atom (no rounding of the sum)."""
    return SupportModel(np.full(K, S / K), S)


def frobenius_objective(psi, phi, model: SupportModel) -> float:
    """``||(Psi* Phi - I) W||_F``."""
    a, b = as_matrix(psi), as_matrix(phi)
    g = a.T @ b - np.eye(b.shape[1])
    return float(np.linalg.norm(g * model.weights[None, :]))
