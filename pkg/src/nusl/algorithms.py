"""Thresholding, OMP and Basis Pursuit, each optionally driven by a sensing
dictionary, plus recovery verdicts against a known signal."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .lp import FEAS_TOL, GAP_TOL, MAX_ITER, basis_pursuit_lp
from .model import SignalInstance, Support, SupportModel, as_matrix
from .sensing import preconditioner

PINV_RTOL = 1e-10
SENSE_TOL = 1e-9
COEFF_TOL = 1e-4
SUPPORT_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class RecoveryResult:
    support_found: Support
    coefficients: np.ndarray
    iterations: int
    converged: bool
    support_exact: Optional[bool] = None
    coeff_max_err: Optional[float] = None

    def to_json(self) -> dict:
        out = {
            "support_found": list(self.support_found.indices),
            "coefficients": [float(v) for v in self.coefficients],
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
        }
        if self.support_exact is not None:
            out["support_exact"] = bool(self.support_exact)
            out["coeff_max_err"] = float(self.coeff_max_err)
        return out


@dataclass(frozen=True)
class Verdict:
    support_exact: bool
    coeff_exact: bool
    coeff_max_err: float


@dataclass(frozen=True)
class BPOptions:
    feas_tol: float = FEAS_TOL
    gap_tol: float = GAP_TOL
    max_iter: int = MAX_ITER
    support_tol: float = SUPPORT_TOL


def _check_sensing(psi, phi):
    if psi.shape != phi.shape:
        raise ValueError(f"sensing shape {psi.shape} does not match dictionary {phi.shape}")
    diag = np.einsum("ij,ij->j", psi, phi)
    if np.max(np.abs(diag - 1.0)) > SENSE_TOL:
        raise ValueError("sensing dictionary must satisfy <psi_k, phi_k> = 1")


def _check_sparsity(S, phi):
    if S < 0 or S > min(phi.shape):
        raise ValueError(f"sparsity {S} outside [0, min(d, K)]")


def _least_squares(sub, y):
    """Pseudo-inverse solution with singular values below ``1e-10 * smax`` cut.

    Returns the coefficients and whether ``sub`` had full column rank.
    """
    if sub.shape[1] == 0:
        return np.zeros(0), True
    u, s, vt = np.linalg.svd(sub, full_matrices=False)
    keep = s > PINV_RTOL * s[0]
    z = vt[keep].T @ ((u[:, keep].T @ y) / s[keep])
    return z, bool(np.all(keep))


def thresholding(phi, y, S: int, sensing=None) -> RecoveryResult:
    """Keep the ``S`` atoms with largest ``|<psi_k, y>|`` and project ``y`` onto them.

    Ties go to the lowest index. Without ``sensing``, ``psi = phi``.
    """
    m = as_matrix(phi)
    y = np.asarray(y, dtype=float).ravel()
    _check_sparsity(S, m)
    psi = m if sensing is None else as_matrix(sensing)
    if sensing is not None:
        _check_sensing(psi, m)
    corr = np.abs(psi.T @ y)
    J = np.sort(np.argsort(-corr, kind="stable")[:S])
    z, full = _least_squares(m[:, J], y)
    x = np.zeros(m.shape[1])
    x[J] = z
    return RecoveryResult(Support.from_zero_based(J), x, 1, full)


def omp(phi, y, S: int, sensing=None, trace: Optional[list] = None) -> RecoveryResult:
    """Orthogonal Matching Pursuit for exactly ``S`` steps.

    Atom selection uses ``sensing`` when given; the residual is always the
    projection of ``y`` off the span of the selected original atoms. If
    ``trace`` is a list, the residual after each step is appended to it.
    """
    m = as_matrix(phi)
    y = np.asarray(y, dtype=float).ravel()
    _check_sparsity(S, m)
    psi = m if sensing is None else as_matrix(sensing)
    if sensing is not None:
        _check_sensing(psi, m)
    K = m.shape[1]
    chosen = np.zeros(K, dtype=bool)
    J = []
    Q = np.zeros((m.shape[0], S))
    r = y.copy()
    full = True
    for i in range(S):
        corr = np.abs(psi.T @ r)
        corr[chosen] = -1.0
        j = int(np.argmax(corr))
        chosen[j] = True
        J.append(j)
        # modified Gram-Schmidt, twice for stability
        q = m[:, j].copy()
        for _ in range(2):
            q -= Q[:, :i] @ (Q[:, :i].T @ q)
        nq = np.linalg.norm(q)
        if nq <= PINV_RTOL * np.linalg.norm(m[:, j]):
            full = False
            Q[:, i] = 0.0
        else:
            Q[:, i] = q / nq
            r = r - Q[:, i] * (Q[:, i] @ r)
        if trace is not None:
            trace.append(r.copy())
    Js = np.sort(np.asarray(J, dtype=np.intp))
    z, ls_full = _least_squares(m[:, Js], y)
    x = np.zeros(K)
    x[Js] = z
    return RecoveryResult(Support.from_zero_based(Js), x, S, full and ls_full)


def basis_pursuit(a, y, opts: BPOptions = BPOptions()) -> RecoveryResult:
    """``min ||x||_1 s.t. a x = y``; support is ``|x_i| > opts.support_tol``."""
    sol = basis_pursuit_lp(as_matrix(a), y, feas_tol=opts.feas_tol, gap_tol=opts.gap_tol,
                           max_iter=opts.max_iter)
    J = np.flatnonzero(np.abs(sol.x) > opts.support_tol)
    return RecoveryResult(Support.from_zero_based(J), sol.x, sol.iterations, sol.converged)


def bp_preconditioned(phi, model: SupportModel, y, opts: BPOptions = BPOptions(),
                      ridge: float = 0.0, precond=None) -> RecoveryResult:
    """BP on the preconditioned system ``T y = Psi z``, mapped back by ``x = D^1/2 z``.

    ``precond`` may be passed to reuse a :class:`~nusl.sensing.Preconditioner`.
    """
    m = as_matrix(phi)
    y = np.asarray(y, dtype=float).ravel()
    pc = precond if precond is not None else preconditioner(m, model, ridge)
    sol = basis_pursuit_lp(pc.psi.entries, pc.transform @ y, feas_tol=opts.feas_tol,
                           gap_tol=opts.gap_tol, max_iter=opts.max_iter)
    x = np.sqrt(pc.psi.normalization) * sol.x
    residual = np.linalg.norm(m @ x - y)
    if residual > opts.feas_tol:
        # map-back rounding through T^-1; re-project on the detected support
        J = np.flatnonzero(np.abs(x) > opts.support_tol)
        z, _ = _least_squares(m[:, J], y)
        xr = np.zeros_like(x)
        xr[J] = z
        if np.linalg.norm(m @ xr - y) < residual:
            x = xr
            residual = np.linalg.norm(m @ x - y)
    J = np.flatnonzero(np.abs(x) > opts.support_tol)
    return RecoveryResult(Support.from_zero_based(J), x, sol.iterations,
                          sol.converged and residual <= opts.feas_tol)


def judge_recovery(result: RecoveryResult, truth: SignalInstance,
                   coeff_tol: float = COEFF_TOL) -> Verdict:
    x_true = truth.coefficients(result.coefficients.size)
    err = float(np.max(np.abs(result.coefficients - x_true), initial=0.0))
    return Verdict(result.support_found == truth.support, err <= coeff_tol, err)


def with_verdict(result: RecoveryResult, truth: SignalInstance,
                 coeff_tol: float = COEFF_TOL) -> RecoveryResult:
    v = judge_recovery(result, truth, coeff_tol)
    return replace(result, support_exact=v.support_exact, coeff_max_err=v.coeff_max_err)


def fuchs_dual_norm(phi, support: Support, signs) -> float:
    """``||Phi_{I^c}* Phi_I (Phi_I* Phi_I)^-1 sigma_I||_inf``; below one, BP
    recovers every signal with this support and sign pattern exactly."""
    m = as_matrix(phi)
    I = support.zero_based
    rest = np.setdiff1d(np.arange(m.shape[1]), I)
    sub = m[:, I]
    v = np.linalg.solve(sub.T @ sub, np.asarray(signs, dtype=float))
    return float(np.max(np.abs(m[:, rest].T @ (sub @ v)), initial=0.0))
