"""Basis pursuit, ``min ||x||_1 s.t. A x = y``, by a primal-dual interior-point method.

The problem is solved as the standard-form linear program

    min 1^T u   s.t.  [A, -A] u = y,  u >= 0,        x = u[:K] - u[K:]

with Mehrotra's predictor-corrector. Its dual is ``max y^T lam`` subject to
``||A^T lam||_inf <= 1``, which gives a cheap optimality certificate: after
scaling ``lam`` into the dual-feasible set, ``||x||_1 - y^T lam`` bounds the
suboptimality of ``x``.

Once the interior-point iterate is accurate, it is "polished": the least
squares solution on the detected support replaces it whenever that is
feasible and no worse in objective. This snaps the interior iterate to the
nearby vertex, so exactly recovered coefficients come back to rounding
accuracy instead of interior-point accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

FEAS_TOL = 1e-9
GAP_TOL = 1e-8
MAX_ITER = 200
RANK_RTOL = 1e-10


class InfeasibleError(ValueError):
    """``y`` is not in the column span of ``A``."""


@dataclass
class BPSolution:
    x: np.ndarray
    iterations: int
    converged: bool
    gap: float
    residual: float
    dual: np.ndarray
    polished: bool


def _row_basis(a, y):
    """Drop redundant rows: returns ``(A', y')`` with ``A'`` of full row rank
    and the same feasible set, or raises if ``y`` is outside the span."""
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    tol = RANK_RTOL * (s[0] if s.size else 0.0)
    r = int(np.count_nonzero(s > tol))
    coef = u.T @ y
    lost = np.linalg.norm(coef[r:]) if r < coef.size else 0.0
    resid_out = np.linalg.norm(y - u @ coef)
    if np.hypot(lost, resid_out) > FEAS_TOL * max(1.0, np.linalg.norm(y)):
        raise InfeasibleError("y is not in the column span of A")
    return s[:r, None] * vt[:r], coef[:r], u[:, :r]


def _solve_normal(a, dsum, rhs):
    m = (a * dsum) @ a.T
    try:
        c = sla.cho_factor(m, lower=False, check_finite=False)
        return sla.cho_solve(c, rhs, check_finite=False)
    except (np.linalg.LinAlgError, sla.LinAlgError):
        pass
    # rank-revealing QR copes with the badly scaled systems of late iterations
    try:
        return sla.lstsq(m, rhs, lapack_driver="gelsy", check_finite=True)[0]
    except (ValueError, np.linalg.LinAlgError, sla.LinAlgError):
        return np.full_like(rhs, np.nan)


def _certificate(a, y, x, lam):
    """Duality gap of ``x`` against ``lam`` scaled into the dual-feasible set."""
    if lam.size == 0:
        return float(np.abs(x).sum()), lam
    peak = np.max(np.abs(a.T @ lam), initial=0.0)
    lam_f = lam / max(1.0, peak)
    return float(np.abs(x).sum() - y @ lam_f), lam_f


def _polish(a, y, x, gap_tol, support_rtol=1e-7):
    scale = np.max(np.abs(x), initial=0.0)
    if scale == 0.0:
        return None
    J = np.flatnonzero(np.abs(x) > support_rtol * scale)
    if J.size == 0 or J.size > a.shape[0]:
        return None
    sub = a[:, J]
    z, _, rank, sv = np.linalg.lstsq(sub, y, rcond=None)
    if rank < J.size:
        return None
    xp = np.zeros_like(x)
    xp[J] = z
    if np.linalg.norm(a @ xp - y) > FEAS_TOL:
        return None
    if np.abs(xp).sum() > np.abs(x).sum() + gap_tol:
        return None
    return xp


def basis_pursuit_lp(a, y, feas_tol=FEAS_TOL, gap_tol=GAP_TOL, max_iter=MAX_ITER,
                     polish=True) -> BPSolution:
    """Solve ``min ||x||_1 s.t. a x = y``; see the module docstring."""
    a = np.asarray(a, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    d, K = a.shape
    if y.size != d:
        raise ValueError(f"y has length {y.size}, expected {d}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite input")
    if not np.any(y):
        return BPSolution(np.zeros(K), 0, True, 0.0, 0.0, np.zeros(d), False)
    # the problem is positively homogeneous in y: solve for y/||y|| and scale back,
    # so the interior-point tolerances act relative to the size of the signal
    y_orig = y
    scale = float(np.linalg.norm(y))
    y = y / scale

    # work with a full-row-rank system; `back` maps reduced duals to original ones
    a_full, y_full = a, y
    back = None
    x0 = None
    try:
        fac = sla.cho_factor(a @ a.T, check_finite=False)
        diag = np.abs(np.diag(fac[0]))
        if (diag.min() / diag.max()) ** 2 < RANK_RTOL:
            raise np.linalg.LinAlgError
        x0 = a.T @ sla.cho_solve(fac, y, check_finite=False)
    except (np.linalg.LinAlgError, sla.LinAlgError):
        a, y, back = _row_basis(a, y)
    else:
        if np.linalg.norm(a @ x0 - y) > feas_tol * max(1.0, np.linalg.norm(y)):
            a, y, back = _row_basis(a, y)
            x0 = None
    m = a.shape[0]
    n = 2 * K

    def B(u):
        return a @ (u[:K] - u[K:])

    def Bt(v):
        t = a.T @ v
        return np.concatenate([t, -t])

    # Mehrotra starting point
    if x0 is None:
        x0 = a.T @ np.linalg.solve(a @ a.T, y)
    u = np.concatenate([np.maximum(x0, 0.0), np.maximum(-x0, 0.0)])
    lam = np.zeros(m)
    s = np.ones(n) - Bt(lam)
    du = max(-1.5 * u.min(), 0.0)
    ds = max(-1.5 * s.min(), 0.0)
    u = u + du
    s = s + ds
    corr = 0.5 * (u @ s)
    u = u + corr / s.sum()
    s = s + corr / u.sum()

    it = 0
    best = None
    for it in range(1, max_iter + 1):
        rb = B(u) - y
        rc = Bt(lam) + s - 1.0
        mu = (u @ s) / n
        pobj = u.sum()
        rbn = np.linalg.norm(rb)
        if rbn <= feas_tol:
            # late iterations can lose accuracy on ill-conditioned systems;
            # remember the best certified iterate seen so far
            x = u[:K] - u[K:]
            gap, _ = _certificate(a, y, x, lam)
            if best is None or gap < best[2]:
                best = (x, lam.copy(), gap)
            if gap <= 0.1 * gap_tol * (1.0 + np.abs(x).sum()):
                break
        if (rbn <= 0.1 * feas_tol and np.linalg.norm(rc) <= 1e-9 * np.sqrt(n)
                and u @ s <= 1e-2 * gap_tol * (1.0 + pobj)):
            break
        dinv = u / s
        dsum = dinv[:K] + dinv[K:]

        def direction(rxs):
            # B D B^T dlam = -rb + B S^-1 rxs - B D rc
            t = rxs / s - dinv * rc
            rhs = -rb + a @ (t[:K] - t[K:])
            dlam = _solve_normal(a, dsum, rhs)
            dsv = -rc - Bt(dlam)
            duv = -(rxs + u * dsv) / s
            return duv, dlam, dsv

        du_a, dl_a, ds_a = direction(u * s)
        if not (np.all(np.isfinite(du_a)) and np.all(np.isfinite(dl_a))):
            break
        ap = _max_step(u, du_a)
        ad = _max_step(s, ds_a)
        mu_aff = ((u + ap * du_a) @ (s + ad * ds_a)) / n
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
        du_c, dl_c, ds_c = direction(u * s + du_a * ds_a - sigma * mu)
        if not (np.all(np.isfinite(du_c)) and np.all(np.isfinite(dl_c))):
            break
        eta = max(0.9, 1.0 - 10.0 * mu)
        ap = min(1.0, eta * _max_step(u, du_c))
        ad = min(1.0, eta * _max_step(s, ds_c))
        u = u + ap * du_c
        lam = lam + ad * dl_c
        s = s + ad * ds_c
        # keep u / s bounded: floor both at a tiny fraction of sqrt(mu)
        floor = 1e-14 * np.sqrt(max((u @ s) / n, 1e-300))
        u = np.maximum(u, floor)
        s = np.maximum(s, floor)
        if max(ap, ad) < 1e-12:
            break

    x = u[:K] - u[K:]
    if np.linalg.norm(B(u) - y) <= feas_tol:
        gap, _ = _certificate(a, y, x, lam)
        if best is None or gap <= best[2]:
            best = (x, lam, gap)
    if best is not None:
        x, lam = best[0], best[1]
    a, y = a_full, y_full
    lam_full = lam if back is None else back @ lam
    gap, lam_f = _certificate(a, y, x, lam_full)
    polished = False
    if polish:
        xp = _polish(a, y, x, gap_tol * (1.0 + np.abs(x).sum()))
        if xp is not None:
            x, polished = xp, True
            gap, lam_f = _certificate(a, y, x, lam_full)
    x = x * scale
    gap *= scale
    residual = float(np.linalg.norm(a @ x - y_orig))
    ok = (residual <= feas_tol * max(1.0, scale)
          and gap <= gap_tol * (1.0 + np.abs(x).sum()))
    return BPSolution(x, it, bool(ok), float(gap), residual, lam_f, polished)


def _max_step(v, dv):
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, np.min(-v[neg] / dv[neg])))
