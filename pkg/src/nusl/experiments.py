"""Generators and Monte-Carlo harnesses.

Recovery sweeps draw one batch of signals per support size and run every
(algorithm, sensing mode) pair on the same signals, so differences between
sensing modes are not blurred by independent sampling noise. Trial ``t``
of support size ``S`` always uses ``stream(master_seed, t, "signal/S")``,
which makes the output independent of how cells are spread over workers.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.fft import dct

from . import bounds as B
from .algorithms import (BPOptions, basis_pursuit, bp_preconditioned, judge_recovery, omp,
                         thresholding)
from .gram import (RestrictedRowNorm, SubmatrixOpNorm, cross_gram, gram_quantities,
                   hollow_gram)
from .io import read_matrix
from .model import Dictionary, ModelError, SignalInstance, SupportModel, make_signal, \
    validate_dictionary
from .rng import rademacher, stream
from .sampling import rejective_sample
from .sensing import SensingError, greedy_sensing, preconditioner, uniform_model

ALGORITHMS = ("thresholding", "omp", "bp")
SENSING_MODES = ("none", "uniform", "matched")
DISTRIBUTIONS = ("uniform", "linear", "quadratic", "step")
DCT_RETRIES = 10
SWEEP_HEADER = ["algorithm", "sensing_mode", "S", "n_trials", "support_rate", "coeff_rate",
                "mean_runtime_ms"]


# -- dictionaries ------------------------------------------------------------

def gen_gaussian_dictionary(d: int, K: int, seed: int) -> Dictionary:
    """Columns drawn uniformly from the unit sphere in ``R^d``."""
    if d < 1 or K < 1:
        raise ModelError("d and K must be positive")
    g = stream(seed, 0, "gaussian-dictionary").standard_normal((d, K))
    return validate_dictionary(g / np.linalg.norm(g, axis=0))


def dct_matrix(K: int) -> np.ndarray:
    """Orthonormal DCT-II matrix; row ``k`` is frequency ``k``."""
    return dct(np.eye(K), type=2, norm="ortho", axis=0)


def gen_subsampled_dct_dictionary(d: int, K: int, seed: int) -> Dictionary:
    """``d`` random rows of the ``K x K`` DCT-II matrix, columns renormalized."""
    if not 1 <= d <= K:
        raise ModelError("need 1 <= d <= K")
    C = dct_matrix(K)
    for attempt in range(DCT_RETRIES + 1):
        rows = np.sort(stream(seed + attempt, 0, "dct-rows").choice(K, d, replace=False))
        sub = C[rows]
        norms = np.linalg.norm(sub, axis=0)
        if np.any(norms < 1e-12):
            continue
        sub = sub / norms
        g = np.abs(sub.T @ sub)
        np.fill_diagonal(g, 0.0)
        if np.max(g, initial=0.0) < 1.0 - 1e-12:
            return validate_dictionary(sub)
    raise ModelError("subsampled DCT kept producing degenerate columns")


@dataclass(frozen=True)
class DictionarySpec:
    kind: str = "gaussian"
    d: int = 128
    K: int = 256
    seed: int = 0
    path: Optional[str] = None

    def build(self) -> Dictionary:
        if self.kind == "gaussian":
            return gen_gaussian_dictionary(self.d, self.K, self.seed)
        if self.kind == "subsampled_dct":
            return gen_subsampled_dct_dictionary(self.d, self.K, self.seed)
        if self.kind == "file":
            if not self.path:
                raise ModelError("file dictionary needs a path")
            return validate_dictionary(read_matrix(self.path))
        raise ModelError(f"unknown dictionary kind {self.kind!r}")


# -- distributions -----------------------------------------------------------

@dataclass(frozen=True)
class DistributionFamily:
    kind: str
    K: int
    S: int
    step_ratio: float = 10.0

    def raw_weights(self) -> np.ndarray:
        i = np.arange(1, self.K + 1, dtype=float)
        if self.kind == "uniform":
            return np.ones(self.K)
        if self.kind == "linear":
            return self.K - i + 1
        if self.kind == "quadratic":
            return (self.K - i + 1) ** 2
        if self.kind == "step":
            if self.step_ratio <= 1:
                raise ModelError("step_ratio must exceed 1")
            return np.where(i <= self.K / 2, self.step_ratio, 1.0)
        raise ModelError(f"unknown distribution {self.kind!r}")


def water_fill(w, S: int) -> np.ndarray:
    """Scale nonnegative weights to sum ``S`` with every entry capped at one.

    Entries that would exceed one are fixed at one and the remaining mass is
    spread over the rest in proportion to their weights, repeating until
    nothing new clips.
    """
    w = np.asarray(w, dtype=float)
    if np.count_nonzero(w > 0) < S:
        raise ModelError(f"S={S} exceeds the number of positive weights")
    p = np.zeros_like(w)
    clipped = np.zeros(w.size, dtype=bool)
    for _ in range(w.size + 1):
        free = ~clipped
        p[clipped] = 1.0
        p[free] = w[free] * (S - clipped.sum()) / w[free].sum()
        over = free & (p > 1.0)
        if not over.any():
            break
        clipped |= over
    p = np.minimum(p, 1.0)
    return p


def gen_distribution(family: DistributionFamily) -> SupportModel:
    if family.S > family.K:
        raise ModelError("S exceeds K")
    p = water_fill(family.raw_weights(), family.S)
    return SupportModel(p, family.S)


# -- signals -----------------------------------------------------------------

@dataclass(frozen=True)
class CoeffSpec:
    kind: str = "unit"
    alpha: float = 0.9

    def magnitudes(self, S: int) -> np.ndarray:
        if self.kind == "unit":
            return np.ones(S)
        if self.kind == "geometric":
            return self.alpha ** np.arange(1, S + 1)
        raise ModelError(f"unknown coefficient kind {self.kind!r}")


def gen_signal(phi, model: SupportModel, coeff: CoeffSpec, rng) -> SignalInstance:
    """Rejective support, magnitudes by increasing atom index, Rademacher signs."""
    support = rejective_sample(model, rng)
    return make_signal(phi, support, coeff.magnitudes(model.S), rademacher(rng, model.S))


# -- recovery sweep ----------------------------------------------------------

@dataclass(frozen=True)
class SweepConfig:
    dictionary: DictionarySpec = DictionarySpec()
    distribution: str = "quadratic"
    step_ratio: float = 10.0
    S_range: tuple = tuple(range(1, 81, 4))
    n_trials: int = 200
    algorithms: tuple = ALGORITHMS
    sensing_modes: tuple = SENSING_MODES
    coefficients: CoeffSpec = CoeffSpec()
    master_seed: int = 0
    timing: bool = False
    coeff_tol: float = 1e-4
    support_tol: float = 1e-6

    def validate(self, d: int, K: int):
        if self.n_trials < 1:
            raise ModelError("n_trials must be at least 1")
        if not self.S_range:
            raise ModelError("S_range is empty")
        if min(self.S_range) < 1 or max(self.S_range) > min(d, K):
            raise ModelError(f"S_range must lie in [1, {min(d, K)}]")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ModelError(f"unknown algorithm {a!r}")
        for s in self.sensing_modes:
            if s not in SENSING_MODES:
                raise ModelError(f"unknown sensing mode {s!r}")
        if self.distribution not in DISTRIBUTIONS:
            raise ModelError(f"unknown distribution {self.distribution!r}")


@dataclass(frozen=True)
class SweepRow:
    algorithm: str
    sensing_mode: str
    S: int
    n_trials: int
    support_rate: float
    coeff_rate: float
    mean_runtime: Optional[float] = None
    failed: bool = False


@dataclass
class SweepResult:
    rows: list = field(default_factory=list)
    coherence: float = float("nan")

    @property
    def failed_cells(self):
        return [r for r in self.rows if r.failed]

    def rate(self, algorithm, mode):
        """``{S: support_rate}`` for one (algorithm, sensing mode) pair."""
        return {r.S: r.support_rate for r in self.rows
                if r.algorithm == algorithm and r.sensing_mode == mode and not r.failed}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for r in self.rows:
            rate = "" if r.failed else repr(r.support_rate)
            crate = "" if r.failed else repr(r.coeff_rate)
            rt = "" if r.mean_runtime is None else f"{r.mean_runtime:.4f}"
            w.writerow([r.algorithm, r.sensing_mode, r.S, r.n_trials, rate, crate, rt])
        return buf.getvalue()


def _solvers(phi, model, modes, algorithms, opts):
    """Build one callable per (algorithm, mode); failures are recorded."""
    K, S = phi.K, model.S
    unif = uniform_model(K, S)
    out, failed = {}, set()
    for mode in modes:
        target = {"none": None, "uniform": unif, "matched": model}[mode]
        for alg in algorithms:
            try:
                if alg in ("thresholding", "omp"):
                    psi = None if target is None else greedy_sensing(phi, target)
                    fn = thresholding if alg == "thresholding" else omp
                    out[alg, mode] = (lambda y, fn=fn, psi=psi: fn(phi, y, S, sensing=psi))
                elif target is None:
                    out[alg, mode] = lambda y: basis_pursuit(phi, y, opts)
                else:
                    pc = preconditioner(phi, target)
                    out[alg, mode] = (lambda y, pc=pc, t=target:
                                      bp_preconditioned(phi, t, y, opts, precond=pc))
            except (SensingError, ModelError, np.linalg.LinAlgError):
                failed.add((alg, mode))
    return out, failed


def run_cell(config: SweepConfig, S: int, phi: Optional[Dictionary] = None) -> list:
    """All (algorithm, sensing mode) rows for one support size."""
    phi = phi if phi is not None else config.dictionary.build()
    model = gen_distribution(DistributionFamily(config.distribution, phi.K, S, config.step_ratio))
    opts = BPOptions(support_tol=config.support_tol)
    solvers, failed = _solvers(phi, model, config.sensing_modes, config.algorithms, opts)
    pairs = [(a, m) for a in config.algorithms for m in config.sensing_modes]
    sup = {k: 0 for k in pairs}
    coef = {k: 0 for k in pairs}
    spent = {k: 0.0 for k in pairs}
    for t in range(config.n_trials):
        sig = gen_signal(phi, model, config.coefficients, stream(config.master_seed, t, f"signal/S={S}"))
        for key, fn in solvers.items():
            t0 = time.perf_counter()
            res = fn(sig.y)
            spent[key] += time.perf_counter() - t0
            v = judge_recovery(res, sig, config.coeff_tol)
            sup[key] += v.support_exact
            coef[key] += v.coeff_exact
    n = config.n_trials
    rows = []
    for key in pairs:
        alg, mode = key
        if key in failed:
            rows.append(SweepRow(alg, mode, S, n, math.nan, math.nan, None, failed=True))
            continue
        rt = 1e3 * spent[key] / n if config.timing else None
        rows.append(SweepRow(alg, mode, S, n, sup[key] / n, coef[key] / n, rt))
    return rows


def _cell_worker(args):
    config, S = args
    return run_cell(config, S)


def recovery_sweep(config: SweepConfig, jobs: int = 1) -> SweepResult:
    """Support and coefficient recovery rates over the configured support sizes.

    ``jobs > 1`` spreads support sizes over worker processes; the output is
    identical to the serial run.
    """
    phi = config.dictionary.build()
    config.validate(phi.d, phi.K)
    S_values = list(config.S_range)
    if jobs <= 1:
        cells = [run_cell(config, S, phi) for S in S_values]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(_cell_worker, [(config, S) for S in S_values]))
    mu = float(np.max(np.abs(np.asarray(hollow_gram(phi)))))
    return SweepResult([r for cell in cells for r in cell], coherence=mu)


# -- tail experiments --------------------------------------------------------

STATISTICS = ("submatrix_op_norm", "restricted_row_norm", "cross_op_norm")
TAIL_HEADER = ["r", "empirical", "bound", "floor_ok"]


@dataclass(frozen=True)
class TailRow:
    r: float
    empirical: float
    bound: float
    floor_ok: bool


@dataclass
class TailResult:
    rows: list
    n_trials: int
    floor: float
    quantities: object

    @property
    def nonvacuous_exercised(self) -> bool:
        return any(r.floor_ok and r.bound < 1.0 for r in self.rows)

    def violations(self, sigmas=3.0):
        """Grid points above the floor where the empirical tail exceeds the
        clipped bound by more than the Monte-Carlo slack."""
        bad = []
        for r in self.rows:
            if not r.floor_ok:
                continue
            b = B.clip_probability(r.bound)
            if r.empirical > b + B.mc_slack(b, self.n_trials, sigmas):
                bad.append(r)
        return bad

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TAIL_HEADER)
        for r in self.rows:
            w.writerow([repr(r.r), repr(r.empirical), "" if math.isnan(r.bound) else repr(r.bound),
                        int(r.floor_ok)])
        return buf.getvalue()


def _tail_setup(phi, model, kind):
    if kind == "submatrix_op_norm":
        H = hollow_gram(phi)
        q = gram_quantities(H, model)
        return SubmatrixOpNorm(H), q, B.validity_floor(q), lambda r: B.theorem1_bound(q, r, symmetric=True)
    if kind == "cross_op_norm":
        psi = greedy_sensing(phi, model)
        H = cross_gram(psi, phi)
        q = gram_quantities(H, model)
        return SubmatrixOpNorm(H), q, B.validity_floor(q), lambda r: B.corollary2_bound(q, r)
    if kind == "restricted_row_norm":
        H = hollow_gram(phi)
        q = gram_quantities(H, model)
        return RestrictedRowNorm(H), q, 0.0, lambda v: B.lemma1_bound(q, v)
    raise ModelError(f"unknown statistic {kind!r}")


def auto_grid(bound, floor, n_points=40, target=0.5, r_cap=1e6):
    """Grid from just above zero to the first ``r`` (doubling search) where
    ``bound(r) < target``; points below ``floor`` are kept for context."""
    r = max(floor, 1e-3)
    while bound(r) >= target and r < r_cap:
        r *= 2.0
    lo, hi = r / 2.0, r
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if mid >= floor and bound(mid) < target:
            hi = mid
        else:
            lo = mid
    return np.unique(np.concatenate([np.linspace(hi / n_points, hi, n_points), [floor]]))


def tail_experiment(phi, model: SupportModel, kind: str, r_grid=None, n_trials: int = 100_000,
                    seed: int = 0) -> TailResult:
    """Empirical survival of a submatrix statistic next to its tail bound."""
    stat, q, floor, bound = _tail_setup(phi, model, kind)
    grid = auto_grid(bound, floor) if r_grid is None else np.asarray(r_grid, dtype=float)
    emp = B.empirical_tail(stat, model, grid, n_trials, seed, domain=f"tail/{kind}")
    rows = []
    for r, e in zip(grid, emp):
        ok = bool(r >= floor and r > 0)
        rows.append(TailRow(float(r), float(e), bound(r) if ok else math.nan, ok))
    return TailResult(rows, n_trials, floor, q)
