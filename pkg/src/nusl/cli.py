"""Command-line entry point: ``nusl <subcommand> [options]``.

Exit codes: 0 success, 1 usage or input error, 2 runtime failure (including
a failed sweep cell or a violated verification).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .algorithms import BPOptions, basis_pursuit, bp_preconditioned, omp, thresholding
from .config import ConfigError, canonical, config_hash, load_toml, sweep_config, tail_config
from .experiments import (DISTRIBUTIONS, STATISTICS, DistributionFamily, gen_distribution,
                          recovery_sweep, tail_experiment)
from .gram import cross_gram, gram_quantities, hollow_gram
from .io import FormatError, atomic_write, csv_text, read_matrix, read_vector, write_json, \
    write_matrix
from .model import ModelError, build_support_model, validate_dictionary
from .sampling import (CardinalityAtLeast, poisson_masks, random_monotone_indicator,
                       rejective_indices, verify_conditional_monotonicity,
                       verify_median_property, verify_poissonisation)
from .rng import stream
from .sensing import greedy_sensing, preconditioner

INPUT_ERRORS = (ConfigError, FormatError, ModelError, FileNotFoundError, IsADirectoryError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


# -- shared helpers ----------------------------------------------------------

def _out_dir(args):
    out = args.out or os.environ.get("NUSL_OUT_DIR")
    return Path(out) if out else None


def _emit(args, name, text):
    """Write ``text`` to ``<out>/name`` when an output directory is set,
    otherwise to stdout."""
    out = _out_dir(args)
    if out is None:
        sys.stdout.write(text)
    else:
        atomic_write(out / name, text)


def _manifest(args, command, started, cfg=None, summary=None):
    out = _out_dir(args)
    if out is None:
        return
    resolved = canonical(cfg) if cfg is not None else _arg_config(args)
    write_json(out / "manifest.json", {
        "command": command,
        "config": resolved,
        "config_hash": config_hash(cfg) if cfg is not None else _hash_dict(resolved),
        "master_seed": cfg.master_seed if cfg is not None else _seed(args),
        "version": __version__,
        "started": started,
        "finished": _now(),
        "summary": summary or {},
    })


def _arg_config(args):
    skip = {"func", "out", "jobs", "config", "_cfg"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _hash_dict(d):
    return hashlib.sha256(json.dumps(d, sort_keys=True, separators=(",", ":"),
                                     default=str).encode()).hexdigest()


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _seed(args):
    return 0 if args.seed is None else args.seed


def _model(args, K=None):
    """Support model from ``--probs`` or from ``--dist``/``--s``."""
    if getattr(args, "probs", None):
        model = build_support_model(read_vector(args.probs))
        if K is not None and model.K != K:
            raise ModelError(f"probability vector has {model.K} entries, dictionary has {K} atoms")
        return model
    K = K if K is not None else args.k
    if K is None or args.s is None:
        raise UsageError("give --probs, or --dist with --s (and --k when there is no dictionary)")
    return gen_distribution(DistributionFamily(args.dist, K, args.s, args.step_ratio))


def _table(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"cannot parse number list {text!r}") from None


# -- subcommands -------------------------------------------------------------

def cmd_sample(args):
    model = _model(args)
    seed = _seed(args)
    lines = []
    if args.model == "rejective":
        idx = rejective_indices(model, args.n, seed)
        for t, row in enumerate(idx):
            lines.append([t, *(int(i) + 1 for i in row)])
    else:
        for t, mask in enumerate(poisson_masks(model, args.n, seed)):
            lines.append([t, *(int(i) + 1 for i in np.flatnonzero(mask))])
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(lines)
    _emit(args, "samples.csv", buf.getvalue())
    return 0, {"n": args.n, "K": model.K, "S": model.S}


def cmd_verify_sampling(args):
    model = _model(args)
    rng = stream(_seed(args), 0, "verify-sampling")
    rows, ok = [], True
    indicators = [("cardinality>=S", CardinalityAtLeast(model.S))]
    indicators += [(f"random_upset[{i}]", random_monotone_indicator(model.K, rng))
                   for i in range(args.n_indicators)]
    for name, f in indicators:
        rep = verify_poissonisation(model, f)
        chain = verify_conditional_monotonicity(model, f)
        rows.append([f"poissonisation:{name}", repr(rep.lhs), repr(rep.rhs), rep.holds])
        rows.append([f"conditional_monotone:{name}", "", "", chain])
        ok &= rep.holds and chain
    med = verify_median_property(model)
    rows.append(["median", repr(med.tail), "0.5", med.holds])
    ok &= med.holds
    _emit(args, "verify_sampling.csv", _table(["property", "lhs", "rhs", "holds"], rows))
    return (0 if ok else 2), {"all_hold": bool(ok), "checks": len(rows)}


def _load_dict(path):
    return validate_dictionary(read_matrix(path))


def cmd_gram_report(args):
    phi = _load_dict(args.dict)
    model = _model(args, phi.K)
    if args.sensing:
        h = cross_gram(read_matrix(args.sensing), phi)
    else:
        h = hollow_gram(phi)
    q = gram_quantities(h, model)
    row = q.as_row()
    cells = [repr(float(v)) if k != "K" else v for k, v in row.items()]
    _emit(args, "gram_report.csv", _table(list(row), [cells]))
    return 0, {"mu": q.mu, "hw_inf2": q.hw_inf2, "wh_21": q.wh_21, "whw_op": q.whw_op}


def cmd_bounds(args):
    phi = _load_dict(args.dict)
    model = _model(args, phi.K)
    grid = None if args.r == "auto" else _floats(args.r)
    res = tail_experiment(phi, model, "submatrix_op_norm", grid, args.n_trials, _seed(args))
    bad = {id(r) for r in res.violations()}
    rows = []
    for r in res.rows:
        holds = "" if not r.floor_ok else id(r) not in bad
        rows.append([repr(r.r), "" if not r.floor_ok else repr(r.bound), repr(r.empirical), holds])
    _emit(args, "bounds.csv", _table(["r", "bound", "empirical_tail", "holds"], rows))
    return (2 if bad else 0), {"floor": res.floor, "violations": len(bad),
                               "nonvacuous_exercised": res.nonvacuous_exercised}


def cmd_sensing(args):
    phi = _load_dict(args.dict)
    model = _model(args, phi.K)
    ext = ".bin" if args.format == "binary" else ".csv"
    if args.kind == "greedy":
        psi = greedy_sensing(phi, model, args.ridge)
        outputs = {"psi" + ext: psi.entries}
    else:
        pc = preconditioner(phi, model, args.ridge)
        outputs = {"psi" + ext: pc.psi.entries, "transform" + ext: pc.transform}
    out = _out_dir(args)
    if out is None:
        if args.kind != "greedy":
            raise UsageError("the precondition kind writes two matrices; give --out")
        sys.stdout.write(csv_text(outputs["psi" + ext]))
    else:
        for name, m in outputs.items():
            write_matrix(out / name, m)
    return 0, {"kind": args.kind, "files": sorted(outputs)}


def cmd_solve(args):
    phi = _load_dict(args.dict)
    sig = read_matrix(args.signal)
    if sig.shape[1] == phi.d:
        signals = sig
    elif sig.shape == (phi.d, 1):
        signals = sig.T
    else:
        raise FormatError(f"signal shape {sig.shape} does not fit a dictionary with d={phi.d}")
    opts = BPOptions()
    needs_model = args.algo == "bp-precond" or args.sensing == "auto"
    model = _model(args, phi.K) if needs_model else None
    psi = None
    if args.sensing == "auto":
        psi = greedy_sensing(phi, model).entries
    elif args.sensing:
        psi = read_matrix(args.sensing)
    if psi is not None and args.algo not in ("thresholding", "omp"):
        raise UsageError("--sensing applies to thresholding and omp only")
    if args.algo in ("thresholding", "omp") and args.sparsity is None:
        raise UsageError(f"--sparsity is required for {args.algo}")
    pc = preconditioner(phi, model) if args.algo == "bp-precond" else None
    lines, unconverged = [], 0
    for y in signals:
        if args.algo == "thresholding":
            res = thresholding(phi, y, args.sparsity, sensing=psi)
        elif args.algo == "omp":
            res = omp(phi, y, args.sparsity, sensing=psi)
        elif args.algo == "bp":
            res = basis_pursuit(phi, y, opts)
        else:
            res = bp_preconditioned(phi, model, y, opts, precond=pc)
        unconverged += not res.converged
        lines.append(json.dumps(res.to_json(), sort_keys=True))
    _emit(args, "solve.jsonl", "\n".join(lines) + "\n")
    return 0, {"signals": len(lines), "unconverged": unconverged}


def _sweep_cfg(args):
    raw = load_toml(args.config) if args.config else {}
    cfg = sweep_config(raw, args.seed)
    if args.n_trials is not None:
        cfg = replace(cfg, n_trials=args.n_trials)
    if args.timing:
        cfg = replace(cfg, timing=True)
    return cfg


def cmd_sweep(args):
    cfg = _sweep_cfg(args)
    args._cfg = cfg
    res = recovery_sweep(cfg, jobs=args.jobs)
    _emit(args, "sweep.csv", res.to_csv())
    failed = [f"{r.algorithm}/{r.sensing_mode}/S={r.S}" for r in res.failed_cells]
    for f in failed:
        print(f"failed cell: {f}", file=sys.stderr)
    return (2 if failed else 0), {"rows": len(res.rows), "failed_cells": failed,
                                  "coherence": res.coherence}


def cmd_tails(args):
    raw = load_toml(args.config) if args.config else {}
    cfg = tail_config(raw, args.seed)
    over = {k: v for k, v in (("statistic", args.statistic), ("S", args.s),
                              ("n_trials", args.n_trials), ("distribution", args.dist))
            if v is not None}
    if args.r:
        over["r_grid"] = tuple(_floats(args.r))
    cfg = replace(cfg, **over)
    args._cfg = cfg
    phi = cfg.dictionary.build()
    model = gen_distribution(DistributionFamily(cfg.distribution, phi.K, cfg.S, cfg.step_ratio))
    res = tail_experiment(phi, model, cfg.statistic, cfg.r_grid, cfg.n_trials, cfg.master_seed)
    _emit(args, "tails.csv", res.to_csv())
    bad = res.violations()
    return (2 if bad else 0), {"floor": res.floor, "violations": len(bad),
                               "nonvacuous_exercised": res.nonvacuous_exercised}


# -- parser ------------------------------------------------------------------

def _common(p):
    p.add_argument("--config", help="TOML configuration file")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--out", help="output directory (default: $NUSL_OUT_DIR, else stdout)")


def _model_args(p, with_k=True):
    p.add_argument("--probs", help="inclusion probability vector file")
    if with_k:
        p.add_argument("--k", type=int, help="number of atoms for a generated distribution")
    p.add_argument("--dist", choices=DISTRIBUTIONS, default="uniform")
    p.add_argument("--s", type=int, help="support size for a generated distribution")
    p.add_argument("--step-ratio", type=float, default=10.0)


def build_parser():
    parser = _Parser(prog="nusl", description="Sparse recovery under non-uniform random supports.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("sample", help="draw supports")
    _common(p), _model_args(p)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--model", choices=["rejective", "poisson"], default="rejective")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("verify-sampling", help="exact checks of the sampling inequalities")
    _common(p), _model_args(p)
    p.add_argument("--n-indicators", type=int, default=50)
    p.set_defaults(func=cmd_verify_sampling)

    p = sub.add_parser("gram-report", help="Gram quantities of a dictionary")
    _common(p), _model_args(p, with_k=False)
    p.add_argument("--dict", required=True)
    p.add_argument("--sensing", help="sensing dictionary; report the cross-Gram instead")
    p.set_defaults(func=cmd_gram_report)

    p = sub.add_parser("bounds", help="operator-norm tail bound against Monte-Carlo")
    _common(p), _model_args(p, with_k=False)
    p.add_argument("--dict", required=True)
    p.add_argument("--r", default="auto", help="comma-separated r grid or 'auto'")
    p.add_argument("--n-trials", type=int, default=10_000)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("sensing", help="build a sensing dictionary or preconditioner")
    _common(p), _model_args(p, with_k=False)
    p.add_argument("--dict", required=True)
    p.add_argument("--kind", choices=["greedy", "precondition"], default="greedy")
    p.add_argument("--ridge", type=float, default=0.0)
    p.add_argument("--format", choices=["csv", "binary"], default="csv")
    p.set_defaults(func=cmd_sensing)

    p = sub.add_parser("solve", help="recover sparse coefficients")
    _common(p), _model_args(p, with_k=False)
    p.add_argument("--dict", required=True)
    p.add_argument("--signal", required=True, help="one signal per row (or a single column)")
    p.add_argument("--algo", choices=["thresholding", "omp", "bp", "bp-precond"], required=True)
    p.add_argument("--sparsity", type=int)
    p.add_argument("--sensing", help="sensing dictionary file, or 'auto'")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="recovery-rate sweep over support sizes")
    _common(p)
    p.add_argument("--n-trials", type=int)
    p.add_argument("--timing", action="store_true", help="fill mean_runtime_ms")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("tails", help="empirical tail of a submatrix statistic against its bound")
    _common(p)
    p.add_argument("--statistic", choices=STATISTICS)
    p.add_argument("--dist", choices=DISTRIBUTIONS)
    p.add_argument("--s", type=int)
    p.add_argument("--n-trials", type=int)
    p.add_argument("--r", help="comma-separated r grid (default: automatic)")
    p.set_defaults(func=cmd_tails)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            raise UsageError(parser.format_usage().strip())
        if args.jobs < 1:
            raise UsageError("--jobs must be at least 1")
        started = _now()
        code, summary = args.func(args)
        _manifest(args, args.command, started, getattr(args, "_cfg", None), summary)
        return code
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except INPUT_ERRORS as exc:
        print(f"nusl: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"nusl: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
