"""Command-line front end.

Exit codes: 0 success, 2 usage or validation error (including malformed
input files), 3 file I/O failure. Every run writes a manifest JSON naming its
outputs next to them.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .attack import LARGEST_P, NEAREST, OBLIVIOUS, OMNISCIENT, increase_c, move_1
from .bounds import (
    AS_PRINTED,
    EXACT,
    ballot_prob,
    delta_c_mc,
    k_plus_c_eq_c_prob,
    l_c_bound,
    reject_zero_pmf,
    thm1_rhs_mc,
    thm3_bounds,
)
from .conformal import (
    BUDGET_GRID,
    PLUS_ONE,
    PRINTED,
    SIGNAL_GRID,
    ConformalConfig,
    attack_conformal,
    read_scores_csv,
    run_conformal_attack,
)
from .core import TAIL_BEYOND, TAIL_UPPER, read_pvalues_csv, write_pvalues_csv
from .gaussmodel import GaussianAltModel
from .sim import SimConfig, dump_json, run_move1_table, run_paired, run_qsweep, write_rows_csv

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3

QSWEEP_GRID = tuple(round(0.01 * i, 2) for i in range(1, 100))
ATTACK_NAMES = {"increase": "increase_c", "move1": "move_1", "both": "both"}


class UsageError(ValueError):
    pass


def _threads(args) -> int:
    if args.threads is not None:
        n = args.threads
    else:
        raw = os.environ.get("BHADV_THREADS", "1")
        try:
            n = int(raw)
        except ValueError:
            raise UsageError(f"BHADV_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"thread count must be >= 1, got {n}")
    return n


def _require(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"--which {args.which} needs {', '.join(missing)}")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(args, out: Path, outputs, started: float, threads: int) -> Path:
    config = {
        k: v for k, v in vars(args).items() if k not in ("func", "threads", "out", "command")
    }
    manifest = {
        "subcommand": args.command,
        "config": config,
        "master_seed": getattr(args, "seed", None),
        "version": __version__,
        "threads": threads,
        "duration_seconds": time.perf_counter() - started,
        "outputs": [str(p) for p in outputs],
    }
    path = out / f"{args.command}_manifest.json"
    dump_json(manifest, path)
    return path


# -- subcommands -----------------------------------------------------------


def cmd_simulate(args, started: float) -> int:
    threads = _threads(args)
    attack = ATTACK_NAMES[args.attack]
    if args.mu1_grid:
        attack, c = "both", 1
        if args.c != 1:
            raise UsageError("--mu1-grid compares MOVE-1 with INCREASE-1 and needs --c 1")
    else:
        if args.mu1 is None:
            raise UsageError("simulate needs --mu1 (or --mu1-grid)")
        c = args.c
    mu1 = args.mu1 if args.mu1 is not None else float(args.mu1_grid[0])
    cfg = SimConfig(
        n=args.n,
        n0=args.n0,
        q=args.q,
        mu1=mu1,
        c=c,
        reps=args.reps,
        master_seed=args.seed,
        attack=attack,
        adversary=args.adversary,
        source=args.source,
        tail=args.tail,
    )
    out = _out_dir(args)
    outputs = []
    if args.mu1_grid:
        rows = run_move1_table(cfg, args.mu1_grid, threads=threads)
        csv_path = out / "move1_table.csv"
        cols = list(rows[0])
        write_rows_csv(csv_path, cols, ([r[k] for k in cols] for r in rows))
        json_path = out / "move1_table.json"
        dump_json({"rows": rows, "seed": args.seed}, json_path)
        outputs += [csv_path, json_path]
    else:
        res = run_paired(cfg, threads=threads)
        csv_path = out / "simulate_records.csv"
        json_path = out / "simulate_aggregate.json"
        res.write_csv(csv_path)
        res.write_json(json_path)
        outputs += [csv_path, json_path]
        agg = res.aggregates()
        tag = res.primary
        print(
            f"reps={res.reps} fdp_before={agg['fdp_before']['mean']:.4f} "
            f"fdp_after={agg[f'{tag}_fdp_after']['mean']:.4f} "
            f"k_increase={agg[f'{tag}_k_increase']['mean']:.4f}"
        )
    outputs.append(_write_manifest(args, out, outputs, started, threads))
    for p in outputs:
        print(p)
    return EXIT_OK


def _model(args) -> GaussianAltModel:
    return GaussianAltModel(args.mu1, args.q, args.n, args.n0)


def _mc(est) -> dict:
    return {"mean": est.mean, "se": est.std_error, "reps": est.reps, "hits": est.hits}


def cmd_bound(args, started: float) -> int:
    threads = _threads(args)
    w = args.which
    doc = {"which": w}
    if w == "lc":
        _require(args, "n", "n0", "q", "mu1", "c")
        doc.update(l_c_bound(_model(args), args.c, args.m_variant).to_dict())
    elif w == "thm1":
        _require(args, "n", "n0", "q", "mu1", "c")
        rhs, inner, lhs = thm1_rhs_mc(_model(args), args.c, args.mc_reps, args.seed, threads)
        doc.update(rhs=rhs, inner=_mc(inner), lhs=_mc(lhs), holds=lhs.mean >= rhs - 3 * lhs.std_error)
    elif w == "thm3":
        _require(args, "n", "n0", "q", "mu1", "c")
        upper, lower = thm3_bounds(_model(args), args.c)
        doc.update(upper_on_delta_c=upper, lower_on_e_k_plus_c=lower)
    elif w == "deltac":
        _require(args, "n", "n0", "q", "mu1", "c")
        doc["delta_c"] = _mc(delta_c_mc(_model(args), args.c, args.mc_reps, args.seed, threads))
    elif w == "rejectzero":
        _require(args, "n", "q")
        if args.ell is None:
            doc["pmf"] = reject_zero_pmf(args.n, args.q, np.arange(args.n + 1)).tolist()
        else:
            doc["value"] = reject_zero_pmf(args.n, args.q, args.ell)
    elif w == "ballot":
        _require(args, "n", "x")
        doc["value"] = ballot_prob(args.n, args.x)
    elif w == "kplusc":
        _require(args, "n", "n0", "q", "c", "b0_tail")
        cp = k_plus_c_eq_c_prob(args.n, args.n0, args.q, args.c, args.b0_tail)
        doc.update(value=cp.value, raw=cp.raw, clamped=cp.clamped)
    inputs = {k: getattr(args, k) for k in ("n", "n0", "q", "mu1", "c", "x", "ell", "b0_tail")}
    doc["inputs"] = {k: v for k, v in inputs.items() if v is not None}
    out = _out_dir(args)
    path = out / f"bound_{w}.json"
    dump_json(doc, path)
    manifest = _write_manifest(args, out, [path], started, threads)
    print(path.read_text(encoding="utf-8"), end="")
    print(manifest, file=sys.stderr)
    return EXIT_OK


def cmd_qsweep(args, started: float) -> int:
    threads = _threads(args)
    grid = tuple(args.grid) if args.grid else QSWEEP_GRID
    for q in grid:
        if not 0 < q < 1:
            raise UsageError(f"grid values must lie in (0, 1), got {q}")
    if args.reps_per_q < 2:
        raise UsageError("--reps-per-q must be >= 2 for a standard error")
    rows = run_qsweep(grid, args.n, args.n0, args.mu1, args.reps_per_q, args.seed, threads)
    out = _out_dir(args)
    path = out / "qsweep.csv"
    write_rows_csv(path, ("q", "delta1_hat", "delta1_se", "l1_as_printed", "l1_exact"), rows)
    manifest = _write_manifest(args, out, [path], started, threads)
    print(path)
    print(manifest)
    return EXIT_OK


def cmd_conformal(args, started: float) -> int:
    threads = _threads(args)
    budgets = tuple(args.c)
    if min(budgets) < 1:
        raise UsageError("every budget c must be >= 1")
    out = _out_dir(args)
    outputs = []
    if args.ingest:
        table = read_scores_csv(args.ingest, lower_is_outlier=args.lower_is_outlier)
        pv = table.pvalues(args.denominator)
        res = attack_conformal(pv, args.q, budgets)
        path = out / "conformal_ingest.csv"
        write_rows_csv(
            path,
            ("c", "k_before", "fdp_before", "k_after", "fdp_after"),
            (
                (c, res["k"], res["fdp_before"], res[f"k_after_c{c}"], res[f"fdp_after_c{c}"])
                for c in budgets
            ),
        )
        pv_path = out / "conformal_ingest_pvalues.csv"
        write_pvalues_csv(pv, pv_path)
        outputs += [path, pv_path]
    else:
        for a in args.a:
            if a < 1:
                raise UsageError(f"signal strength a must be >= 1, got {a}")
        kw = dict(
            dim=args.dim,
            n_train=args.n_train,
            n_cal=args.n_cal,
            n_test=args.n_test,
            outlier_fraction=args.outlier_fraction,
            q=args.q,
            k_neighbors=args.k_neighbors,
            denominator=args.denominator,
        )
        ConformalConfig(signal_strength=max(args.a), c=max(budgets), reps=args.reps, **kw)
        rows = run_conformal_attack(args.a, budgets, args.reps, args.seed, threads, **kw)
        path = out / "conformal_table.csv"
        cols = ("a", "c", "reps", "fdp_before", "fdp_before_se", "fdp_after", "fdp_after_se",
                "attack_integrity")
        write_rows_csv(path, cols, ([r[k] for k in cols] for r in rows))
        outputs.append(path)
    outputs.append(_write_manifest(args, out, outputs, started, threads))
    for p in outputs:
        print(p)
    return EXIT_OK


def cmd_attack(args, started: float) -> int:
    threads = _threads(args)
    if args.c < 1:
        raise UsageError(f"budget c must be >= 1, got {args.c}")
    if args.attack == "move1" and args.c != 1:
        raise UsageError("MOVE-1 perturbs a single p-value; use --c 1")
    pv = read_pvalues_csv(args.input)
    if args.attack == "move1":
        plan = move_1(pv, args.q, metric=args.metric)
    else:
        rng = np.random.default_rng(args.seed)
        plan = increase_c(
            pv, args.q, args.c, mode=args.adversary, rng=rng, source=args.source, tail=args.tail
        )
    out = _out_dir(args)
    path = out / "attack_plan.json"
    dump_json(plan.to_dict(), path)
    outputs = [path]
    if args.perturbed:
        pp = out / "attack_perturbed.csv"
        write_pvalues_csv(plan.apply(pv), pp)
        outputs.append(pp)
    outputs.append(_write_manifest(args, out, outputs, started, threads))
    print(f"k {plan.k_before} -> {plan.induced_k}, fdp {plan.fdp_before:.4f} -> {plan.fdp_after:.4f}")
    for p in outputs:
        print(p)
    return EXIT_OK


# -- parser ----------------------------------------------------------------


def _common(p: argparse.ArgumentParser, seed_required: bool = False):
    p.add_argument("--out", default=".", help="output directory (created if missing)")
    p.add_argument(
        "--threads", type=int, default=None, help="worker threads (default: $BHADV_THREADS or 1)"
    )
    if seed_required:
        p.add_argument("--seed", type=int, required=True)
    else:
        p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bhadv",
        description="Adversarial perturbation experiments for the Benjamini-Hochberg procedure.",
        epilog="exit codes: 0 ok, 2 usage or invalid input, 3 file I/O failure",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="paired before/after BH replications")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--n0", type=int, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--mu1", type=float)
    p.add_argument("--c", type=int, required=True)
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--attack", choices=sorted(ATTACK_NAMES), default="increase")
    p.add_argument("--adversary", choices=(OMNISCIENT, OBLIVIOUS), default=OMNISCIENT)
    p.add_argument("--source", choices=(NEAREST, LARGEST_P), default=NEAREST)
    p.add_argument("--tail", choices=(TAIL_BEYOND, TAIL_UPPER), default=TAIL_BEYOND)
    p.add_argument(
        "--mu1-grid", type=float, nargs="+", help="MOVE-1 vs INCREASE-1 table over these mu1"
    )
    _common(p, seed_required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bound", help="evaluate a theoretical quantity")
    p.add_argument(
        "--which",
        required=True,
        choices=("lc", "thm1", "thm3", "rejectzero", "ballot", "kplusc", "deltac"),
    )
    p.add_argument("--n", type=int)
    p.add_argument("--n0", type=int)
    p.add_argument("--q", type=float)
    p.add_argument("--mu1", type=float)
    p.add_argument("--c", type=int)
    p.add_argument("--x", type=int, help="ball count for --which ballot")
    p.add_argument("--ell", type=int, help="rejection count for --which rejectzero")
    p.add_argument("--b0-tail", type=int, help="conditioning tail-null count for --which kplusc")
    p.add_argument("--m-variant", choices=(AS_PRINTED, EXACT), default=AS_PRINTED)
    p.add_argument("--mc-reps", type=int, default=10000)
    _common(p)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("qsweep", help="estimated Delta_1 and its lower bound over a q grid")
    p.add_argument("--mu1", type=float, required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--n0", type=int, default=900)
    p.add_argument("--reps-per-q", type=int, default=1000)
    p.add_argument("--grid", type=float, nargs="+", help="q values (default 0.01..0.99)")
    _common(p)
    p.set_defaults(func=cmd_qsweep)

    p = sub.add_parser("conformal", help="INCREASE-c on conformal outlier-detection p-values")
    p.add_argument("--a", type=float, nargs="+", default=list(SIGNAL_GRID))
    p.add_argument("--c", type=int, nargs="+", default=list(BUDGET_GRID))
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--q", type=float, default=0.1)
    p.add_argument("--dim", type=int, default=50)
    p.add_argument("--n-train", type=int, default=1000)
    p.add_argument("--n-cal", type=int, default=1000)
    p.add_argument("--n-test", type=int, default=1000)
    p.add_argument("--outlier-fraction", type=float, default=0.1)
    p.add_argument("--k-neighbors", type=int, default=10)
    p.add_argument("--denominator", choices=(PLUS_ONE, PRINTED), default=PLUS_ONE)
    p.add_argument("--ingest", help="CSV of precomputed scores: id,score,label,split")
    p.add_argument(
        "--lower-is-outlier", action="store_true", help="ingested scores are depths (small = outlier)"
    )
    _common(p)
    p.set_defaults(func=cmd_conformal)

    p = sub.add_parser("attack", help="attack one labeled p-value file")
    p.add_argument("--input", required=True, help="CSV with header test_id,p_value,label")
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--attack", choices=("increase", "move1"), default="increase")
    p.add_argument("--c", type=int, default=1)
    p.add_argument("--adversary", choices=(OMNISCIENT, OBLIVIOUS), default=OMNISCIENT)
    p.add_argument("--source", choices=(NEAREST, LARGEST_P), default=NEAREST)
    p.add_argument("--tail", choices=(TAIL_BEYOND, TAIL_UPPER), default=TAIL_BEYOND)
    p.add_argument("--metric", choices=("p", "z"), default="p", help="MOVE-1 tie-break distance")
    p.add_argument("--perturbed", action="store_true", help="also write the perturbed p-values")
    _common(p)
    p.set_defaults(func=cmd_attack)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    started = time.perf_counter()
    try:
        return args.func(args, started)
    except OSError as exc:
        print(f"bhadv: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"bhadv: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
