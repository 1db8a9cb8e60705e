"""Paired before/after replication harness.

Each replication draws one Gaussian-model instance, runs BH, runs the
configured attack(s) on the same instance and runs BH again. Replication
``r`` uses ``SeedSequence([master_seed, *stream, r])``, so the records do not
depend on how replications are spread over workers.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from .attack import LARGEST_P, NEAREST, OBLIVIOUS, OMNISCIENT, increase_c, k_plus_c, move_1
from .bh import bh_bins
from .bounds import AS_PRINTED, EXACT, l_c_bound
from .core import TAIL_BEYOND, TAIL_UPPER, BinSystem, compute_loads
from .gaussmodel import GaussianAltModel, generate_instance

ATTACKS = ("increase_c", "move_1", "both")
ADVERSARIES = (OMNISCIENT, OBLIVIOUS)


@dataclass(frozen=True)
class SimConfig:
    n: int
    n0: int
    q: float
    mu1: float
    c: int
    reps: int
    master_seed: int = 0
    attack: str = "increase_c"
    adversary: str = OMNISCIENT
    source: str = NEAREST
    tail: str = TAIL_BEYOND

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if not 0 < self.q < 1:
            raise ValueError(f"q must lie in (0, 1), got {self.q}")
        if not 0 <= self.n0 <= self.n or self.n < 1:
            raise ValueError(f"need 0 <= n0 <= n, got n={self.n}, n0={self.n0}")
        if self.c < 1:
            raise ValueError(f"budget c must be >= 1, got {self.c}")
        if self.mu1 < 0:
            raise ValueError(f"mu1 must be >= 0, got {self.mu1}")
        if self.attack not in ATTACKS:
            raise ValueError(f"attack must be one of {ATTACKS}")
        if self.adversary not in ADVERSARIES:
            raise ValueError(f"adversary must be one of {ADVERSARIES}")
        if self.source not in (NEAREST, LARGEST_P):
            raise ValueError(f"source must be {NEAREST!r} or {LARGEST_P!r}")
        if self.tail not in (TAIL_BEYOND, TAIL_UPPER):
            raise ValueError(f"tail must be {TAIL_BEYOND!r} or {TAIL_UPPER!r}")
        if self.attack != "increase_c" and self.c != 1:
            raise ValueError("MOVE-1 is a single-perturbation attack; use c = 1")

    @property
    def model(self) -> GaussianAltModel:
        return GaussianAltModel(self.mu1, self.q, self.n, self.n0)


def rep_rng(master_seed: int, rep: int, stream=()) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master_seed, *stream, rep]))


def _one_rep(cfg: SimConfig, rep: int, stream) -> dict:
    rng = rep_rng(cfg.master_seed, rep, stream)
    draw = generate_instance(cfg.model, rng)
    pv = draw.pv
    bins = BinSystem(cfg.n, cfg.q, cfg.tail)
    loads = compute_loads(pv, bins)
    k = bh_bins(loads)
    n, c = cfg.n, cfg.c
    kpc = k_plus_c(loads, c)
    hit = loads.tail_null >= c
    rec = {
        "rep": rep,
        "k": k,
        "fdp_before": int(loads.prefix_null[k]) / max(k, 1),
        "tail_null": loads.tail_null,
        "tail_total": loads.tail_total,
        "k_plus_c": kpc,
        "fdp_identity": (int(loads.prefix_null[kpc]) + c) / kpc if hit and kpc > 0 else math.nan,
        "delta_term": c / kpc if hit and kpc > 0 else 0.0,
        "null_frac_beyond": (
            (int(loads.prefix_null[n]) - int(loads.prefix_null[k + 1])) / (n - (k + 1))
            if k + 1 < n
            else math.nan
        ),
    }
    if cfg.attack in ("increase_c", "both"):
        plan = increase_c(
            pv, cfg.q, c, mode=cfg.adversary, rng=rng, source=cfg.source, tail=cfg.tail
        )
        rec.update(
            inc_k_after=plan.induced_k,
            inc_fdp_after=plan.fdp_after,
            inc_moved=plan.l0_distance,
            inc_z_dist=plan.z_l1_distance,
        )
    if cfg.attack in ("move_1", "both"):
        plan = move_1(pv, cfg.q, metric="z")
        rec.update(
            mv_k_after=plan.induced_k,
            mv_fdp_after=plan.fdp_after,
            mv_moved=plan.l0_distance,
            mv_z_dist=plan.z_l1_distance,
        )
    return rec


def map_reps(fn, reps: int, threads: int = 1, chunk: int = 256) -> list:
    """``[fn(r) for r in range(reps)]``, optionally spread over a thread pool.

    Output order is the replication order regardless of ``threads``.
    """
    if threads <= 1 or reps <= chunk:
        return [fn(r) for r in range(reps)]
    blocks = [range(s, min(s + chunk, reps)) for s in range(0, reps, chunk)]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        parts = ex.map(lambda b: [fn(r) for r in b], blocks)
        return [x for part in parts for x in part]


@dataclass
class SimResult:
    config: SimConfig
    records: dict  # column name -> np.ndarray, one entry per replication
    stream: tuple = ()

    @property
    def reps(self) -> int:
        return len(self.records["rep"])

    @property
    def primary(self) -> str:
        return "mv" if self.config.attack == "move_1" else "inc"

    @property
    def fdp_after(self) -> np.ndarray:
        return self.records[f"{self.primary}_fdp_after"]

    @property
    def k_after(self) -> np.ndarray:
        return self.records[f"{self.primary}_k_after"]

    def aggregates(self) -> dict:
        out = {}
        for name, col in self.records.items():
            if name == "rep":
                continue
            x = np.asarray(col, dtype=np.float64)
            x = x[np.isfinite(x)]
            n = len(x)
            out[name] = {
                "mean": float(x.mean()) if n else None,
                "se": float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else None,
                "n": n,
            }
        for tag in ("inc", "mv"):
            if f"{tag}_fdp_after" in self.records:
                diff = self.records[f"{tag}_fdp_after"] - self.records["fdp_before"]
                dk = self.records[f"{tag}_k_after"] - self.records["k"]
                for name, x in ((f"{tag}_fdp_increase", diff), (f"{tag}_k_increase", dk)):
                    x = np.asarray(x, dtype=np.float64)
                    out[name] = {
                        "mean": float(x.mean()),
                        "se": float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else None,
                        "n": len(x),
                    }
        return out

    def mean(self, name: str) -> float:
        return self.aggregates()[name]["mean"]

    def se(self, name: str) -> float:
        return self.aggregates()[name]["se"]

    def report(self) -> dict:
        return {
            "config": asdict(self.config),
            "seed": self.config.master_seed,
            "stream": list(self.stream),
            "reps": self.reps,
            "aggregates": self.aggregates(),
        }

    @property
    def z_l1_distance(self) -> np.ndarray:
        return self.records[f"{self.primary}_z_dist"]

    def write_csv(self, path) -> None:
        cols = list(self.records)
        write_rows_csv(path, cols, zip(*(self.records[c] for c in cols)))

    def write_json(self, path) -> None:
        dump_json(self.report(), path)


def _fmt10(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        return "nan"
    return f"{v:.10g}"


def write_rows_csv(path, header, rows) -> None:
    """CSV with floats at 10 significant digits and ``nan`` for missing values."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt10(v) for v in row])


def dump_json(obj, path) -> None:
    """JSON with shortest round-trip float repr; NaN/inf become null."""

    def clean(x):
        if isinstance(x, dict):
            return {k: clean(v) for k, v in x.items()}
        if isinstance(x, (list, tuple)):
            return [clean(v) for v in x]
        if isinstance(x, np.integer):
            return int(x)
        if isinstance(x, (float, np.floating)):
            x = float(x)
            return x if math.isfinite(x) else None
        if isinstance(x, np.bool_):
            return bool(x)
        return x

    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(clean(obj), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def run_paired(config: SimConfig, threads: int = 1, stream=()) -> SimResult:
    stream = tuple(int(s) for s in stream)
    rows = map_reps(lambda r: _one_rep(config, r, stream), config.reps, threads)
    cols = {name: np.array([row[name] for row in rows]) for name in rows[0]}
    return SimResult(config, cols, stream)


def run_qsweep(grid, n: int, n0: int, mu1: float, reps: int, seed: int, threads: int = 1):
    """Estimate ``Delta_1`` and evaluate ``L_1`` for each ``q`` in ``grid``.

    Each row is ``(q, delta1_hat, delta1_se, l1_as_printed, l1_exact)``;
    ``delta1_hat`` is the mean paired FDP difference under INCREASE-1.
    """
    rows = []
    for j, q in enumerate(grid):
        q = float(q)
        cfg = SimConfig(n, n0, q, mu1, 1, reps, seed)
        res = run_paired(cfg, threads=threads, stream=(j,))
        diff = res.records["inc_fdp_after"] - res.records["fdp_before"]
        model = cfg.model
        rows.append(
            (
                q,
                float(diff.mean()),
                float(diff.std(ddof=1) / math.sqrt(len(diff))),
                l_c_bound(model, 1, AS_PRINTED).l_c,
                l_c_bound(model, 1, EXACT).l_c,
            )
        )
    return rows


def run_move1_table(config: SimConfig, mu1_values=(2.0, 1.0, 0.0), threads: int = 1) -> list:
    """MOVE-1 against INCREASE-1 on the same instances, one row per ``mu1``."""
    rows = []
    for j, mu in enumerate(mu1_values):
        cfg = replace(config, mu1=float(mu), c=1, attack="both")
        res = run_paired(cfg, threads=threads, stream=(j,))
        r = res.records
        rows.append(
            {
                "mu1": float(mu),
                "move1_fdp": float(r["mv_fdp_after"].mean()),
                "increase1_fdp": float(r["inc_fdp_after"].mean()),
                "move1_z_dist": float(r["mv_z_dist"].mean()),
                "increase1_z_dist": float(r["inc_z_dist"].mean()),
                "move1_fdp_se": float(r["mv_fdp_after"].std(ddof=1) / math.sqrt(res.reps)),
                "increase1_fdp_se": float(r["inc_fdp_after"].std(ddof=1) / math.sqrt(res.reps)),
                "move1_z_dist_se": float(r["mv_z_dist"].std(ddof=1) / math.sqrt(res.reps)),
                "increase1_z_dist_se": float(r["inc_z_dist"].std(ddof=1) / math.sqrt(res.reps)),
                "move1_ge_increase1_all": bool((r["mv_fdp_after"] >= r["inc_fdp_after"]).all()),
                "reps": res.reps,
            }
        )
    return rows
