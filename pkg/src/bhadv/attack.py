"""Test-time perturbation attacks on BH.

Two algorithms: INCREASE-c pulls ``c`` large null p-values from the tail
into the rejection region, and MOVE-1 finds the FDP-maximizing single
perturbation. ``brute_force_1`` solves the single-move problem by
enumeration and serves as the oracle for MOVE-1 on small instances.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bh import bh_bins
from .core import TAIL_BEYOND, BinLoads, BinSystem, LabeledPValues, compute_loads
from .gaussmodel import p_to_z

OMNISCIENT = "omniscient"
OBLIVIOUS = "oblivious"


@dataclass(frozen=True)
class PerturbationPlan:
    moves: tuple  # ((id, old_p, new_p), ...)
    k_before: int
    fdp_before: float
    induced_k: int
    fdp_after: float
    z_l1_distance: Optional[float] = None
    p_l1_distance: float = 0.0

    @property
    def l0_distance(self) -> int:
        return len(self.moves)

    def apply(self, pv: LabeledPValues) -> LabeledPValues:
        if not self.moves:
            return pv
        idx = pv.index_of
        pos = [idx[m[0]] for m in self.moves]
        return pv.with_values(pos, [m[2] for m in self.moves])

    def to_dict(self) -> dict:
        return {
            "moves": [{"id": int(i), "old_p": float(a), "new_p": float(b)} for i, a, b in self.moves],
            "k_before": self.k_before,
            "fdp_before": self.fdp_before,
            "induced_k": self.induced_k,
            "fdp_after": self.fdp_after,
            "l0_distance": self.l0_distance,
            "z_l1_distance": self.z_l1_distance,
            "p_l1_distance": self.p_l1_distance,
        }


@dataclass(frozen=True)
class CandidateSets:
    L: tuple
    R: tuple
    i_star: int


def _fdp_of(loads: BinLoads) -> tuple[int, float]:
    k = bh_bins(loads)
    return k, int(loads.prefix_null[k]) / max(k, 1)


def _z_distance(old, new) -> float:
    with np.errstate(invalid="ignore"):
        return float(np.abs(p_to_z(np.asarray(old)) - p_to_z(np.asarray(new))).sum())


def _plan(pv, bins, positions, new_values, k0, fdp0) -> PerturbationPlan:
    """Apply the moves, re-run BH and package the outcome."""
    positions = np.asarray(positions, dtype=np.int64)
    new_values = np.broadcast_to(np.asarray(new_values, dtype=np.float64), positions.shape)
    if len(positions) == 0:
        return PerturbationPlan((), k0, fdp0, k0, fdp0, 0.0, 0.0)
    old = pv.p[positions]
    after = pv.with_values(positions, new_values)
    k1, fdp1 = _fdp_of(compute_loads(after, bins))
    moves = tuple(
        (int(pv.ids[i]), float(a), float(b)) for i, a, b in zip(positions, old, new_values)
    )
    return PerturbationPlan(
        moves,
        k0,
        fdp0,
        k1,
        fdp1,
        z_l1_distance=_z_distance(old, new_values),
        p_l1_distance=float(np.abs(old - new_values).sum()),
    )


def stopping_index(loads: BinLoads, c: int) -> Optional[int]:
    """``max{i in [c, N] : prefix_total(i) = i - c}``, or None if no such i."""
    i = np.arange(c, loads.n + 1)
    hits = np.flatnonzero(loads.prefix_total[c:] == i - c)
    return int(i[hits[-1]]) if len(hits) else None


def k_plus_c(loads: BinLoads, c: int) -> int:
    """Rejection count INCREASE-c induces; falls back to BH's own count when
    fewer than ``c`` nulls sit in the tail."""
    if c < 1:
        raise ValueError(f"budget c must be >= 1, got {c}")
    if loads.tail_null < c:
        return bh_bins(loads)
    k = stopping_index(loads, c)
    # no crossing is only possible with tail="upper" and q > 1/2
    return bh_bins(loads) if k is None else k


NEAREST = "nearest"
LARGEST_P = "largest_p"


def increase_c(
    pv: LabeledPValues,
    q: float,
    c: int,
    mode: str = OMNISCIENT,
    rng: Optional[np.random.Generator] = None,
    source: str = NEAREST,
    tail: str = TAIL_BEYOND,
) -> PerturbationPlan:
    """Move ``c`` tail p-values to the right edge of bin ``k_plus_c``.

    The omniscient adversary moves ``c`` null tail values: with
    ``source="nearest"`` the ones with the largest z-scores (smallest p,
    hence the shortest move), with ``source="largest_p"`` the largest
    p-values. Ties go to the larger id. The oblivious adversary draws ``c``
    tail values uniformly at random and needs an ``rng``. Only values above
    the destination are eligible, which matters when ``tail="upper"`` and the
    tail overlaps the bins.
    """
    if c < 1:
        raise ValueError(f"budget c must be >= 1, got {c}")
    if source not in (NEAREST, LARGEST_P):
        raise ValueError(f"source must be {NEAREST!r} or {LARGEST_P!r}")
    bins = BinSystem(pv.n, q, tail)
    loads = compute_loads(pv, bins)
    k0, fdp0 = _fdp_of(loads)
    in_tail = bins.in_tail(pv.p)

    if mode == OMNISCIENT:
        if loads.tail_null < c:
            return _plan(pv, bins, [], [], k0, fdp0)
        target = stopping_index(loads, c)
    elif mode == OBLIVIOUS:
        if rng is None:
            raise ValueError("oblivious mode needs an rng")
        if loads.tail_total < c:
            return _plan(pv, bins, [], [], k0, fdp0)
        target = stopping_index(loads, c)
    else:
        raise ValueError(f"unknown adversary mode {mode!r}")
    if target is None:
        return _plan(pv, bins, [], [], k0, fdp0)

    dest = bins.edge(target)
    eligible = in_tail & (pv.p > dest)
    if mode == OMNISCIENT:
        eligible &= pv.is_null
    cand = np.flatnonzero(eligible)
    if len(cand) < c:
        return _plan(pv, bins, [], [], k0, fdp0)
    if mode == OMNISCIENT:
        key = pv.p[cand] if source == NEAREST else -pv.p[cand]
        order = np.lexsort((-pv.ids[cand], key))
        chosen = cand[order[:c]]
    else:
        chosen = np.sort(rng.choice(cand, size=c, replace=False))
    return _plan(pv, bins, chosen, dest, k0, fdp0)


def candidate_sets(loads: BinLoads) -> CandidateSets:
    """Achievable rejection counts after one move, other than the current one.

    ``L`` holds the reachable counts above ``k``, ``R`` those below it,
    with ``i_star`` its smallest element.
    """
    k = bh_bins(loads)
    pt = loads.prefix_total
    i = np.arange(loads.n + 1)
    above = np.flatnonzero((i > k) & (pt == i - 1))
    below = np.flatnonzero((i >= 1) & (i < k) & (pt == i + 1))
    i_star = int(below[-1]) if len(below) else 0
    mid = np.flatnonzero((i > i_star) & (i < k) & (pt == i))
    return CandidateSets(
        L=tuple(int(x) for x in above),
        R=(i_star,) + tuple(int(x) for x in mid),
        i_star=i_star,
    )


def move_1(pv: LabeledPValues, q: float, metric: str = "p") -> PerturbationPlan:
    """Optimal single perturbation.

    Every reachable rejection count is scored by the best FDP a single move
    can produce there. Among FDP-optimal moves the one closest to the
    original value is returned, measured in p-space or, with
    ``metric="z"``, in z-space.
    """
    if metric not in ("p", "z"):
        raise ValueError(f"metric must be 'p' or 'z', got {metric!r}")
    bins = BinSystem(pv.n, q)
    loads = compute_loads(pv, bins)
    n = pv.n
    k0 = bh_bins(loads)
    p0 = loads.prefix_null
    fdp0 = int(p0[k0]) / max(k0, 1)
    cs = candidate_sets(loads)

    order = np.argsort(pv.p, kind="stable")
    sp = pv.p[order]
    spos = bins.positions(sp)
    snull = pv.is_null[order]
    null_pos = spos[snull]
    null_idx = order[snull]
    alt_pos = spos[~snull]
    alt_idx = order[~snull]

    # (numerator, denominator, source index or -1, destination)
    cands = [(int(p0[k0]), max(k0, 1), -1, None)]

    L = np.asarray(cs.L, dtype=np.int64)
    if len(L):
        nxt = np.append(L[1:], n + 1)
        jn = np.searchsorted(null_pos, L, side="right")
        ja = np.searchsorted(spos, L, side="right")
        for i, hi, a, b in zip(L, nxt, jn, ja):
            dest = bins.edge(int(i))
            if a < len(null_pos) and null_pos[a] <= hi:
                cands.append((int(p0[i]) + 1, int(i), int(null_idx[a]), dest))
            elif b < len(spos) and spos[b] <= hi:
                cands.append((int(p0[i]), int(i), int(order[b]), dest))

    if k0 >= 1:
        beyond = float(np.nextafter(bins.edge(k0), np.inf))
        R = np.asarray([r for r in cs.R if r > cs.i_star], dtype=np.int64)
        if len(R):
            nxt = np.append(R[1:], k0)
            last = np.searchsorted(spos, nxt, side="right") - 1
            for i, b in zip(R, last):
                if b >= 0 and spos[b] > i:
                    cands.append((int(p0[i]), int(i), int(order[b]), beyond))
        s = cs.i_star
        if s >= 1:
            a = np.searchsorted(alt_pos, s, side="right") - 1
            if a >= 0:
                cands.append((int(p0[s]), s, int(alt_idx[a]), beyond))
            else:
                b = np.searchsorted(null_pos, s, side="right") - 1
                cands.append((int(p0[s]) - 1, s, int(null_idx[b]), beyond))

    best = _pick(cands, pv.p, metric)
    num, den, src, dest = best
    if src < 0:
        return _plan(pv, bins, [], [], k0, fdp0)
    plan = _plan(pv, bins, [src], dest, k0, fdp0)
    assert plan.fdp_after == num / den, "MOVE-1 candidate bookkeeping out of sync"
    return plan


def _distance(p_old: float, p_new, metric: str) -> float:
    if p_new is None:
        return 0.0
    if metric == "p":
        return abs(p_old - p_new)
    return _z_distance(p_old, p_new)


def _pick(cands, p, metric):
    """Max FDP compared exactly as fractions; ties go to the shortest move."""
    best, best_d = None, None
    for c in cands:
        num, den, src, dest = c
        d = 0.0 if src < 0 else _distance(float(p[src]), dest, metric)
        if best is None:
            best, best_d = c, d
            continue
        lhs, rhs = num * best[1], best[0] * den
        if lhs > rhs or (lhs == rhs and d < best_d):
            best, best_d = c, d
    return best


def brute_force_1(
    pv: LabeledPValues, q: float, cap: int = 14, metric: str = "p"
) -> PerturbationPlan:
    """Exact single-move optimum by enumeration.

    FDP depends on a p-value only through its bin, so the destinations
    ``{i q / N : 0 <= i <= N} U {1}`` cover every outcome. Cost is
    ``O(N^3 log N)``; instances above ``cap`` are refused.
    """
    if pv.n > cap:
        raise ValueError(f"brute force refused: N={pv.n} exceeds cap {cap}")
    bins = BinSystem(pv.n, q)
    loads0 = compute_loads(pv, bins)
    k0, fdp0 = _fdp_of(loads0)
    dests = [0.0] + [float(e) for e in bins.edges] + [1.0]
    best_num, best_den = int(loads0.prefix_null[k0]), max(k0, 1)
    best_d, best_move = 0.0, None
    for s in range(pv.n):
        for d in dests:
            if d == pv.p[s]:
                continue
            trial = pv.with_values([s], d)
            loads = compute_loads(trial, bins)
            k = bh_bins(loads)
            num, den = int(loads.prefix_null[k]), max(k, 1)
            dist = _distance(float(pv.p[s]), d, metric)
            lhs, rhs = num * best_den, best_num * den
            if lhs > rhs or (lhs == rhs and dist < best_d):
                best_num, best_den, best_d, best_move = num, den, dist, (s, d)
    if best_move is None:
        return _plan(pv, bins, [], [], k0, fdp0)
    return _plan(pv, bins, [best_move[0]], best_move[1], k0, fdp0)
