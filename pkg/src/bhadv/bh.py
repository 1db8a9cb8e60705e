"""The BH step-up procedure, in sorted form and in balls-into-bins form."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BinLoads, BinSystem, LabeledPValues, compute_loads


@dataclass(frozen=True)
class RejectionOutcome:
    k: int
    rejected_ids: frozenset
    false_count: int
    fdp: float


def bh_sorted(pv: LabeledPValues, q: float) -> RejectionOutcome:
    """Classical BH: reject the ``i_max`` smallest p-values.

    ``i_max = max{i : p_(i) <= i q / N}``. Every entry tied with ``p_(i_max)``
    is rejected, so the rejected set does not depend on sort order.
    """
    bins = BinSystem(pv.n, q)
    order = np.argsort(pv.p, kind="stable")
    ok = np.flatnonzero(pv.p[order] <= bins.edges)
    k = int(ok[-1]) + 1 if len(ok) else 0
    if k == 0:
        return RejectionOutcome(0, frozenset(), 0, 0.0)
    mask = pv.p <= pv.p[order[k - 1]]
    false_count = int((mask & pv.is_null).sum())
    return RejectionOutcome(k, frozenset(pv.ids[mask].tolist()), false_count, false_count / k)


def bh_bins(loads: BinLoads) -> int:
    """Rejection count: the largest ``i`` whose first ``i`` bins hold exactly ``i`` balls."""
    hits = np.flatnonzero(loads.prefix_total == np.arange(loads.n + 1))
    return int(hits[-1])


def fdp(rejected_ids, pv: LabeledPValues) -> float:
    rejected = list(rejected_ids)
    idx = pv.index_of
    try:
        nulls = sum(bool(pv.is_null[idx[int(i)]]) for i in rejected)
    except KeyError as exc:
        raise ValueError(f"unknown test id {exc.args[0]}") from None
    return nulls / max(len(rejected), 1)


def bh(pv: LabeledPValues, q: float) -> RejectionOutcome:
    """BH through the bin representation; same output as :func:`bh_sorted`."""
    bins = BinSystem(pv.n, q)
    loads = compute_loads(pv, bins)
    k = bh_bins(loads)
    if k == 0:
        return RejectionOutcome(0, frozenset(), 0, 0.0)
    false_count = int(loads.prefix_null[k])
    mask = pv.p <= bins.edges[k - 1]
    return RejectionOutcome(k, frozenset(pv.ids[mask].tolist()), false_count, false_count / k)
