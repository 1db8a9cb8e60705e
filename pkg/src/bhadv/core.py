"""Labeled p-value collections and the balls-into-bins view of BH.

The interval ``[0, q]`` is cut into ``N`` bins of width ``q/N``. Bin 1 is
``[0, q/N]`` and bin ``i >= 2`` is ``((i-1)q/N, iq/N]``, so the prefix load of
bin ``i`` is exactly ``#{p <= iq/N}``.

The tail (bin ``N + 1``) is by default everything the bins leave out,
``(q, 1]``. ``tail="upper"`` selects ``[1-q, 1]`` instead; that region
leaves ``(q, 1-q)`` unbinned for ``q < 1/2`` and overlaps the bins for
``q > 1/2``.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional

import numpy as np


class TestLabel(enum.IntEnum):
    NULL = 0
    ALTERNATIVE = 1

    __test__ = False  # keep pytest from collecting this as a test class


@dataclass(frozen=True, eq=False)
class LabeledPValues:
    """A collection of tests with p-values and the true null/alternative split.

    ``is_null[i]`` is the omniscient label of entry ``i``; the decision maker
    never sees it, but the adversary and the FDP computation do.
    """

    ids: np.ndarray
    p: np.ndarray
    is_null: np.ndarray

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64)
        p = np.asarray(self.p, dtype=np.float64)
        is_null = np.asarray(self.is_null, dtype=bool)
        if not (ids.ndim == p.ndim == is_null.ndim == 1):
            raise ValueError("ids, p and is_null must be one-dimensional")
        if not (len(ids) == len(p) == len(is_null)):
            raise ValueError("ids, p and is_null must have equal length")
        if np.isnan(p).any() or (p < 0).any() or (p > 1).any():
            raise ValueError("p-values must lie in [0, 1]")
        if len(np.unique(ids)) != len(ids):
            raise ValueError("test ids must be unique")
        for a in (ids, p, is_null):
            a.flags.writeable = False
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "is_null", is_null)

    @classmethod
    def from_entries(cls, entries: Iterable[tuple[int, float, TestLabel]]):
        entries = list(entries)
        return cls(
            ids=[e[0] for e in entries],
            p=[e[1] for e in entries],
            is_null=[TestLabel(e[2]) == TestLabel.NULL for e in entries],
        )

    @property
    def n(self) -> int:
        return len(self.p)

    @cached_property
    def n0(self) -> int:
        return int(self.is_null.sum())

    @property
    def n1(self) -> int:
        return self.n - self.n0

    @property
    def pi0(self) -> float:
        return self.n0 / self.n

    @cached_property
    def index_of(self) -> dict[int, int]:
        return {int(i): k for k, i in enumerate(self.ids)}

    def labels(self) -> list[TestLabel]:
        return [TestLabel.NULL if x else TestLabel.ALTERNATIVE for x in self.is_null]

    def with_values(self, positions, new_p) -> "LabeledPValues":
        """Copy with ``p[positions] = new_p``; labels and ids are kept."""
        p = self.p.copy()
        p[np.asarray(positions, dtype=np.int64)] = new_p
        return LabeledPValues(self.ids, p, self.is_null)


TAIL_BEYOND = "beyond"
TAIL_UPPER = "upper"


@dataclass(frozen=True)
class BinSystem:
    n: int
    q: float
    tail: str = TAIL_BEYOND

    def __post_init__(self):
        if not 0 < self.q < 1:
            raise ValueError(f"q must lie in (0, 1), got {self.q}")
        if self.n < 1:
            raise ValueError(f"need at least one bin, got {self.n}")
        if self.tail not in (TAIL_BEYOND, TAIL_UPPER):
            raise ValueError(f"tail must be {TAIL_BEYOND!r} or {TAIL_UPPER!r}")

    @property
    def width(self) -> float:
        return self.q / self.n

    @cached_property
    def edges(self) -> np.ndarray:
        """Right edges ``i*q/N`` for ``i = 1..N``.

        Every threshold comparison in the package goes through these exact
        floats so the sorted and binned BH routes agree on ties.
        """
        e = np.arange(1, self.n + 1) * self.q / self.n
        e.flags.writeable = False
        return e

    def edge(self, i: int) -> float:
        """Right edge of bin ``i`` (``0.0`` for ``i = 0``)."""
        return 0.0 if i == 0 else float(self.edges[i - 1])

    def in_tail(self, p) -> np.ndarray:
        p = np.asarray(p)
        if self.tail == TAIL_BEYOND:
            # the last edge N*q/N can differ from q in the last bit; use the
            # edge so that every p-value lands in exactly one region
            return p > self.edges[-1]
        return p >= 1 - self.q

    def positions(self, p) -> np.ndarray:
        """Bin index of each p-value, with ``N + 1`` meaning ``p > q``."""
        return np.searchsorted(self.edges, p, side="left") + 1


def assign_bin(p: float, bins: BinSystem) -> Optional[int]:
    if not 0 <= p <= 1:
        raise ValueError(f"p-value {p} outside [0, 1]")
    i = int(bins.positions(p))
    return None if i > bins.n else i


@dataclass(frozen=True)
class BinLoads:
    """Per-bin counts plus tail counts.

    Arrays are indexed from 0 for bin 1. The ``prefix_*`` arrays have length
    ``N + 1`` with a leading zero, so ``prefix_total[i]`` is the load of bins
    ``1..i``.
    """

    total: np.ndarray
    null: np.ndarray
    alt: np.ndarray
    tail_total: int
    tail_null: int
    tail_alt: int
    prefix_total: np.ndarray = field(repr=False)
    prefix_null: np.ndarray = field(repr=False)

    @classmethod
    def from_counts(cls, total, null, tail_total=0, tail_null=0) -> "BinLoads":
        total = np.asarray(total, dtype=np.int64)
        null = np.asarray(null, dtype=np.int64)
        if total.shape != null.shape or (null > total).any() or (null < 0).any():
            raise ValueError("null loads must be nonnegative and bounded by total loads")
        if tail_null > tail_total:
            raise ValueError("tail null load exceeds tail total load")
        pt = np.zeros(len(total) + 1, dtype=np.int64)
        np.cumsum(total, out=pt[1:])
        pn = np.zeros(len(total) + 1, dtype=np.int64)
        np.cumsum(null, out=pn[1:])
        return cls(
            total=total,
            null=null,
            alt=total - null,
            tail_total=int(tail_total),
            tail_null=int(tail_null),
            tail_alt=int(tail_total - tail_null),
            prefix_total=pt,
            prefix_null=pn,
        )

    @property
    def n(self) -> int:
        return len(self.total)

    @property
    def prefix_alt(self) -> np.ndarray:
        return self.prefix_total - self.prefix_null


def compute_loads(pv: LabeledPValues, bins: BinSystem) -> BinLoads:
    pos = bins.positions(pv.p)
    n = bins.n
    total = np.bincount(pos, minlength=n + 2)[1 : n + 1]
    null = np.bincount(pos[pv.is_null], minlength=n + 2)[1 : n + 1]
    in_tail = bins.in_tail(pv.p)
    return BinLoads.from_counts(
        total,
        null,
        tail_total=int(in_tail.sum()),
        tail_null=int((in_tail & pv.is_null).sum()),
    )


_KINDS = ("total", "null", "alt")


def prefix_load(loads: BinLoads, kind: str, i: int) -> int:
    if kind not in _KINDS:
        raise ValueError(f"kind must be one of {_KINDS}, got {kind!r}")
    if not 0 <= i <= loads.n:
        raise ValueError(f"bin index {i} outside [0, {loads.n}]")
    arr = {"total": loads.prefix_total, "null": loads.prefix_null}.get(kind)
    if arr is None:
        arr = loads.prefix_alt
    return int(arr[i])


# -- CSV ingestion --------------------------------------------------------

PVALUE_HEADER = ("test_id", "p_value", "label")


class SchemaError(ValueError):
    """Malformed input file; ``line`` is 1-based."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def read_pvalues_csv(path) -> LabeledPValues:
    """Read ``test_id,p_value,label`` rows, label 0 = null, 1 = alternative."""
    ids, ps, nulls = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != PVALUE_HEADER:
            raise SchemaError(f"expected header {','.join(PVALUE_HEADER)}", 1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise SchemaError(f"expected 3 fields, got {len(row)}", lineno)
            try:
                tid, p, label = int(row[0]), float(row[1]), int(row[2])
            except ValueError as exc:
                raise SchemaError(str(exc), lineno) from None
            if label not in (0, 1):
                raise SchemaError(f"label must be 0 or 1, got {label}", lineno)
            if not 0 <= p <= 1:
                raise SchemaError(f"p-value {p} outside [0, 1]", lineno)
            ids.append(tid)
            ps.append(p)
            nulls.append(label == 0)
    if not ids:
        raise SchemaError("no data rows")
    try:
        return LabeledPValues(ids, ps, nulls)
    except ValueError as exc:
        raise SchemaError(str(exc)) from None


def write_pvalues_csv(pv: LabeledPValues, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PVALUE_HEADER)
        for i, p, null in zip(pv.ids, pv.p, pv.is_null):
            w.writerow([int(i), repr(float(p)), 0 if null else 1])
