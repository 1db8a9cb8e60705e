"""Exact and Monte-Carlo evaluation of the FDR-increase bounds.

Exact quantities are finite sums over binomial laws, evaluated in log space.
Monte-Carlo quantities come from :mod:`bhadv.sim` replications.

The tail is the complement ``(q, 1]`` of the bins, so a uniform null lands in
the bins with probability ``q`` and in the tail with probability ``1 - q``:
``B0_bins ~ Binom(N0, q)`` and ``B0_tail = N0 - B0_bins ~ Binom(N0, 1 - q)``.
Given ``B0_tail = b``, the other ``N0 - b`` nulls are uniform over the bins.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import special

from .gaussmodel import GaussianAltModel, delta, delta_j

AS_PRINTED = "as_printed"
EXACT = "exact"


class AssumptionError(ValueError):
    """Some bin has zero alternative mass; ``bin_index`` is 1-based."""

    def __init__(self, bin_index: int, mass: float):
        self.bin_index = bin_index
        super().__init__(f"alternative mass of bin {bin_index} is {mass:.3g} <= 0")


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    reps: int
    hits: Optional[int] = None

    @classmethod
    def from_samples(cls, x, hits=None) -> "McEstimate":
        x = np.asarray(x, dtype=np.float64)
        if len(x) < 1:
            raise ValueError("need at least one sample")
        se = float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else float("nan")
        return cls(float(x.mean()), se, len(x), hits)


# -- binomial helpers -----------------------------------------------------


def _log_binom_pmf(n: int, p: float) -> np.ndarray:
    k = np.arange(n + 1)
    logc = special.gammaln(n + 1) - special.gammaln(k + 1) - special.gammaln(n - k + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        lp = np.where(k > 0, k * np.log(p) if p > 0 else -np.inf, 0.0)
        lq = np.where(n - k > 0, (n - k) * np.log1p(-p) if p < 1 else -np.inf, 0.0)
    return logc + lp + lq


def binom_pmf(n0: int, q: float) -> np.ndarray:
    """``P(B = b)`` for ``b = 0..n0``, ``B ~ Binom(n0, q)``."""
    if not 0 <= q <= 1:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    return np.exp(_log_binom_pmf(n0, q))


def binom_tail(n0: int, q: float, c: int) -> float:
    """``P(B >= c)``."""
    if c <= 0:
        return 1.0
    if c > n0:
        return 0.0
    return float(special.bdtrc(c - 1, n0, q))


def binom_truncated_mean(n0: int, q: float, c: int) -> float:
    """``E[B | B >= c]``; nan when the event is empty."""
    pmf = binom_pmf(n0, q)
    b = np.arange(n0 + 1)
    w = pmf[b >= c]
    if w.sum() == 0:
        return float("nan")
    return float((b[b >= c] * w).sum() / w.sum())


def binom_partial_mgf(n0: int, q: float, t: float, c: int) -> float:
    """``E[t**(-B); B <= c - 1]``."""
    b = np.arange(min(c, n0 + 1))
    return float(np.exp(_log_binom_pmf(n0, q)[: len(b)] - b * math.log(t)).sum())


# -- ballot and the law of the rejection count ----------------------------


def ballot_prob(n: int, x: int) -> float:
    """Probability that ``x`` balls thrown uniformly into ``n`` bins leave
    every prefix ``1..r`` with fewer than ``r`` balls."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if not 0 <= x <= n:
        raise ValueError(f"need 0 <= x <= n, got x={x}, n={n}")
    return 1 - x / n


def reject_zero_pmf(n: int, q: float, ell) -> float:
    """``P(k = ell)`` when every p-value is uniform.

    ``(1-q) / (1 - q + (N-ell) q / N) * C(N, ell) (q ell/N)^ell (1 - q ell/N)^(N-ell)``
    with ``0^0 = 1``.
    """
    ell = np.asarray(ell)
    if ((ell < 0) | (ell > n)).any():
        raise ValueError(f"ell must lie in [0, {n}]")
    ell = ell.astype(np.float64)
    r = q * ell / n
    logc = special.gammaln(n + 1) - special.gammaln(ell + 1) - special.gammaln(n - ell + 1)
    with np.errstate(divide="ignore"):
        lp = np.where(ell > 0, ell * np.log(np.where(ell > 0, r, 1.0)), 0.0)
        lq = np.where(n - ell > 0, (n - ell) * np.log1p(-r), 0.0)
    head = (1 - q) / (1 - q + (n - ell) * q / n)
    out = head * np.exp(logc + lp + lq)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ConditionalProb:
    value: float
    raw: float
    clamped: bool


def k_plus_c_eq_c_prob(n: int, n0: int, q: float, c: int, b0_tail: int) -> ConditionalProb:
    """``P(k_plus_c = c | B0_tail = b0_tail)`` as the closed-form product.

    ``(1 - cq/N)^N1 (1 - c/N)^(N0-b) (1 - (N0-b)/(N-c) - N1 q/(N-cq))``.
    The last factor can go negative; the result is clamped to ``[0, 1]``
    and ``clamped`` records whether that happened.
    """
    if b0_tail < c:
        raise ValueError(f"conditioning value {b0_tail} below budget {c}")
    if b0_tail > n0:
        raise ValueError(f"conditioning value {b0_tail} exceeds N0={n0}")
    n1 = n - n0
    rest = n0 - b0_tail
    raw = (
        (1 - c * q / n) ** n1
        * (1 - c / n) ** rest
        * (1 - rest / (n - c) - n1 * q / (n - c * q))
    )
    val = min(max(raw, 0.0), 1.0)
    return ConditionalProb(val, raw, val != raw)


# -- bounds on the attack effect ---------------------------------------------


def thm1_rhs(inner_expectation: float, c: int) -> float:
    """``(c-1) / (1 - E) + 1`` where ``E`` is the mean fraction of nulls
    sitting in the bins BH left unrejected (past ``k + 1``)."""
    if c < 2:
        raise ValueError("the rejection-count bound is stated for c >= 2")
    return (c - 1) / (1 - inner_expectation) + 1


def thm1_rhs_mc(model: GaussianAltModel, c: int, reps: int, seed: int = 0, threads: int = 1):
    """Plug-in Monte-Carlo evaluation of :func:`thm1_rhs`.

    Returns ``(rhs, inner McEstimate, lhs McEstimate)`` where ``lhs`` is the
    conditional mean rejection-count increase it bounds from below.
    """
    from .sim import SimConfig, run_paired

    res = run_paired(
        SimConfig(model.n, model.n0, model.q, model.mu1, c, reps, seed), threads=threads
    )
    r = res.records
    ok = (r["tail_null"] >= c) & (r["k"] + 1 < model.n)
    inner = McEstimate.from_samples(r["null_frac_beyond"][ok], hits=int(ok.sum()))
    hit = r["tail_null"] >= c
    lhs = McEstimate.from_samples((r["k_plus_c"] - r["k"])[hit], hits=int(hit.sum()))
    return thm1_rhs(inner.mean, c), inner, lhs


def delta_c_mc(model: GaussianAltModel, c: int, reps: int, seed: int = 0, threads: int = 1):
    """Monte-Carlo ``E[c / k_plus_c ; B0_tail >= c]``."""
    from .sim import SimConfig, run_paired

    res = run_paired(
        SimConfig(model.n, model.n0, model.q, model.mu1, c, reps, seed), threads=threads
    )
    r = res.records
    return McEstimate.from_samples(r["delta_term"], hits=int((r["tail_null"] >= c).sum()))


def tail_null_pmf(n0: int, q: float) -> np.ndarray:
    """Law of the number of nulls in the tail, ``Binom(N0, 1 - q)``."""
    return binom_pmf(n0, 1 - q)


def _p_all_alt_in_first(model: GaussianAltModel, c: int) -> float:
    """``P(B1_{1:c} = N1) = (cq/N + delta_{1:c})^N1``."""
    mass = c * model.q / model.n + float(np.sum(delta_j(model)[:c]))
    return mass ** model.n1


def thm3_bounds(model: GaussianAltModel, c: int) -> tuple[float, float]:
    """Upper bound on ``Delta_c`` and lower bound on ``E[k_plus_c | B0_tail >= c]``.

    The conditional expectation in the upper bound is an exact double sum
    over the joint law of (tail nulls, nulls in the first ``N1 + c`` bins).
    """
    n, n0, n1, q = model.n, model.n0, model.n1, model.q
    m = n1 + c
    if m > n:
        raise ValueError(f"need N1 + c <= N, got {m} > {n}")
    p_all = _p_all_alt_in_first(model, c)

    pt = tail_null_pmf(n0, q)
    tail_mass = pt[c:].sum()
    if tail_mass == 0:
        inner = 0.0
    else:
        # given t tail nulls, each other null is in the first m bins w.p. m/N
        r = m / n
        total = 0.0
        for t in range(c, n0 + 1):
            if pt[t] == 0:
                continue
            s = np.arange(n0 - t + 1)
            ps = binom_pmf(n0 - t, r)
            total += pt[t] * float((ps * (c / (c + n1 + s))).sum())
        inner = total / tail_mass
    upper = p_all * inner + 1 - p_all

    b = np.arange(n0 + 1)
    keep = b <= n0 - c
    w = binom_pmf(n0, q)[keep]
    cond = float((b[keep] / n * w).sum() / w.sum()) if w.sum() > 0 else 0.0
    lower = (n1 + c) * p_all / (1 - cond)
    return upper, lower


@dataclass(frozen=True)
class BoundReport:
    q: float
    n: int
    n0: int
    c: int
    mu1: float
    m_c_variant: str
    delta: float
    delta_1c: float
    delta_c1n: float
    e_alt_rest: float
    pi_c: float
    d_kl: float
    d_kl_raw: float
    v_c: float
    m_c: float
    z_c: float
    l_c: float
    flags: dict = field(default_factory=dict)

    @property
    def vacuous(self) -> bool:
        return self.l_c <= 0

    def recompute(self) -> float:
        n1 = self.n - self.n0
        head = (1 - self.c * self.q / self.n - self.delta_1c) ** n1
        return head * (
            (1 - self.c / self.n) ** self.n0 * (1 - self.pi_c - self.v_c) * self.m_c + self.z_c
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["vacuous"] = self.vacuous
        return d


def l_c_bound(model: GaussianAltModel, c: int, m_c_variant: str = AS_PRINTED) -> BoundReport:
    """Lower bound on ``Delta_c`` assembled from its components.

    ``m_c_variant="as_printed"`` uses ``(N - cq)/(N - c)`` for
    ``E[(1 - c/N)^(-B)]`` with ``B`` the tail null count; ``"exact"`` uses the
    binomial moment ``(q + (1 - q)N/(N - c))^N0``. The printed form is that
    moment with ``N0 = 1``. The final value is not clamped.
    """
    if m_c_variant not in (AS_PRINTED, EXACT):
        raise ValueError(f"unknown M_c variant {m_c_variant!r}")
    n, n0, n1, q = model.n, model.n0, model.n1, model.q
    if not 1 <= c < n:
        raise ValueError(f"need 1 <= c < N, got c={c}")
    dj = delta_j(model)
    bin_mass = q / n + dj
    bad = np.flatnonzero(bin_mass <= 0)
    if len(bad):
        raise AssumptionError(int(bad[0]) + 1, float(bin_mass[bad[0]]))
    d = delta(model)
    d1c = float(dj[:c].sum())
    dc1n = float(dj[c:].sum())

    e_alt = n1 * ((n - c) * q + n * dc1n) / (n - c * q - n * d1c)
    pi_c = (n0 + e_alt) / (n - c)

    num = q + d - float(bin_mass[:c].sum())
    with np.errstate(divide="ignore", invalid="ignore"):
        d_kl_raw = float(np.sum(np.log(num / ((n - c) * bin_mass[c:]))) / (n - c))
    flags = {}
    d_kl = d_kl_raw
    if d_kl_raw < 0:
        # a true KL divergence; only rounding can push it below zero
        d_kl = 0.0
        flags["d_kl_floored"] = True
    v_c = math.sqrt(math.log(2) / 2 * e_alt * d_kl)

    shrink = 1 - c / n
    partial = binom_partial_mgf(n0, 1 - q, shrink, c)
    if m_c_variant == AS_PRINTED:
        full = (n - c * q) / (n - c)
    else:
        full = (q + (1 - q) * n / (n - c)) ** n0
    m_c = full - partial

    p_tail = binom_tail(n0, 1 - q, c)
    if p_tail > 0:
        eb = binom_truncated_mean(n0, 1 - q, c)
        z_c = p_tail * shrink ** (n0 - eb) * eb / (n - c)
    else:
        z_c = 0.0

    head = (1 - c * q / n - d1c) ** n1
    l_c = head * (shrink**n0 * (1 - pi_c - v_c) * m_c + z_c)
    return BoundReport(
        q=q,
        n=n,
        n0=n0,
        c=c,
        mu1=model.mu1,
        m_c_variant=m_c_variant,
        delta=d,
        delta_1c=d1c,
        delta_c1n=dc1n,
        e_alt_rest=e_alt,
        pi_c=pi_c,
        d_kl=d_kl,
        d_kl_raw=d_kl_raw,
        v_c=v_c,
        m_c=m_c,
        z_c=z_c,
        l_c=l_c,
        flags=flags,
    )
