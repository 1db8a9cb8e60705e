"""Gaussian z-score model: nulls ``z ~ N(0, 1)``, alternatives ``z ~ N(mu1, 1)``.

A test's p-value is the upper-tail probability ``p = 1 - Phi(z)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .core import LabeledPValues


def std_normal_cdf(x):
    x = np.asarray(x, dtype=np.float64)
    if not np.isfinite(x).all():
        raise ValueError("normal CDF needs finite input")
    out = special.ndtr(x)
    return float(out) if out.ndim == 0 else out


def std_normal_quantile(u):
    u = np.asarray(u, dtype=np.float64)
    if not ((u > 0) & (u < 1)).all():
        raise ValueError("normal quantile needs u in (0, 1)")
    out = special.ndtri(u)
    return float(out) if out.ndim == 0 else out


def z_to_p(z):
    """Upper-tail p-value; computed as ``Phi(-z)`` to keep precision for large z."""
    return special.ndtr(-np.asarray(z, dtype=np.float64))


def p_to_z(p):
    """Inverse of :func:`z_to_p`; ``p = 1`` maps to ``-inf`` and ``p = 0`` to ``+inf``."""
    return -special.ndtri(np.asarray(p, dtype=np.float64))


@dataclass(frozen=True)
class GaussianAltModel:
    mu1: float
    q: float
    n: int
    n0: int
    sigma1: float = 1.0

    def __post_init__(self):
        if self.mu1 < 0 or not math.isfinite(self.mu1):
            raise ValueError(f"mu1 must be finite and >= 0, got {self.mu1}")
        if self.sigma1 != 1.0:
            raise ValueError("only unit alternative variance is supported")
        if not 0 < self.q < 1:
            raise ValueError(f"q must lie in (0, 1), got {self.q}")
        if self.n < 1 or not 0 <= self.n0 <= self.n:
            raise ValueError(f"need 0 <= n0 <= n and n >= 1, got n={self.n}, n0={self.n0}")

    @property
    def n1(self) -> int:
        return self.n - self.n0

    def alt_cdf(self, t):
        """``P1(p <= t)`` for an alternative p-value."""
        t = np.asarray(t, dtype=np.float64)
        # p <= t  <=>  z >= Phi^{-1}(1 - t)
        return special.ndtr(self.mu1 - p_to_z(t))

    def alt_bin_probs(self) -> np.ndarray:
        """Alternative mass of each bin ``1..N`` (bin 1 closed at 0)."""
        edges = np.arange(self.n + 1) * self.q / self.n
        return np.diff(self.alt_cdf(edges))

    def alt_tail_prob(self) -> float:
        """``P1(p > q)``, the alternative mass beyond the bins."""
        return float(1 - self.alt_cdf(self.q))


@dataclass(frozen=True)
class InstanceDraw:
    pv: LabeledPValues
    z: np.ndarray


def delta(model: GaussianAltModel) -> float:
    """Excess alternative mass in ``[0, q]`` over the uniform ``q``.

    ``(1 - q) - Phi((Phi^{-1}(1 - q) - mu1) / sigma1)``, which equals the sum
    of :func:`delta_j` over all bins.
    """
    q, mu = model.q, model.mu1
    if mu == 0:
        return 0.0  # alternatives are uniform; skip the lossy Phi round trip
    return (1 - q) - std_normal_cdf((std_normal_quantile(1 - q) - mu) / model.sigma1)


def delta_j(model: GaussianAltModel, j=None):
    """Excess alternative mass of bin ``j`` over the uniform ``q/N``.

    With ``j=None`` returns the whole vector for ``j = 1..N``.
    """
    n, q = model.n, model.q
    if j is None:
        js = np.arange(1, n + 1)
    else:
        js = np.asarray(j)
        if ((js < 1) | (js > n)).any():
            raise ValueError(f"bin index must lie in [1, {n}]")
    if model.mu1 == 0:
        out = np.zeros(js.shape)
        return float(out) if out.ndim == 0 else out
    lo = (js - 1) * q / n
    hi = js * q / n
    # upper-tail form: Phi(za - mu) - Phi(zb - mu) == ndtr(mu - zb) - ndtr(mu - za)
    za = p_to_z(lo)  # +inf for j = 1
    zb = p_to_z(hi)
    mass = special.ndtr(model.mu1 - zb) - special.ndtr(model.mu1 - za)
    out = mass - q / n
    return float(out) if np.ndim(out) == 0 else out


def generate_instance(model: GaussianAltModel, rng: np.random.Generator) -> InstanceDraw:
    z = rng.standard_normal(model.n)
    z[model.n0 :] += model.mu1
    is_null = np.zeros(model.n, dtype=bool)
    is_null[: model.n0] = True
    pv = LabeledPValues(np.arange(model.n), z_to_p(z), is_null)
    return InstanceDraw(pv, z)
