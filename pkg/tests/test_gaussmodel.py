import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bhadv.bounds import binom_pmf
from bhadv.core import BinSystem, compute_loads
from bhadv.gaussmodel import (
    GaussianAltModel,
    delta,
    delta_j,
    generate_instance,
    p_to_z,
    std_normal_cdf,
    std_normal_quantile,
    z_to_p,
)

mpmath.mp.dps = 40


def _mp_cdf(x):
    return mpmath.ncdf(mpmath.mpf(x))


@pytest.mark.parametrize("x", [-37.0, -20.0, -8.5, -3.0, -1e-3, 0.0, 0.7, 1.281552, 5.0, 8.0])
def test_cdf_against_mpmath(x):
    got = std_normal_cdf(x)
    assert abs(mpmath.mpf(got) / _mp_cdf(x) - 1) < 5e-13


def test_cdf_far_tail_underflows_gracefully():
    assert 0 <= std_normal_cdf(-40.0) < 1e-300
    assert std_normal_cdf(40.0) == 1.0


@given(st.floats(1e-300, 1 - 1e-16))
@settings(max_examples=300)
def test_quantile_inverts_cdf_against_mpmath(u):
    x = std_normal_quantile(u)
    # derivative-scaled residual: |Phi(x) - u| / phi(x) bounds the error in x
    resid = (_mp_cdf(x) - mpmath.mpf(u)) / mpmath.npdf(x)
    assert abs(resid) <= 1e-12 * max(1.0, abs(x))


def test_domain_errors():
    for u in (0.0, 1.0, -0.5, 1.5, float("nan")):
        with pytest.raises(ValueError):
            std_normal_quantile(u)
    for x in (float("inf"), float("nan")):
        with pytest.raises(ValueError):
            std_normal_cdf(x)


def test_cdf_symmetry_and_vector_form():
    xs = np.linspace(-6, 6, 101)
    np.testing.assert_allclose(std_normal_cdf(xs) + std_normal_cdf(-xs), 1.0, rtol=0, atol=1e-15)


def test_p_z_round_trip():
    # below z = -5 the p-value is within 1e-6 of 1 and float spacing dominates
    z = np.linspace(-5, 30, 200)
    np.testing.assert_allclose(p_to_z(z_to_p(z)), z, rtol=1e-12, atol=1e-9)
    assert p_to_z(1.0) == -np.inf and p_to_z(0.0) == np.inf


def test_delta_examples():
    assert delta(GaussianAltModel(0.0, 0.1, 10, 9)) == 0.0
    ref = 0.9 - mpmath.ncdf(mpmath.sqrt(2) * mpmath.erfinv(2 * mpmath.mpf("0.9") - 1) - 1)
    got = delta(GaussianAltModel(1.0, 0.1, 10, 9))
    assert abs(got - float(ref)) < 1e-14
    assert abs(got - 0.289130) < 1e-4  # hand-rounded reference value


def test_delta_j_zero_at_null_and_sums_to_delta():
    assert np.all(delta_j(GaussianAltModel(0.0, 0.3, 40, 30)) == 0)
    for mu in (0.25, 1.0, 3.0):
        m = GaussianAltModel(mu, 0.1, 200, 180)
        assert abs(delta_j(m).sum() - delta(m)) < 1e-12


def test_delta_j_against_mpmath():
    m = GaussianAltModel(2.0, 0.1, 1000, 900)
    dj = delta_j(m)
    for j in (1, 2, 10, 500, 1000):
        lo, hi = mpmath.mpf(j - 1) * m.q / m.n, mpmath.mpf(j) * m.q / m.n
        # P1(lo < p <= hi) = P(Z >= Phi^-1(1-hi) - mu) - P(Z >= Phi^-1(1-lo) - mu)
        def upper(t):
            if t == 0:
                return mpmath.mpf(0)
            z = mpmath.sqrt(2) * mpmath.erfinv(1 - 2 * t)
            return 1 - mpmath.ncdf(z - m.mu1)
        ref = upper(hi) - upper(lo) - m.q / m.n
        assert abs(dj[j - 1] - float(ref)) < 1e-13
    with pytest.raises(ValueError):
        delta_j(m, 0)
    assert delta_j(m, 3) == dj[2]


def test_total_probability():
    for mu in (0.0, 0.5, 2.0):
        m = GaussianAltModel(mu, 0.2, 50, 40)
        total = m.alt_bin_probs().sum() + m.alt_tail_prob()
        assert abs(total - 1) < 1e-9
        np.testing.assert_allclose(m.alt_bin_probs(), m.q / m.n + delta_j(m), atol=1e-15)


def test_model_validation():
    with pytest.raises(ValueError):
        GaussianAltModel(-1.0, 0.1, 10, 9)
    with pytest.raises(ValueError):
        GaussianAltModel(1.0, 0.1, 10, 11)
    with pytest.raises(ValueError):
        GaussianAltModel(1.0, 0.1, 10, 9, sigma1=2.0)


def test_instance_shape_and_labels():
    m = GaussianAltModel(2.0, 0.1, 30, 20)
    draw = generate_instance(m, np.random.default_rng(0))
    assert draw.pv.n == 30 and draw.pv.n0 == 20
    np.testing.assert_allclose(draw.pv.p, z_to_p(draw.z))


def test_empirical_bin_frequencies_match_formula():
    m = GaussianAltModel(1.5, 0.5, 10, 0)
    rng = np.random.default_rng(5)
    bins = BinSystem(m.n, m.q)
    reps = 4000
    counts = np.zeros(m.n)
    for _ in range(reps):
        counts += compute_loads(generate_instance(m, rng).pv, bins).total
    freq = counts / (reps * m.n)
    prob = m.alt_bin_probs()
    se = np.sqrt(prob * (1 - prob) / (reps * m.n))
    assert np.all(np.abs(freq - prob) <= 3 * se + 1e-12)


def test_null_counts_are_binomial():
    # nulls land in the bins w.p. q and in the tail w.p. 1 - q
    m = GaussianAltModel(1.0, 0.1, 200, 150)
    rng = np.random.default_rng(8)
    bins = BinSystem(m.n, m.q)
    tails = np.array([compute_loads(generate_instance(m, rng).pv, bins).tail_null for _ in range(3000)])
    in_bins = m.n0 - tails
    b = np.arange(m.n0 + 1)
    pmf = binom_pmf(m.n0, m.q)
    mean, var = (b * pmf).sum(), (b * b * pmf).sum() - (b * pmf).sum() ** 2
    assert abs(in_bins.mean() - mean) < 3 * np.sqrt(var / len(in_bins))
    assert abs(tails.mean() - m.n0 * (1 - m.q)) < 3 * np.sqrt(var / len(tails))
