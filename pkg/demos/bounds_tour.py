"""Closed-form quantities next to their Monte-Carlo counterparts."""

import numpy as np

from bhadv.bounds import EXACT, ballot_prob, delta_c_mc, l_c_bound, reject_zero_pmf, thm3_bounds
from bhadv.gaussmodel import GaussianAltModel

print("ballot: P(every prefix of n cells holds fewer than its length), x balls")
for n, x in ((5, 2), (10, 3), (10, 9)):
    print(f"  n={n:2d} x={x}: {ballot_prob(n, x):.4f}  (1 - x/n = {1 - x / n:.4f})")

pmf = reject_zero_pmf(50, 0.1, np.arange(51))
print(f"rejection count under the global null, N=50, q=0.1: P(0)={pmf[0]:.4f}, "
      f"P(1)={pmf[1]:.4f}, mean {(np.arange(51) * pmf).sum():.4f}")

for mu in (0.0, 0.5, 1.0):
    model = GaussianAltModel(mu, 0.1, 1000, 900)
    est = delta_c_mc(model, 1, 2000, seed=1)
    lower = l_c_bound(model, 1)
    lower_exact = l_c_bound(model, 1, EXACT)
    upper, _ = thm3_bounds(model, 1)
    print(
        f"mu1={mu}: L_1 {lower.l_c:.4f} (exact moment {lower_exact.l_c:.4f}) "
        f"<= Delta_1 {est.mean:.4f} +- {2 * est.std_error:.4f} <= {upper:.4f}"
    )
