"""INCREASE-c on conformal outlier-detection p-values at reduced size."""

from bhadv.conformal import run_conformal_attack

rows = run_conformal_attack((1.0, 2.0, 3.0), (1, 5, 10), reps=100, master_seed=3)
print(f"{'a':>4} {'c':>3} {'before':>8} {'after':>8}")
for r in rows:
    print(f"{r['a']:4.1f} {r['c']:3d} {r['fdp_before']:8.4f} {r['fdp_after']:8.4f}")
