"""Adversarial robustness of the Benjamini-Hochberg procedure.

BH is viewed as a balls-into-bins process; the package provides the attacks
(INCREASE-c, MOVE-1), exact and Monte-Carlo bound evaluation, a replication
harness for the Gaussian z-score model, and a conformal outlier-detection
experiment.
"""

from .attack import PerturbationPlan, brute_force_1, candidate_sets, increase_c, k_plus_c, move_1
from .bh import RejectionOutcome, bh, bh_bins, bh_sorted, fdp
from .bounds import (
    AssumptionError,
    BoundReport,
    ballot_prob,
    k_plus_c_eq_c_prob,
    l_c_bound,
    reject_zero_pmf,
    thm1_rhs,
    thm3_bounds,
)
from .core import (
    BinLoads,
    BinSystem,
    LabeledPValues,
    SchemaError,
    TestLabel,
    assign_bin,
    compute_loads,
    prefix_load,
    read_pvalues_csv,
    write_pvalues_csv,
)
from .gaussmodel import GaussianAltModel, delta, delta_j, generate_instance
from .sim import SimConfig, SimResult, run_move1_table, run_paired, run_qsweep

__version__ = "0.1.0"

__all__ = [
    "AssumptionError",
    "BinLoads",
    "BinSystem",
    "BoundReport",
    "GaussianAltModel",
    "LabeledPValues",
    "PerturbationPlan",
    "RejectionOutcome",
    "SchemaError",
    "SimConfig",
    "SimResult",
    "TestLabel",
    "assign_bin",
    "ballot_prob",
    "bh",
    "bh_bins",
    "bh_sorted",
    "brute_force_1",
    "candidate_sets",
    "compute_loads",
    "delta",
    "delta_j",
    "fdp",
    "generate_instance",
    "increase_c",
    "k_plus_c",
    "k_plus_c_eq_c_prob",
    "l_c_bound",
    "move_1",
    "prefix_load",
    "read_pvalues_csv",
    "reject_zero_pmf",
    "run_move1_table",
    "run_paired",
    "run_qsweep",
    "thm1_rhs",
    "thm3_bounds",
    "write_pvalues_csv",
]
