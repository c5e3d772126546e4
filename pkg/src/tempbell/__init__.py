"""Temporal Bell inequalities for a single two-valued system.

Joint-reality hidden-variable sampling, qubit sequential measurement, the
count / probability / expectation inequalities, and a search for the
configurations that violate them most.
"""

__version__ = "0.1.0"

from .errors import ConfigError, InsufficientStatistics
from .geometry import Config, Direction, Setting, dot, eigen_amplitudes, make_direction
from .inequalities import (
    InequalityReport,
    eval_counts_6,
    eval_expect_10,
    eval_prob_7,
    eval_prob_8,
    quantum_lhs_16,
    quantum_lhs_18,
    significance,
)
from .lhv import (
    JointReality,
    RealityDistribution,
    counting_identity_ratio,
    lhv_pair_prob,
    lhv_run,
    sample_reality,
    simulate_lhv,
)
from .optimizer import OptimizationResult, grid_search, local_refine, verify_reference_configs
from .quantum import (
    QubitState,
    StatePrep,
    collapse,
    expected_value_exact,
    from_amplitudes,
    measure_prob,
    pair_prob_exact,
    simulate_quantum,
)
from .records import CountTable, ProbTable, RunBatch, RunRecord
