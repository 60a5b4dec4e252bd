"""Power allocation for compute-and-forward over fading multiple-access channels."""
from .asymmetric import (
    NlpConfig,
    algo_a0_asym,
    algo_a1_asym,
    algo_a2_asym,
    algo_a3_asym,
    dp2_objective_grad,
    project_budget,
    solve_dp2,
)
from .config import ExperimentConfig, load_config, preset, write_config
from .continuous import (
    ContinuousChannelModel,
    ShapingConfig,
    algo_a0_continuous,
    algo_a1_continuous,
    algo_iterative_continuous,
    expected_power,
    p_continuous,
    shape_domain,
    solve_cp2,
)
from .errors import ArgumentError, CapacityError, ConfigError, SolverError
from .experiments import SweepRow, report_thresholds, run_sweep
from .rates import (
    DiscreteChannelModel,
    SolveReport,
    asymmetric_rate_unclamped,
    classify_states,
    expected_rate,
    misalignment,
    order_criterion,
    symmetric_rate_unclamped,
)
from .symmetric import (
    BisectionConfig,
    algo_a0,
    algo_a1,
    algo_a2,
    algo_a3,
    bisect_multiplier,
    p_kkt,
    solve_dp2s,
    threshold_pbar,
)

__version__ = "0.1.0"
