"""Synthesis and simulation toolkit for ratio-optimal linear control.

The package synthesizes controllers that minimize the worst-case ratio of
incurred quadratic cost to the clairvoyant (noncausal) optimal cost, by
reducing the ratio problem to disturbance attenuation on a doubled synthetic
plant driven by a whitened disturbance.  Alongside the ratio-optimal
synthesis it provides the classical baselines (LQR with and without
disturbance feedforward, fixed-level attenuation), clairvoyant offline
solves, gamma bisection, time-domain simulation, frequency-domain analysis,
and a receding-horizon nonlinear pendulum benchmark.
"""

from .model import (
    DenseOperators,
    LtiPlant,
    LtvPlant,
    build_dense_operators,
    inv_sqrt_pd,
    load_bundled_plant,
    normalize_control_weight,
    plant_from_json_dict,
    plant_to_json_dict,
    sqrt_psd,
)
from .riccati import (
    RiccatiFixedPoint,
    RiccatiSchedule,
    Verdict,
    dare_fixed_point,
    hinf_backward,
    inertia,
    is_stable,
    pbh_detectable,
    pbh_stabilizable,
    spectral_radius,
)
from .factorization import (
    FactorizationError,
    SpectralFactor,
    SyntheticSystem,
    SyntheticSystemFH,
    WhiteningSchedule,
    WPrimeFilter,
    build_synthetic,
    dense_delta,
    delta_inv_transfer,
    delta_transfer,
    spectral_factor_ih,
    whitening_fh,
    wprime_run,
    wprime_step,
)
from .controllers import (
    CompetitiveController,
    ControllerState,
    Infeasible,
    OfflineController,
    StateFeedbackController,
    ZeroController,
    control_step,
    controller_from_json_dict,
    controller_to_json_dict,
    offline_optimal,
    synth_competitive,
    synth_h2_ih,
    synth_hinf,
)
from .search import (
    GammaSearchResult,
    min_gamma,
    min_gamma_competitive,
    min_gamma_hinf,
)
from .sim import (
    ComparisonResult,
    DisturbanceSpec,
    RolloutResult,
    compare,
    cost_ratio,
    generate,
    rollout,
    write_comparison_json,
    write_trace_csv,
)
from .freq import (
    ClosedLoop,
    closed_loop,
    extremal_dc,
    peak_gain,
    per_freq_cr,
    sigma_max,
    sweep,
    transfer_at,
    write_sweep_csv,
)
from .mpc import (
    MpcInfeasibleError,
    PendulumParams,
    PendulumScenario,
    RelinearizingController,
    clairvoyant_comparator_run,
    linearize_pendulum,
    mpc_rollout,
    pendulum_step,
    run_pendulum,
    run_scenario,
    scenario_from_json_dict,
    scenario_to_json_dict,
)

__version__ = "0.1.0"

__all__ = [
    "DenseOperators",
    "LtiPlant",
    "LtvPlant",
    "build_dense_operators",
    "inv_sqrt_pd",
    "load_bundled_plant",
    "normalize_control_weight",
    "plant_from_json_dict",
    "plant_to_json_dict",
    "sqrt_psd",
    "RiccatiFixedPoint",
    "RiccatiSchedule",
    "Verdict",
    "dare_fixed_point",
    "hinf_backward",
    "inertia",
    "is_stable",
    "pbh_detectable",
    "pbh_stabilizable",
    "spectral_radius",
    "FactorizationError",
    "SpectralFactor",
    "SyntheticSystem",
    "SyntheticSystemFH",
    "WhiteningSchedule",
    "WPrimeFilter",
    "build_synthetic",
    "dense_delta",
    "delta_inv_transfer",
    "delta_transfer",
    "spectral_factor_ih",
    "whitening_fh",
    "wprime_run",
    "wprime_step",
    "CompetitiveController",
    "ControllerState",
    "Infeasible",
    "OfflineController",
    "StateFeedbackController",
    "ZeroController",
    "control_step",
    "controller_from_json_dict",
    "controller_to_json_dict",
    "offline_optimal",
    "synth_competitive",
    "synth_h2_ih",
    "synth_hinf",
    "GammaSearchResult",
    "min_gamma",
    "min_gamma_competitive",
    "min_gamma_hinf",
    "ComparisonResult",
    "DisturbanceSpec",
    "RolloutResult",
    "compare",
    "cost_ratio",
    "generate",
    "rollout",
    "write_comparison_json",
    "write_trace_csv",
    "ClosedLoop",
    "closed_loop",
    "extremal_dc",
    "peak_gain",
    "per_freq_cr",
    "sigma_max",
    "sweep",
    "transfer_at",
    "write_sweep_csv",
    "MpcInfeasibleError",
    "PendulumParams",
    "PendulumScenario",
    "RelinearizingController",
    "clairvoyant_comparator_run",
    "linearize_pendulum",
    "mpc_rollout",
    "pendulum_step",
    "run_pendulum",
    "run_scenario",
    "scenario_from_json_dict",
    "scenario_to_json_dict",
    "__version__",
]
