"""Downlink coverage of multi-connectivity C-V2X networks on a 1-D road.

Closed-form stochastic-geometry coverage evaluated by quadrature, an
independent Monte Carlo simulator, and the sweeps that compare the two.
"""

__version__ = "0.1.0"

from .analytic import (
    AnalyticModel,
    QuadratureSpec,
    conditional_coverage_kernel,
    coverage_curve,
    coverage_probability,
    interference_laplace,
    joint_distance_pdf,
    nth_nearest_pdf,
)
from .channel import (
    NetworkParams,
    dbm_to_watts,
    pathloss_gain,
    received_power,
    sample_rayleigh_power,
    sample_shadowing_linear,
    sinr,
    watts_to_dbm,
)
from .montecarlo import (
    CoverageEstimate,
    DropResult,
    SimulationConfig,
    estimate_coverage,
    estimate_laplace,
    run_drop,
    simulate_drops,
)
from .point_process import (
    Deployment,
    ServingSet,
    apply_displacement,
    sample_ppp_1d,
    select_serving_set,
    transformed_intensity,
)
