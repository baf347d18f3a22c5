"""Simulation and numerical checks for the cylindrical symmetric alpha-stable process.

The process ``X = (X^(1), ..., X^(d))`` has independent one-dimensional
symmetric alpha-stable coordinates, so it jumps along one coordinate axis at
a time.  The modules cover:

``stable_core``     1-D densities, sampler, product kernel and envelope
``geometry``        signed-distance domains and the figure catalog
``connectivity``    rook-move components and the (H_gamma) swap-chain check
``fraclap``         fractional Laplacian of power and hyperplane test functions
``simulator``       killed-path Monte Carlo (exit times, survival, exit law, Green)
``heatkernel``      Dirichlet kernel estimators, lambda_1 fit, bound diagnostics
``experiments``     named experiment pipelines and report writing
``svg``             dependency-free SVG plots used by the experiments
``cli``             the ``cylstable`` command
"""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .stable_core import (
    AlphaParam,
    bound_envelope,
    cd_alpha,
    density_1d,
    levy_density_axis,
    product_kernel,
    sample_increment,
    sample_increments,
)
from .rng import RandomStream, stream
from .geometry import Domain, Primitive, ball_domain, contains, load_domain, paper_domain, signed_distance
from .connectivity import (
    RookGrid,
    check_hgamma_domain,
    check_hgamma_pair,
    rook_components,
    same_class,
)
from .fraclap import Hyperplane, ctest_constant, cyl_op_hyperplane, frac_lap_power, find_sign_change
from .simulator import (
    SimConfig,
    SimResult,
    exit_distribution,
    mean_exit_time,
    occupation_green,
    simulate_paths,
    survival_probability,
)
from .heatkernel import (
    KernelEstimate,
    bound_ratio_diagnostics,
    estimate_lambda1,
    estimate_pd,
)
from .experiments import ExperimentConfig, ExperimentReport, experiment_names, run_experiment
