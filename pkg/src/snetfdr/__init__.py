"""False-discovery-rate detection for sensor networks with domain-transformed p-values."""

from .distributions import (
    Beta,
    BivariateGaussian,
    DensityModel,
    Exponential,
    Gaussian,
    Mixture,
    Product,
    PValueLaw,
    Radial2D,
    Tabulated,
    Triangular,
    Uniform,
    UniformCube,
    parse_density,
)
from .metrics import ConfusionCounts, fdp, monte_carlo_estimate, order_stat_cdf, tally
from .procedures import bh_select, dtbh_select, uncorrected_select
from .protocol import ProtocolConfig, run_distributed, run_dynamic
from .pvalues import PValueVector, fold_transform, survival_pvalue
from .snet import Scenario, Sensing, simulate
from .transform import DomainTransform

__version__ = "0.1.0"
