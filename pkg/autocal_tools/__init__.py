from .tweedie import PowerParam
from .tweedie import TweedieClass
from .tweedie import classify
from .tweedie import variance_function
from .tweedie import psi
from .tweedie import unit_loss
from .tweedie import unit_loss_gradient
from .tweedie import mean_deviance
from .simdata import SimConfig
from .simdata import simulate
from .simdata import mean_univariate
from .simdata import mean_bivariate
from .simdata import distort
from .learners import BasisSpec
from .learners import FeatureBasis
from .learners import design_matrix
from .learners import fit_glm
from .learners import fit_glm_dataset
from .learners import predict_glm
from .learners import fit_boost
from .learners import predict_boost
from .autocal import Kernel
from .autocal import BandwidthSpec
from .autocal import CalibrationMap
from .autocal import autocalibrate
from .autocal import calibration_curve
from .autocal import global_balance_correction
from .ordering import lower_partial_moment
from .ordering import lpm_curve
from .ordering import psi_mean
from .ordering import check_dominance
from .ordering import deviance_decomposition
from .ordering import stop_loss
from .ordering import convex_order_check
from .curves import ecdf
from .curves import quantile
from .curves import concentration_curve
from .curves import cc_density
from .curves import quantile_sets
from .curves import bias
from .curves import empirical_poisson_loss
from .curves import spearman
from .curves import alpha_sweep
from .portfolio import Dataset
from .portfolio import ingest
from .portfolio import split_indices
from .logprint import LogPrint
from .cli import RunConfig
from .cli import run_pipeline
