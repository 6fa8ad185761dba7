"""Kac-Rice constants and Monte Carlo checks for critical points of isotropic Gaussian fields."""
from .amplitude import Amplitude
from .census import (CensusOptions, CriticalCensus, CriticalPoint, TestFunction,
                     default_options, find_critical_points, morse_index, weigh)
from .ensembles import SymmetricEnsemble, expected_abs_det, expected_abs_det_pair, sample_matrix
from .field import FieldRealization, Jet, evaluate_jet, sample_field
from .gaussian import CenteredGaussian, condition, density_at_zero, is_nondegenerate
from .kacrice import (OnePointDensity, QuadOptions, TwoPointProfile, VarianceConstants,
                      grad_pair_covariance, one_point_constant, two_point_density_hat,
                      two_point_density_tilde, two_point_profile, z_constant)
from .spectral import (KernelTable, SpectralMoments, angular_moment, grad_cross_cov, jet_gramian,
                       kernel_derivatives, radial_moment, spectral_moment_full, spectral_moments)

__version__ = "0.1.0"
