"""Quasi-Monte Carlo discretization of continuous frames in the plane."""
from .certify import (Certificate, FrameModel, certificate, dilation_uniform_certificate,
                      empirical_frame_bounds, find_certifiable_scale, schur_epsilon)
from .discrepancy import (CoverageError, DiscrepancyEstimate, anchored_discrepancy, decay_fit,
                          dilation_discrepancy, shift_discrepancy, star_discrepancy_unit)
from .functions import SmoothFn2D, anisotropic_gaussian, gaussian
from .gabor import (GaussianWindow, ambiguity, iterated_kernel, kernel_R, omega_direct,
                    omega_gaussian_closed, omega_numeric, stft_numeric)
from .lattice import (Lattice, PointSet, PointUnion, admissibility_margin, golden_lattice,
                      integer_lattice, make_lattice, parse_lattice_config)
from .quadrature import kh_bound, qmc_weights, quadrature_error
from .surd import QuadraticSurd, cf_partial_quotients

__version__ = "0.1.0"
