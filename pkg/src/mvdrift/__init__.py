"""Interacting-particle simulation and semiparametric drift estimation for
mean-field SDEs: invariant-density oracle, kernel estimation of the
log-density derivative, minimum-contrast coefficient fits, Fourier
deconvolution of the interaction component, and a Monte Carlo harness."""

from ._kernels import BACKEND as KERNEL_BACKEND
from .grids import GridFunction, GridMismatchError
from .model import (AlphaCoefficients, BetaSpec, DriftSpec, ModelShape,
                    NonIdentifiableFrequencyError, SpecError, a_from_alpha,
                    alpha_from_a, convexity_certificate, eval_drift_parts)
from .simulator import (BlowUpError, Mu0, ParticleEnsemble, SimConfig,
                        drift_fast, drift_naive, euler_step, project, simulate)
from .invariant import (ConvergenceError, InvariantSolution, alpha_oracle,
                        fourier, log_density_derivative, moments,
                        normalization_constant, psi_oracle, sample_from_density,
                        solve_invariant, solve_invariant_full)
from .kde import (EstimatorConfig, KernelSpec, default_bandwidths, default_delta,
                  density_derivative_estimate, density_estimate,
                  effective_sample_size, log_derivative_estimate, make_kernel)
from .pipeline import (ContrastSystem, DeconvolutionResult, EstimationResult,
                       IllConditionedError, WeightFunction, contrast_matrix,
                       deconvolve, empirical_cf, empirical_moments, fit_alpha,
                       oracle_estimator_config, parametric_log_derivative,
                       psi_estimate, run_pipeline, weight_function)
from .harness import (ExperimentPlan, MetricsRow, l2_grid_error, rate_report,
                      run_experiment, tail_functional_phi,
                      wasserstein1_empirical, wasserstein1_to_density)

__version__ = "0.1.0"
