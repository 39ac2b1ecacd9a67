"""Multilevel inertial proximal optimization for composite objectives
``1/2 ||A x - z||^2 + lam ||W x||_1`` with Moreau-envelope-coherent coarse
corrections, plus an image-restoration benchmark harness."""

from .grids import (GridImage, DimensionError, as_grid, dot, norm2,
                    LinearMap, PowerMethodResult, power_method_norm,
                    adjoint_mismatch)
from .operators import (Psf1D, make_gaussian_psf, SeparableBlur, WaveletBasis,
                        dwt_forward, dwt_inverse, TransferPair, make_transfer,
                        restrict, prolong, coarsen_blur)
from .prox import (soft_threshold, L1SynthesisPrior, CompositeObjective,
                   prox_g, moreau_value, moreau_grad, grad_f, smoothed_grad,
                   objective_value, smoothed_objective_value)
from .solvers import (ad_momentum, MomentumSchedule, StopRule, SolverTrace,
                      fb_step, smoothed_gradient_step, fista_run,
                      CoarseSolverKind, CoarseRunResult, coarse_run,
                      coarse_tau, default_tau)
from .multilevel import (LevelSpec, Hierarchy, build_hierarchy, make_fine_level,
                         CoarseModel, build_coarse_model, coherence_residual,
                         coarse_correction, select_tau_bar, MmfistaConfig,
                         mmfista_run, correction_diagnostic, CycleDiagnostics)
from .harness import (DegradationSpec, degrade, snr_db, WienerResult,
                      wiener_init, ThresholdHit, threshold_times,
                      relative_time, synthetic_scene, run_benchmark,
                      BenchmarkReport, load_config, build_instance)

__version__ = "0.1.0"
