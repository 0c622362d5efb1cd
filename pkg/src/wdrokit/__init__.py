"""Desk-scale Wasserstein-DRO certificates and distributional attacks for
small ReLU and smooth-activation classifiers."""

from .attack import (AdvDistribution, AttackConfig, EvalResult, evaluate,
                     pgd_baseline, wda)
from .cells import (CellPolyhedron, ConeBallResult, RecessionCone, build_cell,
                    cell_feasible, cell_interior_point,
                    max_linear_over_cone_ball)
from .certify import (CertificateReport, LowerBoundResult, LowerBoundWitness,
                      MaskInventory, SmoothBounds, UpperBoundResult,
                      WorstCaseDistribution, build_worst_case_distribution,
                      certificate_report, check_tightness, enumerate_masks,
                      lower_bound_l, practical_lower_bound_lN, smooth_bounds,
                      upper_bound_L)
from .errors import (AllDegenerate, CellEscape, DegeneratePoint,
                     DimensionMismatch, DimensionTooLarge, EmptyInventory,
                     LabelMassMismatch, LpError, NoRootSample, ShapeMismatch,
                     ToolkitError, WrongActivation)
from .harness import (ConvergenceSeries, DataSpec, ExperimentConfig,
                      ModelSpec, gen_data, gen_model, load_data,
                      remark1_oracle, run_convergence, run_pipeline,
                      save_data)
from .linalg import (NormKind, dual_norm_maximizer, op_norm, project_ball,
                     vec_norm)
from .losses import (LossKind, asymptotic_rate, loss, loss_logit_gradient,
                     sensitivity_factor)
from .lp import LpProblem, LpSolution, solve_lp
from .network import (ActivationKind, LabeledSample, Mask, Mlp, forward,
                      jacobian, load_model, mask_at, masked_jacobian,
                      pre_activations, save_model)
from .transport import DiscreteDist, canonical_cost, exact_w1_small

__version__ = "0.1.0"
