"""1D singularly perturbed convection-diffusion workbench.

Five neural loss formulations (collocation and Ritz-energy variants, with
and without the symmetrizing change of variable and domain rescaling), a
P1 finite-element baseline, a closed-form reference solution, and a sweep
harness over diffusivity, sample count, sampling scheme and float
precision.
"""

from .fem import assemble, eval_fem, fem_predictor
from .formulations import (Formulation, LossBreakdown, SamplerMismatch,
                           TrainedModel, discrete_loss, discrete_loss_grad,
                           loss_of_callable, reconstruct)
from .metrics import ErrorReport, compute_errors, test_grid
from .network import (Architecture, EvalTriple, NetworkParams, forward_batch,
                      forward_triple, grad_params, init_params,
                      params_from_vector)
from .optimizer import LbfgsConfig, OptimResult, minimize
from .problem import (AnalyticSolution, CoercivityReport, DomainError,
                      OverflowGuard, ProblemSpec, SingularSystem, ZeroDrift,
                      solve_analytic)
from .runner import (RunConfig, RunRecord, SweepConfig, default_epsilon_grid,
                     run_single, run_sweep)
from .sampling import QuadratureRule, exponential_rule, random_rule, uniform_rule

__version__ = "0.1.0"
