"""Nash-equilibrium epidemic policies for multi-region stochastic SEIR games.

Solves coupled HJB systems by enhanced deep fictitious play: each stage
trains one BSDE-based best response per region planner against the
opponents' previous-stage policy networks.
"""

from .params import (GameParams, build_contact_matrix, drift, diffusion,
                     running_cost, vaccination_rate, recovery_rate,
                     ny_nj_pa_params)
from .montecarlo import TimeGrid, PathBatch, simulate_batch, estimate_costs
from .hamiltonian import hamiltonian_value, best_response, best_response_grid
from .nets import Mlp, save_mlp, load_mlp, CheckpointError
from .bsde import StageProblem, TorchGame, stage_loss, train_best_response, driver_terms
from .dfp import run_enhanced_dfp, convergence_metric, save_checkpoint, load_checkpoint
from .estimator import NashPolicySolver

__version__ = "0.1.0"

__all__ = [
    "GameParams", "build_contact_matrix", "drift", "diffusion",
    "running_cost", "vaccination_rate", "recovery_rate", "ny_nj_pa_params",
    "TimeGrid", "PathBatch", "simulate_batch", "estimate_costs",
    "hamiltonian_value", "best_response", "best_response_grid",
    "Mlp", "save_mlp", "load_mlp", "CheckpointError",
    "StageProblem", "TorchGame", "stage_loss", "train_best_response",
    "driver_terms",
    "run_enhanced_dfp", "convergence_metric", "save_checkpoint",
    "load_checkpoint", "NashPolicySolver",
]
