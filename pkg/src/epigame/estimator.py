"""Scikit-learn style facade over the fictitious-play solver.

``fit`` runs enhanced deep fictitious play for the configured game;
``predict`` evaluates the learned equilibrium policies at (t, state)
query points.  The estimator composes with sklearn tooling (get_params /
set_params / clone).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import dfp
from . import params as mp
from .bsde import solver_features_np


class NashPolicySolver(BaseEstimator):
    """Solves an N-region SEIR game and exposes the equilibrium policies.

    Parameters mirror the solver configuration; ``game`` is a
    :class:`epigame.GameParams` (default: the NY/NJ/PA case study).
    """

    def __init__(self, game=None, grid_steps=180, stages=10,
                 iters_per_stage=200, batch_size=64, tau=1.0,
                 learning_rate=3e-4, hidden=(32, 32, 32), seed=0,
                 tolerance=1e-3, jitter=0.1):
        self.game = game
        self.grid_steps = grid_steps
        self.stages = stages
        self.iters_per_stage = iters_per_stage
        self.batch_size = batch_size
        self.tau = tau
        self.learning_rate = learning_rate
        self.hidden = hidden
        self.seed = seed
        self.tolerance = tolerance
        self.jitter = jitter

    def _game(self) -> mp.GameParams:
        return self.game if self.game is not None else mp.ny_nj_pa_params()

    def fit(self, X=None, y=None):
        """Run the stage loop from an initial compartment state.

        X: optional (N, 4) initial state; defaults to a near-disease-free
        start (E = 2e-4, I = 1e-4 per region).
        """
        game = self._game()
        if X is None:
            n = game.num_regions
            X = np.column_stack([np.full(n, 1.0 - 3e-4), np.full(n, 2e-4),
                                 np.full(n, 1e-4), np.zeros(n)])
        X = np.asarray(X, dtype=float)
        if X.shape != (game.num_regions, 4):
            raise ValueError(f"X must have shape ({game.num_regions}, 4)")
        results = dfp.run_enhanced_dfp(
            game, X, grid_steps=self.grid_steps, stages=self.stages,
            iters_per_stage=self.iters_per_stage, batch_size=self.batch_size,
            tau=self.tau, learning_rate=self.learning_rate,
            hidden=list(self.hidden), seed=self.seed,
            tolerance=self.tolerance, jitter=self.jitter)
        final = results[-1]
        self.v_nets_ = final.v_nets
        self.alpha_nets_ = final.alpha_nets
        self.metric_history_ = [r.metric for r in results]
        self.n_stages_ = len(results)
        return self

    def predict(self, X):
        """Equilibrium controls at query points.

        X: (n_samples, 3N + 1) rows ``(t, S^1..S^N, E^1..E^N, I^1..I^N)``
        with t in days.  Returns (n_samples, 2N) controls ordered
        ``(ell^1, h^1, ..., ell^N, h^N)``.
        """
        check_is_fitted(self, "alpha_nets_")
        game = self._game()
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != 3 * game.num_regions + 1:
            raise ValueError(f"X must be (n_samples, {3 * game.num_regions + 1})")
        inp = np.stack([solver_features_np(row[0] / game.horizon, row[1:])
                        for row in X])
        out = np.empty((X.shape[0], 2 * game.num_regions))
        for n, net in enumerate(self.alpha_nets_):
            out[:, 2 * n:2 * n + 2] = net.forward_np(inp)
        return out
