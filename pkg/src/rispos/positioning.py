"""Estimator classes with a scikit-learn style interface over the functional pipeline.

Both classes are stateless with respect to training data: ``fit`` only
validates the configuration, since every quantity the estimators need comes
from the known scenario.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin

from .estimator import SearchConfig, estimate_all
from .pipeline import METHODS, locate, search_for
from .scenario import Scenario
from .validation import check_observations, check_positive_int, check_scenario


class ChannelParameterEstimator(TransformerMixin, BaseEstimator):
    """Map observation sets to flattened channel-parameter vectors.

    Parameters
    ----------
    scenario : Scenario
        Known geometry, array sizes and noise level.
    grid_size : int
        Coarse-grid points per scalar search.
    refine : bool
        Polish coarse maxima with bounded Brent steps.
    matching : {"energy", "delay"}
        How delay peaks are assigned to paths.
    """

    def __init__(self, scenario: Scenario | None = None, grid_size: int = 2048, refine: bool = True,
                 matching: str = "energy"):
        self.scenario = scenario
        self.grid_size = grid_size
        self.refine = refine
        self.matching = matching

    def _search(self):
        return SearchConfig(grid_size=check_positive_int(self.grid_size, "grid_size"),
                            refine=bool(self.refine), matching=self.matching)

    def fit(self, X=None, y=None):
        self.scenario_ = check_scenario(self.scenario if self.scenario is not None else Scenario())
        self.search_ = self._search()
        self.n_features_out_ = 7 + 5 * self.scenario_.n_reflections
        return self

    def estimate(self, X) -> list:
        """Full :class:`EstimatedChannelParams` objects, one per observation set."""
        if not hasattr(self, "scenario_"):
            self.fit()
        return [estimate_all(o, self.scenario_, self.search_) for o in check_observations(X, self.scenario_)]

    def transform(self, X) -> np.ndarray:
        return np.stack([e.eta.to_vector() for e in self.estimate(X)])


class RISPositioner(RegressorMixin, BaseEstimator):
    """Predict UE positions from observation sets.

    Parameters
    ----------
    scenario : Scenario
        Known geometry, array sizes and noise level.
    method : str
        One of ``proposed``, ``delay_based``, ``exip``, ``geometric_mapping``, ``direct_only``.
    grid_size : int
        Coarse-grid points per scalar search.
    """

    def __init__(self, scenario: Scenario | None = None, method: str = "proposed", grid_size: int = 2048):
        self.scenario = scenario
        self.method = method
        self.grid_size = grid_size

    def fit(self, X=None, y=None):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        self.scenario_ = check_scenario(self.scenario if self.scenario is not None else Scenario())
        self.search_ = search_for(self.method, SearchConfig(grid_size=check_positive_int(self.grid_size, "grid_size")))
        return self

    def predict_full(self, X) -> list:
        """:class:`PositionEstimate` objects (position plus covariance bound)."""
        if not hasattr(self, "scenario_"):
            self.fit()
        out = []
        for obs in check_observations(X, self.scenario_):
            est = estimate_all(obs, self.scenario_, self.search_)
            out.append(locate(est, self.scenario_, self.method))
        return out

    def predict(self, X) -> np.ndarray:
        return np.stack([p.p_hat for p in self.predict_full(X)])

    def score(self, X, y, sample_weight=None):
        """Negative RMSE of the predicted positions (larger is better)."""
        err = self.predict(X) - np.asarray(y, float).reshape(-1, 3)
        return -float(np.sqrt(np.mean(np.sum(err ** 2, axis=1))))
