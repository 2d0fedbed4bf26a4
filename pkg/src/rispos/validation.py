"""Input checks shared by the estimator classes and the experiment runner."""
from __future__ import annotations

import numpy as np

from .exceptions import DimensionMismatch
from .signal import ObservationSet


def check_scenario(scenario):
    from .scenario import Scenario

    if not isinstance(scenario, Scenario):
        raise TypeError(f"expected a Scenario, got {type(scenario).__name__}")
    return scenario


def check_observation(obs, scenario, sigma2_eff: float | None = None) -> ObservationSet:
    """Coerce ``obs`` (ObservationSet or ``(K, D, N)`` array) and check it against ``scenario``."""
    if not isinstance(obs, ObservationSet):
        arr = np.asarray(obs)
        if not np.iscomplexobj(arr) and not np.issubdtype(arr.dtype, np.number):
            raise TypeError("observations must be numeric")
        obs = ObservationSet(arr, scenario.sigma2_eff if sigma2_eff is None else sigma2_eff)
    expected = (scenario.n_subcarriers, scenario.n_ue, scenario.n_bs)
    if obs.r_tilde.shape != expected:
        raise DimensionMismatch(f"observations have shape {obs.r_tilde.shape}, scenario expects {expected}")
    if not np.all(np.isfinite(obs.r_tilde)):
        raise ValueError("observations contain NaN or infinite values")
    if not obs.sigma2_eff > 0:
        raise ValueError("effective noise variance must be positive")
    return obs


def check_observations(X, scenario, sigma2_eff: float | None = None) -> list[ObservationSet]:
    """Accept one observation set or a batch (list or 4-D array) and return a list."""
    if isinstance(X, ObservationSet):
        return [check_observation(X, scenario, sigma2_eff)]
    if isinstance(X, np.ndarray):
        if X.ndim == 3:
            return [check_observation(X, scenario, sigma2_eff)]
        if X.ndim == 4:
            return [check_observation(x, scenario, sigma2_eff) for x in X]
        raise DimensionMismatch(f"expected a 3-D or 4-D array, got {X.ndim}-D")
    return [check_observation(x, scenario, sigma2_eff) for x in X]


def check_positive_int(value, name: str) -> int:
    if isinstance(value, bool) or int(value) != value or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)
