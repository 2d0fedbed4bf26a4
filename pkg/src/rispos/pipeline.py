"""End-to-end positioning: observations -> channel estimate -> per-path positions -> fused position."""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from .estimator import EstimatedChannelParams, SearchConfig, estimate_all
from .fisher import fim_eta
from .fusion import (
    PositionEstimate,
    exip_refine,
    fuse_linear,
    position_from_direct,
    position_from_reflection,
)
from .geometry import PositionParams

METHODS = ("proposed", "delay_based", "exip", "geometric_mapping", "direct_only")


def per_path_positions(est: EstimatedChannelParams, scenario, f_eta: np.ndarray | None = None):
    """Direct-path estimate followed by one estimate per reflection path."""
    eta = est.eta
    f = fim_eta(eta, scenario, None) if f_eta is None else f_eta
    out = [position_from_direct(eta, f, scenario)]
    for q in range(eta.n_reflections):
        out.append(position_from_reflection(eta, q, f, scenario))
    return out


def locate(est: EstimatedChannelParams, scenario, method: str = "proposed") -> PositionEstimate:
    """Position from an already estimated channel under one of :data:`METHODS`.

    ``delay_based`` differs from ``proposed`` only in the estimation stage, so
    here both reduce to linear fusion.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    eta = est.eta
    f = fim_eta(eta, scenario)
    if method == "direct_only":
        return position_from_direct(eta, f, scenario)
    paths = per_path_positions(est, scenario, f)
    fused = fuse_linear(paths)
    if method in ("proposed", "delay_based"):
        return fused
    init = PositionParams(fused.p_hat, eta.h_d, eta.h_r)
    weight = f if method == "exip" else None
    xi, info = exip_refine(eta, weight, init, scenario)
    return PositionEstimate(xi.position, fused.cov, method, {"solver": info})


def search_for(method: str, search: SearchConfig = SearchConfig()) -> SearchConfig:
    return replace(search, matching="delay" if method == "delay_based" else "energy")


def position_pipeline(obs, scenario, method: str = "proposed", search: SearchConfig = SearchConfig()):
    """Run estimation and positioning; returns ``(PositionEstimate, EstimatedChannelParams)``."""
    est = estimate_all(obs, scenario, search_for(method, search))
    return locate(est, scenario, method), est
