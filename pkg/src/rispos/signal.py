"""Pilot generation, noisy observation synthesis and the observation reshapes.

Observations are stored as a ``(K, D, N)`` array. Antenna indices factor as
``i = i_g * sqrt(n) + i_v`` (Kronecker order of :func:`rispos.channel.steering_ura`),
so the tensor view used by the reshapes is ``(K, ug, uv, bg, bv)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import effective_channels, side_length
from .exceptions import DimensionMismatch, InvalidPilot


@dataclass(frozen=True)
class ObservationSet:
    """Decorrelated per-subcarrier observations ``R_k`` (shape ``(K, D, N)``) and their noise variance."""

    r_tilde: np.ndarray
    sigma2_eff: float

    def __post_init__(self):
        r = np.asarray(self.r_tilde, dtype=complex)
        if r.ndim != 3:
            raise DimensionMismatch(f"observations must be (K, D, N), got shape {r.shape}")
        object.__setattr__(self, "r_tilde", r)

    @property
    def n_subcarriers(self) -> int:
        return self.r_tilde.shape[0]

    @property
    def n_ue(self) -> int:
        return self.r_tilde.shape[1]

    @property
    def n_bs(self) -> int:
        return self.r_tilde.shape[2]


def _rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def complex_normal(rng, shape, variance: float) -> np.ndarray:
    """Circular complex Gaussian samples with the given per-entry variance."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def simulate_observations(eta, scenario, rng=None, *, sigma2_eff: float | None = None,
                          noiseless: bool = False) -> ObservationSet:
    """Effective channel plus i.i.d. ``CN(0, sigma2_eff)`` noise on every entry.

    ``rng`` may be a Generator or anything accepted by ``np.random.default_rng``.
    """
    s2 = scenario.sigma2_eff if sigma2_eff is None else float(sigma2_eff)
    h = effective_channels(eta, scenario)
    if not noiseless and s2 > 0:
        h = h + complex_normal(_rng(rng), h.shape, s2)
    return ObservationSet(h, s2)


def orthogonal_pilot(n_tx: int, t_slots: int, n_ue: int) -> np.ndarray:
    """``n_tx x T`` pilot block with ``X X^H = (T / D) I`` built from DFT rows."""
    if t_slots < n_tx:
        raise InvalidPilot(f"T = {t_slots} slots cannot carry {n_tx} orthogonal pilot rows")
    t = np.arange(t_slots)
    rows = np.exp(-2j * np.pi * np.outer(np.arange(n_tx), t) / t_slots) / np.sqrt(t_slots)
    return np.sqrt(t_slots / n_ue) * rows


def simulate_raw(eta, scenario, t_slots: int, rng=None, *, sigma2: float | None = None,
                 pilot: np.ndarray | None = None) -> ObservationSet:
    """Materialize ``T`` raw slots, including the scattered direct-link term, then decorrelate.

    Returns ``(D/T) R_k X^H`` for every subcarrier.
    """
    gen = _rng(rng)
    s2 = scenario.sigma2 if sigma2 is None else float(sigma2)
    n, d, kk = scenario.n_bs, scenario.n_ue, scenario.n_subcarriers
    t_slots = int(t_slots)
    if t_slots < max(n, d):
        raise InvalidPilot(f"T = {t_slots} is below max(N, D) = {max(n, d)}")
    x = orthogonal_pilot(n, t_slots, d) if pilot is None else np.asarray(pilot, dtype=complex)
    if x.shape != (n, t_slots):
        raise InvalidPilot(f"pilot must be {n} x {t_slots}, got {x.shape}")
    scatter = scenario.beta_direct / (1.0 + scenario.rician_k)
    h = effective_channels(eta, scenario)
    out = np.empty_like(h)
    for k in range(kk):
        hk = h[k]
        if scatter > 0:
            hk = hk + complex_normal(gen, (d, n), scatter)
        rk = hk @ x
        if s2 > 0:
            rk = rk + complex_normal(gen, (d, t_slots), s2)
        out[k] = (d / t_slots) * rk @ x.conj().T
    return ObservationSet(out, d / t_slots * s2 + scatter)


# ---------------------------------------------------------------------------
# reshapes


def _tensor(obs: ObservationSet) -> np.ndarray:
    kk, d, n = obs.r_tilde.shape
    su, sb = side_length(d), side_length(n)
    return obs.r_tilde.reshape(kk, su, su, sb, sb)


def _check_axis(axis: str):
    if axis not in ("g", "v"):
        raise ValueError("axis must be 'g' or 'v'")


def reshape_bs(obs: ObservationSet, axis: str = "g") -> np.ndarray:
    """``sqrt(N) x (sqrt(N) D K)`` matrix whose column space holds the BS factors ``a(g_B)``.

    The BS response enters the channel conjugated, so the data are conjugated
    here to expose ``a(g_B)`` rather than its conjugate.
    """
    _check_axis(axis)
    t = _tensor(obs)
    perm = (3, 4, 1, 2, 0) if axis == "g" else (4, 3, 1, 2, 0)
    t = np.transpose(t, perm)
    return np.conj(t.reshape(t.shape[0], -1))


def reshape_ue(obs: ObservationSet, axis: str = "g") -> np.ndarray:
    """``sqrt(D) x (sqrt(D) N K)`` matrix whose column space holds the UE factors ``a(g_U)``."""
    _check_axis(axis)
    t = _tensor(obs)
    perm = (1, 2, 3, 4, 0) if axis == "g" else (2, 1, 3, 4, 0)
    t = np.transpose(t, perm)
    return t.reshape(t.shape[0], -1)


def reshape_delay(obs: ObservationSet) -> np.ndarray:
    """``K x (D N)`` matrix with row ``k`` equal to the column-major ``vec(R_k)``."""
    r = obs.r_tilde
    return np.transpose(r, (0, 2, 1)).reshape(r.shape[0], -1)
