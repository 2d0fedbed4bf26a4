"""Physical scenario description and ground-truth channel synthesis.

Defaults reproduce the single-BS simulation setup: a 100-antenna BS at the
origin, a 64-antenna UE at (50, 10, 20) m, one 400-element RIS at
(30, -5, 2) m, 32 subcarriers over 100 MHz at 30 GHz.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .channel import side_length, steering_ura
from .geometry import (
    SPEED_OF_LIGHT,
    ChannelParams,
    PositionParams,
    forward_map,
    spherical_angles,
)
from .ris_design import AngularRegion, design_phases

RIS_PHASE_MODES = ("designed", "random", "zero")


def _tuple3(x):
    a = np.asarray(x, dtype=float).reshape(3)
    return tuple(float(v) for v in a)


@dataclass(frozen=True)
class RisLink:
    """Known BS -> RIS geometry for one RIS.

    ``f_r1, v_r1`` are the RIS-side cosines of the incident wave, ``g_br, v_br``
    the BS-side departure cosines and ``tau_r1`` the BS -> RIS delay.
    """

    position: np.ndarray
    distance: float
    tau_r1: float
    f_r1: float
    v_r1: float
    g_br: float
    v_br: float


@dataclass(frozen=True)
class Scenario:
    n_bs: int = 100
    n_ue: int = 64
    n_ris: int = 400
    bandwidth_hz: float = 100e6
    carrier_hz: float = 30e9
    n_subcarriers: int = 32
    rician_k: float = 100.0
    t_slots: float = 6e5
    ue_position: tuple = (50.0, 10.0, 20.0)
    ris_positions: tuple = ((30.0, -5.0, 2.0),)
    rotation: tuple = (0.0, 0.0, 0.0)
    pathloss_direct: float = 4.5
    pathloss_reflect: float = 2.0
    inv_sigma2_db: float = 110.0
    ris_phase_mode: str = "designed"
    ris_region_halfwidth_deg: float = 2.0
    ris_region_grid: int = 32
    reference_distance: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "ue_position", _tuple3(self.ue_position))
        ris = np.asarray(self.ris_positions, dtype=float).reshape(-1, 3)
        object.__setattr__(self, "ris_positions", tuple(_tuple3(r) for r in ris))
        object.__setattr__(self, "rotation", _tuple3(self.rotation))
        for n in (self.n_bs, self.n_ue, self.n_ris):
            side_length(n)
        if self.bandwidth_hz <= 0 or self.n_subcarriers < 1:
            raise ValueError("bandwidth must be positive and K >= 1")
        if self.rician_k < 0:
            raise ValueError("Rician factor must be non-negative")
        if self.ris_phase_mode not in RIS_PHASE_MODES:
            raise ValueError(f"ris_phase_mode must be one of {RIS_PHASE_MODES}")

    # -- basic derived quantities ------------------------------------------

    @property
    def n_reflections(self) -> int:
        return len(self.ris_positions)

    @property
    def sigma2(self) -> float:
        return 10.0 ** (-self.inv_sigma2_db / 10.0)

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    @property
    def delay_period(self) -> float:
        """Unambiguous delay range ``K / W``."""
        return self.n_subcarriers / self.bandwidth_hz

    def path_gain(self, distance: float, exponent: float) -> float:
        """Log-distance large-scale power gain with a free-space reference at ``reference_distance``."""
        d0 = self.reference_distance
        beta0 = (self.wavelength / (4.0 * np.pi * d0)) ** 2
        return float(beta0 * (distance / d0) ** (-exponent))

    @property
    def beta_direct(self) -> float:
        return self.path_gain(np.linalg.norm(self.ue_position), self.pathloss_direct)

    @property
    def sigma2_eff(self) -> float:
        """Effective per-entry noise variance after pilot decorrelation."""
        return self.n_ue / self.t_slots * self.sigma2 + self.beta_direct / (1.0 + self.rician_k)

    @cached_property
    def ris_links(self) -> tuple[RisLink, ...]:
        links = []
        for p in self.ris_positions:
            p = np.asarray(p)
            d = float(np.linalg.norm(p))
            u = p / d
            links.append(RisLink(position=p, distance=d, tau_r1=d / SPEED_OF_LIGHT,
                                 f_r1=float(u[0]), v_r1=float(u[2]),
                                 g_br=float(u[1]), v_br=float(u[2])))
        return tuple(links)

    def translated(self, origin) -> "Scenario":
        """Same scenario expressed in the frame of a BS located at ``origin``."""
        o = np.asarray(origin, dtype=float)
        return replace(self, ue_position=np.asarray(self.ue_position) - o,
                       ris_positions=np.asarray(self.ris_positions) - o)

    def with_ue(self, position) -> "Scenario":
        return replace(self, ue_position=position)

    # -- RIS configuration -------------------------------------------------

    def ris_departure(self, q: int, ue_position=None) -> tuple[float, float]:
        """RIS-side cosines ``(f_R2, v_R2)`` of the RIS -> UE leg."""
        p_u = np.asarray(self.ue_position if ue_position is None else ue_position)
        d = p_u - np.asarray(self.ris_positions[q])
        u = d / np.linalg.norm(d)
        return float(u[0]), float(u[2])

    def service_region(self, q: int) -> AngularRegion:
        d = np.asarray(self.ue_position) - np.asarray(self.ris_positions[q])
        theta, phi = spherical_angles(d)
        return AngularRegion.around(theta, phi, np.deg2rad(self.ris_region_halfwidth_deg),
                                    self.ris_region_grid)

    def ris_phases(self, rng: np.random.Generator | None = None) -> np.ndarray:
        """Phase profile of every RIS, shape ``(Q, M)``."""
        out = np.zeros((self.n_reflections, self.n_ris))
        for q, link in enumerate(self.ris_links):
            if self.ris_phase_mode == "designed":
                out[q] = design_phases(self.service_region(q), self.n_ris, (link.f_r1, link.v_r1))
            elif self.ris_phase_mode == "random":
                gen = rng if rng is not None else np.random.default_rng(0)
                out[q] = gen.uniform(-np.pi, np.pi, self.n_ris)
        return out


@dataclass(frozen=True)
class Realization:
    """Ground truth for one channel draw, including the link-level factors behind ``h_r``."""

    xi: PositionParams
    eta: ChannelParams
    ris_phases: np.ndarray
    h_r1: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    h_r2: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    f_r2: np.ndarray = field(default_factory=lambda: np.zeros(0))
    v_r2: np.ndarray = field(default_factory=lambda: np.zeros(0))


def synthesize(scenario: Scenario, rng: np.random.Generator | None = None,
               ris_phases: np.ndarray | None = None) -> Realization:
    """Draw unit-modulus channel coefficients and build the true parameter vectors.

    With ``rng=None`` every coefficient has zero phase.
    """
    q_count = scenario.n_reflections

    def coeff(n):
        if rng is None:
            return np.ones(n, dtype=complex)
        return np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, n))

    alpha = coeff(1 + 2 * q_count)
    if ris_phases is None:
        ris_phases = scenario.ris_phases(rng)
    ris_phases = np.asarray(ris_phases, dtype=float).reshape(q_count, scenario.n_ris)

    kd = scenario.rician_k
    nd = scenario.n_bs * scenario.n_ue
    h_d = np.sqrt(kd / (1.0 + kd) * scenario.beta_direct * nd) * alpha[0]
    p_u = np.asarray(scenario.ue_position)
    h_r1, h_r2, h_r, f_r2, v_r2 = [], [], [], [], []
    for q, link in enumerate(scenario.ris_links):
        d2 = float(np.linalg.norm(p_u - link.position))
        g1 = alpha[1 + 2 * q] * np.sqrt(
            scenario.path_gain(link.distance, scenario.pathloss_reflect) * scenario.n_ris * scenario.n_bs)
        g2 = alpha[2 + 2 * q] * np.sqrt(
            scenario.path_gain(d2, scenario.pathloss_reflect) * scenario.n_ris * scenario.n_ue)
        f2, v2 = scenario.ris_departure(q)
        a_out = steering_ura(f2, v2, scenario.n_ris)
        a_in = steering_ura(link.f_r1, link.v_r1, scenario.n_ris)
        h_r.append(g1 * g2 * np.vdot(a_out, np.exp(1j * ris_phases[q]) * a_in))
        h_r1.append(g1)
        h_r2.append(g2)
        f_r2.append(f2)
        v_r2.append(v2)
    xi = PositionParams(position=p_u, h_d=complex(h_d), h_r=np.asarray(h_r, complex))
    eta = forward_map(xi, scenario)
    return Realization(xi=xi, eta=eta, ris_phases=ris_phases, h_r1=np.asarray(h_r1, complex),
                       h_r2=np.asarray(h_r2, complex), f_r2=np.asarray(f_r2), v_r2=np.asarray(v_r2))
