"""RIS phase design for an angular service region."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import steering_ura


@dataclass(frozen=True)
class AngularRegion:
    """Elevation/azimuth box (radians) sampled on a uniform ``grid_theta x grid_phi`` grid."""

    theta_l: float
    theta_u: float
    phi_l: float
    phi_u: float
    grid_theta: int = 32
    grid_phi: int = 32

    def __post_init__(self):
        if self.theta_l > self.theta_u or self.phi_l > self.phi_u:
            raise ValueError("region bounds must satisfy lower <= upper")
        if self.grid_theta < 1 or self.grid_phi < 1:
            raise ValueError("grid counts must be >= 1")

    @classmethod
    def around(cls, theta: float, phi: float, halfwidth: float, grid: int = 32) -> "AngularRegion":
        return cls(theta - halfwidth, theta + halfwidth, phi - halfwidth, phi + halfwidth, grid, grid)

    def samples(self) -> tuple[np.ndarray, np.ndarray]:
        th = _axis(self.theta_l, self.theta_u, self.grid_theta)
        ph = _axis(self.phi_l, self.phi_u, self.grid_phi)
        tt, pp = np.meshgrid(th, ph, indexing="ij")
        return tt.ravel(), pp.ravel()


def _axis(lo, hi, n):
    if n == 1:
        return np.array([0.5 * (lo + hi)])
    return np.linspace(lo, hi, n)


def build_dictionary(region: AngularRegion, m_ris: int) -> np.ndarray:
    """M x Z matrix whose columns are RIS responses ``a_R(sin t cos p, cos t)`` over the region grid."""
    th, ph = region.samples()
    f = np.sin(th) * np.cos(ph)
    v = np.cos(th)
    return np.stack([steering_ura(fi, vi, m_ris) for fi, vi in zip(f, v)], axis=1)


def design_phases(region: AngularRegion, m_ris: int, incident: tuple[float, float]) -> np.ndarray:
    """Per-element phase shifts (radians) maximizing the mean reflected power over ``region``.

    The combined response is the unit-modulus projection of the dominant left
    singular vector of the region dictionary; the incident-wave phase is then
    removed element by element.
    """
    u, _, _ = np.linalg.svd(build_dictionary(region, m_ris), full_matrices=False)
    lead = u[:, 0] * np.exp(-1j * np.angle(u[0, 0]))
    a_in = steering_ura(incident[0], incident[1], m_ris)
    return np.angle(np.exp(1j * (np.angle(lead) - np.angle(a_in))))


def combined_response(theta: np.ndarray, incident: tuple[float, float], m_ris: int) -> np.ndarray:
    """Unit-modulus vector ``diag(e^{i theta}) * sqrt(M) a_R(incident)`` seen by outgoing directions."""
    a_in = steering_ura(incident[0], incident[1], m_ris)
    return np.exp(1j * np.asarray(theta)) * a_in * np.sqrt(m_ris)


def region_gain(theta: np.ndarray, incident: tuple[float, float], outgoing: tuple[float, float],
                m_ris: int) -> float:
    """``|a_R(outgoing)^H theta_tilde|`` for the combined unit-modulus response; at most ``sqrt(M)``."""
    a_out = steering_ura(outgoing[0], outgoing[1], m_ris)
    return float(abs(np.vdot(a_out, combined_response(theta, incident, m_ris))))


def mean_region_power(theta: np.ndarray, incident: tuple[float, float], region: AngularRegion,
                      m_ris: int) -> float:
    """Average of ``region_gain**2`` over the region grid, i.e. ``||D_A^H theta_tilde||^2 / Z``."""
    dic = build_dictionary(region, m_ris)
    resp = dic.conj().T @ combined_response(theta, incident, m_ris)
    return float(np.mean(np.abs(resp) ** 2))
