"""URA steering vectors, OFDM delay vectors and per-subcarrier channel matrices.

Every path contributes a rank-one term ``h * s(k) * u v^H`` to the effective
channel on subcarrier ``k``. :func:`path_atoms` returns these factors so the
Fisher information and the gain least squares can be evaluated without
materializing the full ``K x D x N`` tensor.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import isqrt

import numpy as np

from .exceptions import DimensionMismatch, NotPerfectSquare


def side_length(n_elems: int) -> int:
    n_elems = int(n_elems)
    r = isqrt(n_elems) if n_elems > 0 else 0
    if r * r != n_elems or r == 0:
        raise NotPerfectSquare(f"URA size {n_elems} is not a positive perfect square")
    return r


def steering_1d(x: float, n_elems: int) -> np.ndarray:
    """One axis of a URA response: ``n^{-1/4} exp(i pi x m)`` for ``m = 0..sqrt(n)-1``."""
    m = np.arange(side_length(n_elems))
    return np.exp(1j * np.pi * x * m) / n_elems ** 0.25


def steering_1d_grid(xs, n_elems: int) -> np.ndarray:
    """Columns are :func:`steering_1d` evaluated at every entry of ``xs``."""
    m = np.arange(side_length(n_elems))[:, None]
    return np.exp(1j * np.pi * m * np.asarray(xs, dtype=float)[None, :]) / n_elems ** 0.25


def steering_ura(g: float, v: float, n_elems: int) -> np.ndarray:
    """Unit-norm URA response ``a(g) kron a(v)``."""
    return np.kron(steering_1d(g, n_elems), steering_1d(v, n_elems))


def steering_ura_grad(g: float, v: float, n_elems: int) -> tuple[np.ndarray, np.ndarray]:
    """Partial derivatives of :func:`steering_ura` with respect to ``g`` and ``v``."""
    m = np.arange(side_length(n_elems))
    ag, av = steering_1d(g, n_elems), steering_1d(v, n_elems)
    return np.kron(1j * np.pi * m * ag, av), np.kron(ag, 1j * np.pi * m * av)


def delay_vector(tau: float, bandwidth_hz: float, n_subcarriers: int) -> np.ndarray:
    k = np.arange(n_subcarriers)
    return np.exp(-2j * np.pi * k * bandwidth_hz / n_subcarriers * tau)


def delay_vector_grid(taus, bandwidth_hz: float, n_subcarriers: int) -> np.ndarray:
    k = np.arange(n_subcarriers)[:, None]
    return np.exp(-2j * np.pi * k * bandwidth_hz / n_subcarriers * np.asarray(taus, float)[None, :])


def _phase(tau, scenario, k):
    return np.exp(-2j * np.pi * k * scenario.bandwidth_hz / scenario.n_subcarriers * tau)


# ---------------------------------------------------------------------------
# link matrices


def channel_bs_ris(link, h_r1: complex, scenario, k: int) -> np.ndarray:
    """BS -> RIS channel ``G_k`` (M x N) for a known BS-RIS link."""
    a_r = steering_ura(link.f_r1, link.v_r1, scenario.n_ris)
    a_b = steering_ura(link.g_br, link.v_br, scenario.n_bs)
    return h_r1 * _phase(link.tau_r1, scenario, k) * np.outer(a_r, a_b.conj())


def channel_ris_ue(h_r2: complex, tau_r2: float, g_ur: float, v_ur: float,
                   f_r2: float, v_r2: float, scenario, k: int) -> np.ndarray:
    """RIS -> UE channel ``H_r,k`` (D x M)."""
    a_u = steering_ura(g_ur, v_ur, scenario.n_ue)
    a_r = steering_ura(f_r2, v_r2, scenario.n_ris)
    return h_r2 * _phase(tau_r2, scenario, k) * np.outer(a_u, a_r.conj())


def channel_bs_ue_mean(h_d: complex, tau_d: float, g_ud: float, v_ud: float,
                       g_bd: float, v_bd: float, scenario, k: int) -> np.ndarray:
    """Deterministic (LOS) part of the BS -> UE channel (D x N)."""
    a_u = steering_ura(g_ud, v_ud, scenario.n_ue)
    a_b = steering_ura(g_bd, v_bd, scenario.n_bs)
    return h_d * _phase(tau_d, scenario, k) * np.outer(a_u, a_b.conj())


# ---------------------------------------------------------------------------
# effective channel


@dataclass(frozen=True)
class PathAtom:
    """Unit-gain factors of one path: ``dH_k = s[k] * outer(u, conj(v))``."""

    s: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def dense(self) -> np.ndarray:
        return self.s[:, None, None] * np.outer(self.u, self.v.conj())[None, :, :]


def path_atoms(eta, scenario) -> list[PathAtom]:
    """Unit-gain factors of the direct path followed by each reflection path."""
    links = scenario.ris_links
    if len(links) != eta.n_reflections:
        raise DimensionMismatch(f"eta has {eta.n_reflections} reflection paths, scenario {len(links)} RIS")
    w, kk = scenario.bandwidth_hz, scenario.n_subcarriers
    atoms = [PathAtom(
        delay_vector(eta.tau_d, w, kk),
        steering_ura(eta.g_ud, eta.v_ud, scenario.n_ue),
        steering_ura(eta.g_bd, eta.v_bd, scenario.n_bs),
    )]
    for q, link in enumerate(links):
        atoms.append(PathAtom(
            delay_vector(link.tau_r1 + eta.tau_r2[q], w, kk),
            steering_ura(eta.g_ur[q], eta.v_ur[q], scenario.n_ue),
            steering_ura(link.g_br, link.v_br, scenario.n_bs),
        ))
    return atoms


def path_gains(eta) -> np.ndarray:
    return np.concatenate([[eta.h_d], eta.h_r])


def effective_channels(eta, scenario) -> np.ndarray:
    """All subcarriers of the noiseless effective channel, shape ``(K, D, N)``."""
    out = np.zeros((scenario.n_subcarriers, scenario.n_ue, scenario.n_bs), dtype=complex)
    for h, atom in zip(path_gains(eta), path_atoms(eta, scenario)):
        out += h * atom.dense()
    return out


def effective_channel(eta, scenario, k: int) -> np.ndarray:
    """Noiseless effective channel on subcarrier ``k`` in its collapsed parametric form."""
    out = np.zeros((scenario.n_ue, scenario.n_bs), dtype=complex)
    for h, atom in zip(path_gains(eta), path_atoms(eta, scenario)):
        out += h * atom.s[k] * np.outer(atom.u, atom.v.conj())
    return out


def reflection_gain(h_r1: complex, h_r2: complex, f_r2: float, v_r2: float,
                    link, theta: np.ndarray, n_ris: int) -> complex:
    """Collapsed reflection coefficient ``h_R1 h_R2 a_R(out)^H diag(e^{i theta}) a_R(in)``."""
    a_out = steering_ura(f_r2, v_r2, n_ris)
    a_in = steering_ura(link.f_r1, link.v_r1, n_ris)
    return h_r1 * h_r2 * np.vdot(a_out, np.exp(1j * np.asarray(theta)) * a_in)


def cascaded_effective_channel(realization, scenario, k: int) -> np.ndarray:
    """Effective channel built from the three link matrices ``H_d + sum H_r Theta G``."""
    eta = realization.eta
    out = channel_bs_ue_mean(eta.h_d, eta.tau_d, eta.g_ud, eta.v_ud, eta.g_bd, eta.v_bd, scenario, k)
    for q, link in enumerate(scenario.ris_links):
        g_mat = channel_bs_ris(link, realization.h_r1[q], scenario, k)
        h_mat = channel_ris_ue(realization.h_r2[q], eta.tau_r2[q], eta.g_ur[q], eta.v_ur[q],
                               realization.f_r2[q], realization.v_r2[q], scenario, k)
        out = out + (h_mat * np.exp(1j * realization.ris_phases[q])[None, :]) @ g_mat
    return out
