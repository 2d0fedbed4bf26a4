"""Fisher information of the channel and position parameters and the derived bounds.

Every partial derivative of the effective channel is rank one,
``dH_k / d eta_i = s_i[k] * outer(u_i, conj(v_i))``, so FIM entries reduce to
products of short inner products and never need the ``K x D x N`` tensor.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .channel import PathAtom, path_atoms, path_gains, steering_ura_grad
from .exceptions import DegenerateGeometry, SingularFIM
from .geometry import (
    SPEED_OF_LIGHT,
    ChannelParams,
    PositionParams,
    forward_map,
    reduced_rotation,
    rotation_matrix,
)

COND_LIMIT = 1e12


# ---------------------------------------------------------------------------
# channel derivatives


def derivative_atoms(eta: ChannelParams, scenario) -> list[PathAtom]:
    """Rank-one factors of ``dH_k / d eta_i`` in the flattened order of ``eta``."""
    w, kk = scenario.bandwidth_hz, scenario.n_subcarriers
    ramp = -2j * np.pi * np.arange(kk) * w / kk
    atoms = path_atoms(eta, scenario)
    gains = path_gains(eta)
    out = []
    for p, (h, a) in enumerate(zip(gains, atoms)):
        out.append(PathAtom(a.s, a.u, a.v))
        out.append(PathAtom(1j * a.s, a.u, a.v))
        out.append(PathAtom(h * ramp * a.s, a.u, a.v))
        if p == 0:
            du_g, du_v = steering_ura_grad(eta.g_ud, eta.v_ud, scenario.n_ue)
        else:
            du_g, du_v = steering_ura_grad(eta.g_ur[p - 1], eta.v_ur[p - 1], scenario.n_ue)
        out.append(PathAtom(h * a.s, du_g, a.v))
        out.append(PathAtom(h * a.s, du_v, a.v))
        if p == 0:
            db_g, db_v = steering_ura_grad(eta.g_bd, eta.v_bd, scenario.n_bs)
            out.append(PathAtom(h * a.s, a.u, db_g))
            out.append(PathAtom(h * a.s, a.u, db_v))
    return out


def channel_derivatives(eta: ChannelParams, scenario) -> np.ndarray:
    """Dense ``dH / d eta_i`` for every entry, shape ``(7 + 5Q, K, D, N)``."""
    return np.stack([a.dense() for a in derivative_atoms(eta, scenario)])


def _atom_products(atoms) -> np.ndarray:
    """``P[k, i, j] = conj(s_i[k]) s_j[k] (u_i^H u_j)(v_j^H v_i)``."""
    s = np.stack([a.s for a in atoms], axis=1)
    u = np.stack([a.u for a in atoms], axis=1)
    v = np.stack([a.v for a in atoms], axis=1)
    uu = u.conj().T @ u
    vv = (v.conj().T @ v).T
    return s.conj()[:, :, None] * s[:, None, :] * (uu * vv)[None, :, :]


def fim_eta_per_subcarrier(eta: ChannelParams, scenario, sigma2_eff: float | None = None) -> np.ndarray:
    """Per-subcarrier FIMs, shape ``(K, 7 + 5Q, 7 + 5Q)``."""
    s2 = scenario.sigma2_eff if sigma2_eff is None else float(sigma2_eff)
    prod = _atom_products(derivative_atoms(eta, scenario))
    return 2.0 / s2 * np.real(prod)


def fim_eta(eta: ChannelParams, scenario, sigma2_eff: float | None = None) -> np.ndarray:
    """FIM of the channel parameters summed over all subcarriers."""
    f = fim_eta_per_subcarrier(eta, scenario, sigma2_eff).sum(axis=0)
    return 0.5 * (f + f.T)


# ---------------------------------------------------------------------------
# Jacobian of the forward map


def _angle_gradients(vec):
    x, y, z = vec
    r2 = float(vec @ vec)
    rho2 = x * x + y * y
    if rho2 == 0.0:
        raise DegenerateGeometry("azimuth derivative undefined on the z axis")
    r = np.sqrt(r2)
    theta = np.arccos(np.clip(z / r, -1.0, 1.0))
    phi = np.arctan2(y, x)
    d_theta = np.array([x * z, y * z, -rho2]) / (r ** 3 * np.sqrt(1.0 - z * z / r2))
    d_phi = np.array([-y, x, 0.0]) / rho2
    st, ct, sp, cp = np.sin(theta), np.cos(theta), np.sin(phi), np.cos(phi)
    du_theta = np.array([ct * cp, ct * sp, -st])
    du_phi = np.array([-st * sp, st * cp, 0.0])
    return np.outer(du_theta, d_theta) + np.outer(du_phi, d_phi)


def jacobian_F(xi: PositionParams, scenario) -> np.ndarray:
    """``d eta / d xi^T``, shape ``(7 + 5Q, 5 + 2Q)``.

    Cosine rows are chained through the elevation and azimuth of the relevant
    propagation direction.
    """
    p = xi.position
    ris = np.asarray(scenario.ris_positions, dtype=float).reshape(-1, 3)
    q_count = ris.shape[0]
    m_r = reduced_rotation(scenario.rotation)
    jac = np.zeros((7 + 5 * q_count, 5 + 2 * q_count))
    r = np.linalg.norm(p)
    if r == 0.0:
        raise DegenerateGeometry("UE at the BS")
    du = _angle_gradients(p)
    jac[0, 3] = 1.0
    jac[1, 4] = 1.0
    jac[2, :3] = p / (SPEED_OF_LIGHT * r)
    jac[3:5, :3] = m_r @ du
    jac[5, :3] = du[1]
    jac[6, :3] = du[2]
    for q in range(q_count):
        rel = p - ris[q]
        d2 = np.linalg.norm(rel)
        if d2 == 0.0:
            raise DegenerateGeometry("UE at a RIS")
        row = 7 + 5 * q
        jac[row, 5 + 2 * q] = 1.0
        jac[row + 1, 6 + 2 * q] = 1.0
        jac[row + 2, :3] = rel / (SPEED_OF_LIGHT * d2)
        jac[row + 3:row + 5, :3] = m_r @ _angle_gradients(rel)
    return jac


# ---------------------------------------------------------------------------
# inversion helpers


def inverse_psd(f: np.ndarray, *, what: str = "FIM") -> tuple[np.ndarray, bool]:
    """Inverse of a symmetric PSD matrix after diagonal equilibration.

    When the equilibrated matrix is ill conditioned a ridge of ``1e-12`` times its
    trace is added and a :class:`SingularFIM` warning is emitted. Returns the
    inverse and whether regularization was applied.
    """
    f = 0.5 * (f + f.T)
    d = np.sqrt(np.clip(np.diag(f), 0.0, None))
    d[d == 0.0] = 1.0
    scaled = f / np.outer(d, d)
    flagged = False
    w = np.linalg.eigvalsh(scaled)
    if w[0] <= 0 or w[-1] / w[0] > COND_LIMIT:
        scaled = scaled + 1e-12 * np.trace(scaled) * np.eye(f.shape[0])
        flagged = True
        warnings.warn(f"{what} is singular or ill conditioned; regularized before inversion",
                      SingularFIM, stacklevel=2)
    inv = np.linalg.inv(scaled) / np.outer(d, d)
    return 0.5 * (inv + inv.T), flagged


# ---------------------------------------------------------------------------
# bounds


@dataclass(frozen=True)
class FisherInfo:
    f_eta: np.ndarray
    f_xi: np.ndarray
    jacobian: np.ndarray


@dataclass(frozen=True)
class PositionBound:
    """Position-error covariance bounds.

    ``bound_direct`` and ``bound_reflect`` are the per-path bounds used for
    fusion; ``tight_direct`` and ``tight_reflect`` use the marginal covariance
    of the full channel FIM and dominate them in PSD order.
    """

    crb_full: np.ndarray
    bound_direct: np.ndarray | None = None
    bound_reflect: list = field(default_factory=list)
    tight_direct: np.ndarray | None = None
    tight_reflect: list = field(default_factory=list)
    regularized: bool = False

    @property
    def crb_trace(self) -> float:
        return float(np.trace(self.crb_full))

    @property
    def crb_rmse(self) -> float:
        return float(np.sqrt(max(self.crb_trace, 0.0)))


def fisher_info(xi: PositionParams, scenario, sigma2_eff: float | None = None,
                eta: ChannelParams | None = None) -> FisherInfo:
    """FIMs over ``eta`` and ``xi`` at the point ``xi`` (``eta`` defaults to ``F(xi)``)."""
    eta = forward_map(xi, scenario) if eta is None else eta
    f_eta = fim_eta(eta, scenario, sigma2_eff)
    jac = jacobian_F(xi, scenario)
    f_xi = jac.T @ f_eta @ jac
    return FisherInfo(f_eta, 0.5 * (f_xi + f_xi.T), jac)


def crb_position(fisher: FisherInfo) -> tuple[np.ndarray, float]:
    """3x3 position block of ``F_xi^{-1}`` and its trace."""
    inv, _ = inverse_psd(fisher.f_xi, what="position FIM")
    block = inv[:3, :3]
    return block, float(np.trace(block))


def eta_indices_direct() -> np.ndarray:
    return np.arange(7)


def eta_indices_reflection(q: int) -> np.ndarray:
    return np.arange(7 + 5 * q, 12 + 5 * q)


def xi_indices_direct() -> np.ndarray:
    return np.array([0, 1, 2, 3, 4])


def xi_indices_reflection(q: int) -> np.ndarray:
    return np.array([0, 1, 2, 5 + 2 * q, 6 + 2 * q])


def path_bounds(f_eta: np.ndarray, jac: np.ndarray, rows, cols, f_eta_inv=None) -> tuple[np.ndarray, np.ndarray]:
    """Loose and tight 3x3 position bounds for one path.

    ``rows`` select the path's entries of ``eta`` and ``cols`` the matching
    entries of ``xi`` (position first).
    """
    j = jac[np.ix_(rows, cols)]
    f_blk = f_eta[np.ix_(rows, rows)]
    loose, _ = inverse_psd(j.T @ f_blk @ j, what="per-path FIM")
    if f_eta_inv is None:
        f_eta_inv, _ = inverse_psd(f_eta)
    marg = f_eta_inv[np.ix_(rows, rows)]
    marg_info, _ = inverse_psd(marg, what="marginal covariance")
    tight, _ = inverse_psd(j.T @ marg_info @ j, what="per-path FIM")
    return loose[:3, :3], tight[:3, :3]


def per_path_bounds(fisher: FisherInfo, n_reflections: int) -> PositionBound:
    """Full CRB plus the loose and tight per-path position bounds."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", SingularFIM)
        crb, _ = crb_position(fisher)
        f_inv, _ = inverse_psd(fisher.f_eta)
        ld, td = path_bounds(fisher.f_eta, fisher.jacobian, eta_indices_direct(), xi_indices_direct(), f_inv)
        lr, tr_ = [], []
        for q in range(n_reflections):
            a, b = path_bounds(fisher.f_eta, fisher.jacobian, eta_indices_reflection(q),
                               xi_indices_reflection(q), f_inv)
            lr.append(a)
            tr_.append(b)
    flagged = any(issubclass(w.category, SingularFIM) for w in caught)
    if flagged:
        warnings.warn("bound computation required regularization", SingularFIM, stacklevel=2)
    return PositionBound(crb, ld, lr, td, tr_, flagged)


def parameter_crb(f_eta: np.ndarray) -> np.ndarray:
    """Diagonal of ``F_eta^{-1}``: per-entry variance bounds of the channel parameters."""
    inv, _ = inverse_psd(f_eta)
    return np.diag(inv).copy()


def path_angles(eta: ChannelParams, rot) -> np.ndarray:
    """``[tau, theta, phi]`` per path, direct first, as implied by the channel parameters.

    Direct-path angles are the BS departure angles; reflection-path angles
    describe the RIS -> UE direction recovered from the UE-side cosines.
    """
    rows = []
    f_bd = np.sqrt(max(0.0, 1.0 - eta.g_bd ** 2 - eta.v_bd ** 2))
    rows.append([eta.tau_d, np.arccos(np.clip(eta.v_bd, -1.0, 1.0)), np.arctan2(eta.g_bd, f_bd)])
    m_full = rotation_matrix(rot)
    for q in range(eta.n_reflections):
        g, v = eta.g_ur[q], eta.v_ur[q]
        f = -np.sqrt(max(0.0, 1.0 - g * g - v * v))
        d = m_full.T @ np.array([f, g, v])
        rows.append([eta.tau_r2[q], np.arccos(np.clip(d[2], -1.0, 1.0)), np.arctan2(d[1], d[0])])
    return np.asarray(rows, dtype=float)


def path_angle_crb(f_eta: np.ndarray, eta: ChannelParams, rot, step: float = 1e-7) -> np.ndarray:
    """Variance bounds on :func:`path_angles` by the delta method over ``F_eta^{-1}``."""
    inv, _ = inverse_psd(f_eta)
    x0 = eta.to_vector()
    base = path_angles(eta, rot).ravel()
    grad = np.zeros((base.size, x0.size))
    delay_idx = {2} | {9 + 5 * q for q in range(eta.n_reflections)}
    for i in range(x0.size):
        h = step * max(abs(x0[i]), 1e-9) if i in delay_idx else step
        xp, xm = x0.copy(), x0.copy()
        xp[i] += h
        xm[i] -= h
        grad[:, i] = (path_angles(ChannelParams.from_vector(xp), rot).ravel()
                      - path_angles(ChannelParams.from_vector(xm), rot).ravel()) / (2 * h)
    return np.einsum("ij,jk,ik->i", grad, inv, grad).reshape(-1, 3)
