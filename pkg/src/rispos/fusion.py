"""Per-path position inference and covariance-weighted fusion.

Per-path positions come from the geometric inverse maps; their covariances
are the per-path Fisher bounds evaluated at the estimates. Fusion is the
best linear unbiased combination. The EXIP refinement re-fits the position
parameters to the channel estimates with a Fisher weight.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import NonConvergence, SingularCovariance
from .fisher import (
    eta_indices_direct,
    eta_indices_reflection,
    inverse_psd,
    jacobian_F,
    xi_indices_direct,
    xi_indices_reflection,
)
from .geometry import (
    ChannelParams,
    PositionParams,
    forward_map,
    invert_direct_path,
    invert_reflection_path,
    reduced_rotation,
)

COND_LIMIT = 1e12


@dataclass(frozen=True)
class PositionEstimate:
    """3-D position with an error covariance (or a lower bound used in its place)."""

    p_hat: np.ndarray
    cov: np.ndarray
    source: str = "fused"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "p_hat", np.asarray(self.p_hat, dtype=float).reshape(3))
        c = np.asarray(self.cov, dtype=float).reshape(3, 3)
        object.__setattr__(self, "cov", 0.5 * (c + c.T))


def _spd_inverse(c: np.ndarray) -> np.ndarray:
    c = 0.5 * (c + c.T)
    try:
        chol = np.linalg.cholesky(c)
    except np.linalg.LinAlgError as exc:
        raise SingularCovariance("covariance is not positive definite") from exc
    d = np.diag(chol)
    if d.min() <= 0 or (d.max() / d.min()) ** 2 > COND_LIMIT:
        raise SingularCovariance("covariance is numerically singular")
    inv_l = np.linalg.inv(chol)
    return inv_l.T @ inv_l


# ---------------------------------------------------------------------------
# per-path positions


def _xi_from(eta_hat: ChannelParams, position) -> PositionParams:
    return PositionParams(position=position, h_d=eta_hat.h_d, h_r=eta_hat.h_r)


def path_bound(f_eta: np.ndarray, xi: PositionParams, scenario, path: int) -> np.ndarray:
    """Loose per-path position bound ``[(J_p^T F_p J_p)^{-1}]_{1:3,1:3}`` at ``xi``.

    ``path`` 0 is the direct path and ``q >= 1`` reflection ``q``.
    """
    jac = jacobian_F(xi, scenario)
    if path == 0:
        rows, cols = eta_indices_direct(), xi_indices_direct()
    else:
        rows, cols = eta_indices_reflection(path - 1), xi_indices_reflection(path - 1)
    j = jac[np.ix_(rows, cols)]
    inv, _ = inverse_psd(j.T @ f_eta[np.ix_(rows, rows)] @ j, what="per-path FIM")
    return inv[:3, :3]


def direct_cosine_wls(eta_hat: ChannelParams, rot, weight: np.ndarray | None = None) -> np.ndarray:
    """Unit-norm BS -> UE direction ``[f_B, g_B, v_B]`` fitted to the four direct-path cosines."""
    f_hat = np.array([eta_hat.g_ud, eta_hat.v_ud, eta_hat.g_bd, eta_hat.v_bd])
    a = np.vstack([reduced_rotation(rot), np.hstack([np.zeros((2, 1)), np.eye(2)])])
    w = np.eye(4) if weight is None else 0.5 * (weight + weight.T)
    lw = np.linalg.cholesky(w + 1e-300 * np.eye(4))
    u, s, vt = np.linalg.svd(lw.T @ a)
    rank = int(np.sum(s > 1e-10 * s[0]))
    z = vt[:rank].T @ ((u[:, :rank].T @ (lw.T @ f_hat)) / s[:rank])
    if rank < 3:
        # unobserved direction: close it with the unit-norm constraint, x >= 0 root
        null = vt[rank:][0]
        t = np.sqrt(max(0.0, 1.0 - float(z @ z)))
        cand = (z + t * null, z - t * null)
        z = cand[0] if cand[0][0] >= cand[1][0] else cand[1]
    nz = np.linalg.norm(z)
    return z / nz if nz > 0 else z


def position_from_direct(eta_hat: ChannelParams, f_eta: np.ndarray, scenario, *,
                         weighted: bool = True) -> PositionEstimate:
    """Direct-path position estimate with its loose per-path bound as covariance."""
    weight = None
    if weighted:
        inv, _ = inverse_psd(f_eta, what="channel FIM")
        weight, _ = inverse_psd(inv[3:7, 3:7], what="cosine covariance")
    z = direct_cosine_wls(eta_hat, scenario.rotation, weight)
    p = invert_direct_path(eta_hat.tau_d, z[1], z[2])
    cov = path_bound(f_eta, _xi_from(eta_hat, p), scenario, 0)
    return PositionEstimate(p, cov, "direct", {"direction": z})


def position_from_reflection(eta_hat: ChannelParams, q: int, f_eta: np.ndarray, scenario) -> PositionEstimate:
    """Position estimate from reflection path ``q`` (0-based) with its loose per-path bound."""
    p = invert_reflection_path(eta_hat.tau_r2[q], eta_hat.g_ur[q], eta_hat.v_ur[q],
                               scenario.ris_positions[q], scenario.rotation)
    cov = path_bound(f_eta, _xi_from(eta_hat, p), scenario, q + 1)
    return PositionEstimate(p, cov, f"reflection({q + 1})")


# ---------------------------------------------------------------------------
# linear fusion


def combining_matrices(covs) -> tuple[np.ndarray, list]:
    """Fused covariance ``(sum C_i^{-1})^{-1}`` and the weights ``C C_i^{-1}`` (they sum to ``I``)."""
    infos = [_spd_inverse(np.asarray(c, float)) for c in covs]
    total = np.sum(infos, axis=0)
    fused = _spd_inverse(total)
    return fused, [fused @ info for info in infos]


def fuse_linear(estimates, source: str = "fused") -> PositionEstimate:
    """Best linear unbiased combination of position estimates."""
    estimates = list(estimates)
    if not estimates:
        raise ValueError("need at least one estimate")
    if len(estimates) == 1:
        return estimates[0]
    fused, weights = combining_matrices([e.cov for e in estimates])
    p = np.sum([w @ e.p_hat for w, e in zip(weights, estimates)], axis=0)
    return PositionEstimate(p, fused, source, {"weights": weights})


def fuse_multi_ue(estimates, offsets) -> list[PositionEstimate]:
    """Jointly refine several UEs whose displacements from the first UE are known exactly."""
    estimates = list(estimates)
    offsets = [np.asarray(o, float).reshape(3) for o in offsets]
    if len(offsets) != len(estimates):
        raise ValueError("one offset per UE is required")
    shifted = [PositionEstimate(e.p_hat - o, e.cov, e.source) for e, o in zip(estimates, offsets)]
    ref = fuse_linear(shifted, "multi_ue")
    return [PositionEstimate(ref.p_hat + o, ref.cov, "multi_ue") for o in offsets]


def fuse_multi_bs(estimates) -> PositionEstimate:
    """Fuse estimates of one UE produced by different BSs (all in the global frame)."""
    return fuse_linear(estimates, "multi_bs")


# ---------------------------------------------------------------------------
# EXIP


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = 100
    step_tol: float = 1e-9
    damping: float = 1e-3


def exip_objective(xi_vec, eta_hat: ChannelParams, weight: np.ndarray, scenario) -> float:
    r = eta_hat.to_vector() - forward_map(PositionParams.from_vector(xi_vec), scenario).to_vector()
    return float(r @ weight @ r)


def _scale_vector(xi_vec):
    s = np.abs(xi_vec).astype(float)
    n_gain = xi_vec.size - 3
    s[:3] = max(np.linalg.norm(xi_vec[:3]), 1.0)
    if n_gain:
        s[3:] = max(np.max(np.abs(xi_vec[3:])), 1e-300)
    return s


def exip_refine(eta_hat: ChannelParams, weight: np.ndarray | None, initial: PositionParams, scenario,
                solver: SolverConfig = SolverConfig()) -> tuple[PositionParams, dict]:
    """Minimize ``(eta_hat - F(xi))^T W (eta_hat - F(xi))`` by Levenberg-Marquardt.

    ``weight=None`` uses the identity, which is the plain geometric mapping.
    Returns the solution and a diagnostics dict with the objective trace.
    """
    n_eta = eta_hat.to_vector().size
    w = np.eye(n_eta) if weight is None else 0.5 * (weight + weight.T)
    x = initial.to_vector()
    scale = _scale_vector(x)
    obj = exip_objective(x, eta_hat, w, scenario)
    history = [obj]
    lam = solver.damping
    converged = False
    target = eta_hat.to_vector()
    for _ in range(solver.max_iter):
        xi = PositionParams.from_vector(x)
        r = target - forward_map(xi, scenario).to_vector()
        j = jacobian_F(xi, scenario) * scale[None, :]
        h = j.T @ w @ j
        g = j.T @ w @ r
        d = np.sqrt(np.clip(np.diag(h), 1e-300, None))
        hs = h / np.outer(d, d)
        gs = g / d
        accepted = False
        for _ in range(30):
            try:
                step_s = np.linalg.solve(hs + lam * np.eye(hs.shape[0]), gs)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            step = step_s / d * scale
            x_new = x + step
            try:
                new_obj = exip_objective(x_new, eta_hat, w, scenario)
            except ValueError:
                lam *= 10.0
                continue
            if new_obj <= obj:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            converged = True
            break
        x, obj = x_new, new_obj
        history.append(obj)
        lam = max(lam / 10.0, 1e-12)
        if np.max(np.abs(step) / scale) < solver.step_tol:
            converged = True
            break
    if not converged:
        warnings.warn("EXIP refinement hit its iteration limit", NonConvergence, stacklevel=2)
    return PositionParams.from_vector(x), {"objective": history, "converged": converged}


def exip_closed_form(path_xis, f_eta: np.ndarray, jac: np.ndarray) -> np.ndarray:
    """One-shot linearized EXIP solution from per-path ``xi`` estimates.

    ``path_xis`` lists, direct path first, the per-path vectors
    ``[x, y, z, Re h, Im h]``. Returns the full ``xi`` vector.
    """
    q_count = len(path_xis) - 1
    rows = [eta_indices_direct()] + [eta_indices_reflection(q) for q in range(q_count)]
    cols = [xi_indices_direct()] + [xi_indices_reflection(q) for q in range(q_count)]
    stacked = np.concatenate([jac[np.ix_(r, c)] @ np.asarray(x, float) for r, c, x in zip(rows, cols, path_xis)])
    normal = jac.T @ f_eta @ jac
    inv, _ = inverse_psd(normal, what="position FIM")
    return inv @ (jac.T @ f_eta @ stacked)


def block_diagonal(f_eta: np.ndarray, n_reflections: int) -> np.ndarray:
    """Keep only the per-path diagonal blocks of a channel FIM."""
    out = np.zeros_like(f_eta)
    for idx in [eta_indices_direct()] + [eta_indices_reflection(q) for q in range(n_reflections)]:
        out[np.ix_(idx, idx)] = f_eta[np.ix_(idx, idx)]
    return out
