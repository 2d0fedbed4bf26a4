"""Channel-parameter estimation from decorrelated observations.

Pipeline: projected-residual AoD search at the BS, energy-based path ordering,
MUSIC over the delay domain, MUSIC over the UE array, and least-squares gains.
Scalar searches use a coarse circular grid refined with bounded Brent steps.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .channel import (
    PathAtom,
    delay_vector,
    delay_vector_grid,
    side_length,
    steering_1d,
    steering_1d_grid,
    steering_ura,
)
from .exceptions import IllConditioned, PeakDeficit, SubspaceTooSmall
from .geometry import ChannelParams
from .signal import ObservationSet, reshape_bs, reshape_delay, reshape_ue

COND_LIMIT = 1e12


@dataclass(frozen=True)
class SearchConfig:
    """Scalar-search settings.

    Parameters
    ----------
    grid_size : int
        Points in the coarse grid over one period of the parameter.
    refine : bool
        Polish each coarse maximum with a bounded Brent search.
    xtol : float
        Refinement tolerance in units of one coarse-grid cell.
    matching : str
        ``"energy"`` matches delay peaks to paths through the path ordering,
        ``"delay"`` labels the smallest delay as the direct path.
    """

    grid_size: int = 2048
    refine: bool = True
    xtol: float = 1e-6
    matching: str = "energy"

    def __post_init__(self):
        if self.grid_size < 8:
            raise ValueError("grid_size must be at least 8")
        if self.matching not in ("energy", "delay"):
            raise ValueError("matching must be 'energy' or 'delay'")


@dataclass(frozen=True)
class PathOrdering:
    """Path indices (0 = direct, q = reflection q) sorted by decreasing energy."""

    order: tuple
    direct_index: int = 0

    def __post_init__(self):
        if sorted(self.order) != list(range(len(self.order))):
            raise ValueError(f"{self.order} is not a permutation")
        if not 0 <= self.direct_index < len(self.order):
            raise ValueError("direct_index out of range")

    def rank_of(self, path: int) -> int:
        return self.order.index(path)


@dataclass(frozen=True)
class AodEstimate:
    cosine: float
    energies: np.ndarray
    objective: np.ndarray = field(repr=False)
    grid: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class SpectrumPeaks:
    """Refined peak locations with their pseudospectrum heights and LS energies."""

    locations: np.ndarray
    heights: np.ndarray
    energies: np.ndarray
    eigenvalues: np.ndarray
    deficit: bool


@dataclass(frozen=True)
class EstimatedChannelParams:
    eta: ChannelParams
    ordering: PathOrdering
    diagnostics: dict = field(default_factory=dict)

    @property
    def flags(self) -> list:
        return self.diagnostics.get("flags", [])


# ---------------------------------------------------------------------------
# scalar search helpers


def _circular_grid(lo: float, period: float, size: int) -> np.ndarray:
    return lo + period * np.arange(size) / size


def _wrap(x: float, lo: float, period: float) -> float:
    return lo + float(np.mod(x - lo, period))


def _refine_max(func, x0: float, cell: float, search: SearchConfig) -> float:
    """Maximize ``func`` within one grid cell on either side of ``x0``."""
    if not search.refine:
        return x0
    res = minimize_scalar(lambda x: -func(x), bounds=(x0 - cell, x0 + cell), method="bounded",
                          options={"xatol": search.xtol * cell})
    if res.success and -res.fun >= func(x0):
        return float(res.x)
    return x0


def circular_peaks(values: np.ndarray, count: int) -> np.ndarray:
    """Indices of the ``count`` highest strict-left local maxima of a circular sequence.

    A plateau contributes only its first sample, which keeps reported peaks at
    least one cell apart.
    """
    v = np.asarray(values, dtype=float)
    left, right = np.roll(v, 1), np.roll(v, -1)
    idx = np.flatnonzero((v > left) & (v >= right))
    idx = idx[np.argsort(-v[idx], kind="stable")]
    return idx[:count]


def _cond(gram: np.ndarray) -> float:
    s = np.linalg.svd(gram, compute_uv=False)
    return float(np.inf if s[-1] == 0 else s[0] / s[-1])


# ---------------------------------------------------------------------------
# AoD at the BS


def _projector(a_known: np.ndarray) -> np.ndarray:
    n = a_known.shape[0]
    if a_known.shape[1] == 0:
        return np.zeros((n, n), dtype=complex)
    gram = a_known.conj().T @ a_known
    if _cond(gram) > COND_LIMIT:
        raise IllConditioned("known RIS steering vectors are (nearly) collinear")
    return a_known @ np.linalg.solve(gram, a_known.conj().T)


def aod_objective(cosines, r_b: np.ndarray, known_cosines, n_bs: int) -> np.ndarray:
    """Normalized-residual correlation ``||a_res(g)^H R_B||^2`` on a set of candidate cosines."""
    a_known = steering_1d_grid(np.asarray(known_cosines, float), n_bs)
    proj = _projector(a_known)
    cand = steering_1d_grid(np.atleast_1d(cosines), n_bs)
    res = cand - proj @ cand
    gram = r_b @ r_b.conj().T
    num = np.real(np.sum(res.conj() * (gram @ res), axis=0))
    den = np.real(np.sum(res.conj() * res, axis=0))
    scale = np.real(np.sum(cand.conj() * cand, axis=0))
    out = np.zeros_like(num)
    ok = den > 1e-12 * scale
    out[ok] = num[ok] / den[ok]
    return out


def estimate_aod_bs(obs: ObservationSet, known_cosines, axis: str = "g",
                    search: SearchConfig = SearchConfig()) -> AodEstimate:
    """BS-side departure cosine of the direct path given the known RIS cosines on the same axis.

    Returns the cosine and the row energies of the least-squares coefficient
    matrix, ordered ``[direct, reflection_1, ..., reflection_Q]``.
    """
    r_b = reshape_bs(obs, axis)
    known = np.atleast_1d(np.asarray(known_cosines, dtype=float))
    n_bs = obs.n_bs
    grid = _circular_grid(-1.0, 2.0, search.grid_size)
    obj = aod_objective(grid, r_b, known, n_bs)
    i0 = int(np.argmax(obj))
    cell = 2.0 / search.grid_size
    g_hat = _refine_max(lambda x: aod_objective([x], r_b, known, n_bs)[0], grid[i0], cell, search)
    g_hat = _wrap(g_hat, -1.0, 2.0)
    a_all = steering_1d_grid(np.concatenate([[g_hat], known]), n_bs)
    gram = a_all.conj().T @ a_all
    if _cond(gram) > COND_LIMIT:
        raise IllConditioned("direct-path AoD coincides with a RIS AoD")
    coef = np.linalg.solve(gram, a_all.conj().T @ r_b)
    energies = np.sum(np.abs(coef) ** 2, axis=1)
    return AodEstimate(g_hat, energies, obj, grid)


def order_paths(energies, direct_index: int = 0) -> PathOrdering:
    """Descending energy order with a stable tie-break on the original index."""
    e = np.asarray(energies, dtype=float)
    if np.any(e < 0):
        raise ValueError("energies must be non-negative")
    order = tuple(int(i) for i in np.argsort(-e, kind="stable"))
    return PathOrdering(order, direct_index)


# ---------------------------------------------------------------------------
# MUSIC


def noise_subspace(data: np.ndarray, n_sources: int) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) of ``data data^H`` and the eigenvectors beyond ``n_sources``."""
    cov = data @ data.conj().T
    w, v = np.linalg.eigh(cov)
    w, v = w[::-1], v[:, ::-1]
    return w, v[:, n_sources:]


def _resolvable(eigvals, n_sources, sigma2, n_cols) -> bool:
    """True when the weakest signal eigenvalue clears the noise bulk edge."""
    rows = eigvals.size
    edge = sigma2 * n_cols * (1.0 + np.sqrt(rows / n_cols)) ** 2
    floor = max(edge, 1e-10 * eigvals[0])
    return bool(n_sources == 0 or eigvals[n_sources - 1] > floor)


def _music(data, n_sources, steer_grid, steer_one, lo, period, search, sigma2):
    eigvals, en = noise_subspace(data, n_sources)
    grid = _circular_grid(lo, period, search.grid_size)
    a = steer_grid(grid)
    den = np.sum(np.abs(en.conj().T @ a) ** 2, axis=0)
    spec = 1.0 / np.maximum(den, 1e-300)
    idx = circular_peaks(spec, n_sources)
    cell = period / search.grid_size

    def pseudo(x):
        return 1.0 / max(float(np.sum(np.abs(en.conj().T @ steer_one(x)) ** 2)), 1e-300)

    locs = np.array([_wrap(_refine_max(pseudo, grid[i], cell, search), lo, period) for i in idx])
    heights = np.array([pseudo(x) for x in locs])
    deficit = idx.size < n_sources or not _resolvable(eigvals, n_sources, sigma2, data.shape[1])
    if idx.size == 0:
        return SpectrumPeaks(locs, heights, np.zeros(0), eigvals, True)
    a_hat = np.stack([steer_one(x) for x in locs], axis=1)
    coef = np.linalg.lstsq(a_hat, data, rcond=None)[0]
    energies = np.sum(np.abs(coef) ** 2, axis=1)
    return SpectrumPeaks(locs, heights, energies, eigvals, deficit)


def delay_music(obs: ObservationSet, n_sources: int, bandwidth_hz: float,
                search: SearchConfig = SearchConfig()) -> SpectrumPeaks:
    """MUSIC peaks over total delay in ``[0, K/W)``."""
    kk = obs.n_subcarriers
    if kk <= n_sources:
        raise SubspaceTooSmall(f"K = {kk} leaves no noise subspace for {n_sources} paths")
    period = kk / bandwidth_hz
    return _music(reshape_delay(obs), n_sources,
                  lambda t: delay_vector_grid(t, bandwidth_hz, kk),
                  lambda t: delay_vector(t, bandwidth_hz, kk),
                  0.0, period, search, obs.sigma2_eff)


def ue_music(obs: ObservationSet, n_sources: int, axis: str = "g",
             search: SearchConfig = SearchConfig()) -> SpectrumPeaks:
    """MUSIC peaks over one UE-array cosine axis in ``[-1, 1)``."""
    d = obs.n_ue
    if side_length(d) <= n_sources:
        raise SubspaceTooSmall(f"sqrt(D) = {side_length(d)} leaves no noise subspace for {n_sources} paths")
    return _music(reshape_ue(obs, axis), n_sources,
                  lambda x: steering_1d_grid(x, d),
                  lambda x: steering_1d(x, d),
                  -1.0, 2.0, search, obs.sigma2_eff)


def match_by_energy(values, energies, ordering: PathOrdering) -> np.ndarray:
    """Assign the peak with the ``j``-th largest energy to the path ranked ``j`` in ``ordering``.

    Returns an array indexed by path (0 = direct). Paths left without a peak get NaN.
    """
    n_paths = len(ordering.order)
    out = np.full(n_paths, np.nan)
    ranked = np.argsort(-np.asarray(energies, float), kind="stable")
    for j, peak in enumerate(ranked[:n_paths]):
        out[ordering.order[j]] = values[peak]
    return out


def match_by_delay(delays, energies, ordering: PathOrdering) -> np.ndarray:
    """Smallest delay labels the direct path; the rest follow the energy ranking of the reflections."""
    delays = np.asarray(delays, float)
    n_paths = len(ordering.order)
    out = np.full(n_paths, np.nan)
    if delays.size == 0:
        return out
    first = int(np.argmin(delays))
    out[ordering.direct_index] = delays[first]
    rest = [i for i in np.argsort(-np.asarray(energies, float), kind="stable") if i != first]
    refl = [p for p in ordering.order if p != ordering.direct_index]
    for p, i in zip(refl, rest):
        out[p] = delays[i]
    return out


def estimate_delays_music(obs: ObservationSet, n_reflections: int, tau_r1, ordering: PathOrdering,
                          bandwidth_hz: float, search: SearchConfig = SearchConfig()):
    """Direct delay and RIS -> UE delays.

    Returns ``(tau_d, tau_r2, peaks)``; the known BS -> RIS delays are
    subtracted from the matched reflection delays, modulo the delay period.
    """
    n_paths = n_reflections + 1
    peaks = delay_music(obs, n_paths, bandwidth_hz, search)
    if peaks.deficit:
        warnings.warn(f"delay spectrum resolved fewer than {n_paths} paths", PeakDeficit, stacklevel=2)
    matcher = match_by_energy if search.matching == "energy" else match_by_delay
    total = matcher(peaks.locations, peaks.energies, ordering)
    period = obs.n_subcarriers / bandwidth_hz
    total = np.where(np.isnan(total), np.nanmean(total) if np.any(~np.isnan(total)) else 0.0, total)
    tau_r2 = np.mod(total[1:] - np.asarray(tau_r1, float), period)
    return float(total[0]), tau_r2, peaks


def estimate_aoa_music(obs: ObservationSet, n_reflections: int, ordering: PathOrdering,
                       axis: str = "g", search: SearchConfig = SearchConfig()):
    """UE-side cosines on one axis, returned as ``(direct, reflections, peaks)``."""
    n_paths = n_reflections + 1
    peaks = ue_music(obs, n_paths, axis, search)
    if peaks.deficit:
        warnings.warn(f"UE {axis}-axis spectrum resolved fewer than {n_paths} paths", PeakDeficit,
                      stacklevel=2)
    vals = match_by_energy(peaks.locations, peaks.energies, ordering)
    vals = np.where(np.isnan(vals), np.nanmean(vals) if np.any(~np.isnan(vals)) else 0.0, vals)
    return float(vals[0]), vals[1:], peaks


# ---------------------------------------------------------------------------
# gains


def _atoms_from_geometry(tau_d, g_ud, v_ud, g_bd, v_bd, tau_r2, g_ur, v_ur, scenario):
    w, kk = scenario.bandwidth_hz, scenario.n_subcarriers
    atoms = [PathAtom(delay_vector(tau_d, w, kk), steering_ura(g_ud, v_ud, scenario.n_ue),
                      steering_ura(g_bd, v_bd, scenario.n_bs))]
    for q, link in enumerate(scenario.ris_links):
        atoms.append(PathAtom(delay_vector(link.tau_r1 + tau_r2[q], w, kk),
                              steering_ura(g_ur[q], v_ur[q], scenario.n_ue),
                              steering_ura(link.g_br, link.v_br, scenario.n_bs)))
    return atoms


def atom_gram(atoms) -> np.ndarray:
    """Inner products ``<atom_i, atom_j>`` of the vectorized unit-gain path channels."""
    p = len(atoms)
    g = np.empty((p, p), dtype=complex)
    for i, ai in enumerate(atoms):
        for j, aj in enumerate(atoms):
            g[i, j] = np.vdot(ai.s, aj.s) * np.vdot(ai.u, aj.u) * np.vdot(aj.v, ai.v)
    return g


def atom_correlation(atoms, r: np.ndarray) -> np.ndarray:
    """``<atom_i, R>`` summed over subcarriers."""
    return np.array([np.vdot(a.s, np.einsum("d,kdn,n->k", a.u.conj(), r, a.v)) for a in atoms])


def estimate_gains(obs: ObservationSet, tau_d, g_ud, v_ud, g_bd, v_bd, tau_r2, g_ur, v_ur,
                   scenario) -> np.ndarray:
    """Least-squares complex gains ``[h_d, h_r1, ..., h_rQ]`` for fixed delays and angles."""
    atoms = _atoms_from_geometry(tau_d, g_ud, v_ud, g_bd, v_bd, np.atleast_1d(tau_r2),
                                 np.atleast_1d(g_ur), np.atleast_1d(v_ur), scenario)
    gram = atom_gram(atoms)
    if _cond(gram) > COND_LIMIT:
        raise IllConditioned("path regressors are (nearly) linearly dependent")
    return np.linalg.solve(gram, atom_correlation(atoms, obs.r_tilde))


# ---------------------------------------------------------------------------
# full pipeline


def estimate_all(obs: ObservationSet, scenario, search: SearchConfig = SearchConfig()) -> EstimatedChannelParams:
    """Run the four estimation stages and return the channel-parameter estimate."""
    links = scenario.ris_links
    q = len(links)
    flags = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", PeakDeficit)
        aod_g = estimate_aod_bs(obs, [l.g_br for l in links], "g", search)
        aod_v = estimate_aod_bs(obs, [l.v_br for l in links], "v", search)
        ordering = order_paths(aod_g.energies + aod_v.energies, direct_index=0)
        tau_d, tau_r2, dpk = estimate_delays_music(obs, q, [l.tau_r1 for l in links], ordering,
                                                   scenario.bandwidth_hz, search)
        g_ud, g_ur, gpk = estimate_aoa_music(obs, q, ordering, "g", search)
        v_ud, v_ur, vpk = estimate_aoa_music(obs, q, ordering, "v", search)
    for w in caught:
        if issubclass(w.category, PeakDeficit):
            flags.append(str(w.message))
        else:
            warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    for msg in flags:
        warnings.warn(msg, PeakDeficit, stacklevel=2)
    gains = estimate_gains(obs, tau_d, g_ud, v_ud, aod_g.cosine, aod_v.cosine, tau_r2, g_ur, v_ur,
                           scenario)
    eta = ChannelParams(h_d=complex(gains[0]), tau_d=tau_d, g_ud=g_ud, v_ud=v_ud,
                        g_bd=aod_g.cosine, v_bd=aod_v.cosine, h_r=gains[1:], tau_r2=tau_r2,
                        g_ur=g_ur, v_ur=v_ur)
    diag = {
        "flags": flags,
        "aod_energies": aod_g.energies + aod_v.energies,
        "delay_peaks": dpk.locations,
        "delay_energies": dpk.energies,
        "ue_g_peaks": gpk.locations,
        "ue_v_peaks": vpk.locations,
        "delay_eigenvalues": dpk.eigenvalues,
    }
    return EstimatedChannelParams(eta, ordering, diag)
