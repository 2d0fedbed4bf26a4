"""Coordinate conventions, the channel/position parameter vectors and the maps between them.

The BS sits at the origin with its URA in the y-z plane. Every RIS lies in an
x-z plane. UE-side direction cosines are obtained by applying the reduced
rotation matrix to the unit propagation direction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateGeometry

SPEED_OF_LIGHT = 299_792_458.0
UNIT_BALL_TOL = 1e-9


def _r_axis3(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


def _r_axis1(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, s], [0.0, -s, c]])


@dataclass(frozen=True)
class EulerRotation:
    """Euler angles (radians) describing the UE array orientation."""

    alpha1: float = 0.0
    alpha2: float = 0.0
    alpha3: float = 0.0

    @property
    def matrix(self) -> np.ndarray:
        return rotation_matrix(self)

    @property
    def reduced(self) -> np.ndarray:
        return self.matrix[1:3, :]


def rotation_matrix(rot) -> np.ndarray:
    """Full 3x3 UE rotation ``-R3(a3) @ R2(a2) @ R1(a1)``.

    ``R1`` and ``R3`` rotate about the z axis and ``R2`` about the x axis, each
    written with the ``[[c, s], [-s, c]]`` sign pattern.
    """
    a1, a2, a3 = _as_angles(rot)
    if not np.all(np.isfinite([a1, a2, a3])):
        raise ValueError("Euler angles must be finite")
    return -_r_axis3(a3) @ _r_axis1(a2) @ _r_axis3(a1)


def reduced_rotation(rot) -> np.ndarray:
    """Rows 2-3 of :func:`rotation_matrix`, mapping a unit direction to (g, v) at the UE."""
    return rotation_matrix(rot)[1:3, :]


def _as_angles(rot):
    if isinstance(rot, EulerRotation):
        return rot.alpha1, rot.alpha2, rot.alpha3
    a = np.asarray(rot, dtype=float).ravel()
    if a.shape != (3,):
        raise ValueError(f"expected three Euler angles, got shape {a.shape}")
    return float(a[0]), float(a[1]), float(a[2])


def spherical_angles(vec) -> tuple[float, float]:
    """Elevation (from +z) and azimuth (``arctan2(y, x)``) of a displacement vector."""
    vec = np.asarray(vec, dtype=float)
    r = np.linalg.norm(vec)
    if r == 0.0:
        raise DegenerateGeometry("zero-length displacement has no direction")
    if vec[0] == 0.0 and vec[1] == 0.0:
        raise DegenerateGeometry("azimuth undefined on the z axis")
    theta = float(np.arccos(np.clip(vec[2] / r, -1.0, 1.0)))
    phi = float(np.arctan2(vec[1], vec[0]))
    return theta, phi


def unit_direction(theta: float, phi: float) -> np.ndarray:
    st = np.sin(theta)
    return np.array([st * np.cos(phi), st * np.sin(phi), np.cos(theta)])


def _unit(vec, what: str) -> tuple[np.ndarray, float]:
    vec = np.asarray(vec, dtype=float)
    r = float(np.linalg.norm(vec))
    if not np.isfinite(r):
        raise ValueError(f"{what} must be finite")
    if r == 0.0:
        raise DegenerateGeometry(f"{what} coincides with its reference point")
    return vec / r, r


# ---------------------------------------------------------------------------
# parameter containers


@dataclass(frozen=True)
class ChannelParams:
    """Channel-domain parameters of the direct path and ``Q`` reflection paths.

    Flattened layout (length ``7 + 5Q``)::

        [Re h_d, Im h_d, tau_d, g_Ud, v_Ud, g_Bd, v_Bd,
         Re h_r1, Im h_r1, tau_r2_1, g_Ur1, v_Ur1, ...]
    """

    h_d: complex
    tau_d: float
    g_ud: float
    v_ud: float
    g_bd: float
    v_bd: float
    h_r: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    tau_r2: np.ndarray = field(default_factory=lambda: np.zeros(0))
    g_ur: np.ndarray = field(default_factory=lambda: np.zeros(0))
    v_ur: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        for name, dt in (("h_r", complex), ("tau_r2", float), ("g_ur", float), ("v_ur", float)):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=dt)))
        q = self.h_r.shape[0]
        if not (self.tau_r2.shape == self.g_ur.shape == self.v_ur.shape == (q,)):
            raise ValueError("reflection-path fields must all have length Q")

    @property
    def n_reflections(self) -> int:
        return int(self.h_r.shape[0])

    def to_vector(self) -> np.ndarray:
        out = [self.h_d.real, self.h_d.imag, self.tau_d, self.g_ud, self.v_ud, self.g_bd, self.v_bd]
        for q in range(self.n_reflections):
            out += [self.h_r[q].real, self.h_r[q].imag, self.tau_r2[q], self.g_ur[q], self.v_ur[q]]
        return np.asarray(out, dtype=float)

    @classmethod
    def from_vector(cls, vec) -> "ChannelParams":
        vec = np.asarray(vec, dtype=float).ravel()
        if vec.size < 7 or (vec.size - 7) % 5:
            raise ValueError(f"channel parameter vector length {vec.size} is not 7 + 5Q")
        refl = vec[7:].reshape(-1, 5)
        return cls(
            h_d=complex(vec[0], vec[1]), tau_d=float(vec[2]),
            g_ud=float(vec[3]), v_ud=float(vec[4]), g_bd=float(vec[5]), v_bd=float(vec[6]),
            h_r=refl[:, 0] + 1j * refl[:, 1], tau_r2=refl[:, 2], g_ur=refl[:, 3], v_ur=refl[:, 4],
        )

    def direct_subset(self) -> np.ndarray:
        return self.to_vector()[:7]

    def reflection_subset(self, q: int) -> np.ndarray:
        return self.to_vector()[7 + 5 * q: 12 + 5 * q]


@dataclass(frozen=True)
class PositionParams:
    """UE position plus the complex path gains, flattened as ``[x, y, z, Re h_d, Im h_d, Re h_r1, Im h_r1, ...]``."""

    position: np.ndarray
    h_d: complex
    h_r: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        object.__setattr__(self, "h_r", np.atleast_1d(np.asarray(self.h_r, dtype=complex)))

    @property
    def n_reflections(self) -> int:
        return int(self.h_r.shape[0])

    def to_vector(self) -> np.ndarray:
        out = list(self.position) + [self.h_d.real, self.h_d.imag]
        for h in self.h_r:
            out += [h.real, h.imag]
        return np.asarray(out, dtype=float)

    @classmethod
    def from_vector(cls, vec) -> "PositionParams":
        vec = np.asarray(vec, dtype=float).ravel()
        if vec.size < 5 or (vec.size - 5) % 2:
            raise ValueError(f"position parameter vector length {vec.size} is not 5 + 2Q")
        g = vec[5:].reshape(-1, 2)
        return cls(position=vec[:3], h_d=complex(vec[3], vec[4]), h_r=g[:, 0] + 1j * g[:, 1])


# ---------------------------------------------------------------------------
# forward and inverse maps


def direct_path_cosines(p_ue, rot) -> tuple[float, float, float, float]:
    """(g_Ud, v_Ud, g_Bd, v_Bd) for a UE at ``p_ue`` seen from the BS at the origin."""
    u, _ = _unit(p_ue, "UE position")
    g_u, v_u = reduced_rotation(rot) @ u
    return float(g_u), float(v_u), float(u[1]), float(u[2])


def reflection_path_cosines(p_ue, p_ris, rot) -> tuple[float, float]:
    """(g_Ur, v_Ur) at the UE for the RIS -> UE leg."""
    u, _ = _unit(np.asarray(p_ue, float) - np.asarray(p_ris, float), "UE position relative to RIS")
    g_u, v_u = reduced_rotation(rot) @ u
    return float(g_u), float(v_u)


def forward_map(xi: PositionParams, scenario) -> ChannelParams:
    """Map position-domain parameters to channel-domain parameters.

    ``scenario`` must expose ``ris_positions`` (Q x 3) and ``rotation``.
    """
    p = xi.position
    ris = np.asarray(scenario.ris_positions, dtype=float).reshape(-1, 3)
    if ris.shape[0] != xi.n_reflections:
        raise ValueError(f"xi carries {xi.n_reflections} reflection gains but scenario has {ris.shape[0]} RIS")
    rot = scenario.rotation
    _, dist = _unit(p, "UE position")
    g_ud, v_ud, g_bd, v_bd = direct_path_cosines(p, rot)
    tau_r2, g_ur, v_ur = [], [], []
    for p_r in ris:
        _, d2 = _unit(p - p_r, "UE position relative to RIS")
        g, v = reflection_path_cosines(p, p_r, rot)
        tau_r2.append(d2 / SPEED_OF_LIGHT)
        g_ur.append(g)
        v_ur.append(v)
    return ChannelParams(
        h_d=xi.h_d, tau_d=dist / SPEED_OF_LIGHT,
        g_ud=g_ud, v_ud=v_ud, g_bd=g_bd, v_bd=v_bd,
        h_r=xi.h_r, tau_r2=tau_r2, g_ur=g_ur, v_ur=v_ur,
    )


def _closing_cosine(g: float, v: float) -> float:
    s = g * g + v * v
    if not np.isfinite(s) or s > 1.0 + UNIT_BALL_TOL:
        raise DegenerateGeometry(f"direction cosines outside the unit disc (g^2 + v^2 = {s:.12g})")
    return float(np.sqrt(max(0.0, 1.0 - s)))


def invert_direct_path(tau_d: float, g_bd: float, v_bd: float) -> np.ndarray:
    """UE position from the direct-path delay and BS-side cosines (UE assumed at x > 0)."""
    d = SPEED_OF_LIGHT * tau_d
    return np.array([d * _closing_cosine(g_bd, v_bd), d * g_bd, d * v_bd])


def invert_reflection_path(tau_r2: float, g_ur: float, v_ur: float, ris_position, rot) -> np.ndarray:
    """UE position from one reflection path.

    The unobserved UE-side cosine takes the negative root, the rotation is
    undone (the matrix is orthogonal so its inverse is its transpose) and the
    RIS -> UE direction is scaled by the propagation distance.
    """
    f_ur = -_closing_cosine(g_ur, v_ur)
    direction = rotation_matrix(rot).T @ np.array([f_ur, g_ur, v_ur])
    return np.asarray(ris_position, dtype=float) + SPEED_OF_LIGHT * tau_r2 * direction
