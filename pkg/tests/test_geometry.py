import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rispos.exceptions import DegenerateGeometry
from rispos.geometry import (
    SPEED_OF_LIGHT,
    ChannelParams,
    EulerRotation,
    PositionParams,
    direct_path_cosines,
    forward_map,
    invert_direct_path,
    invert_reflection_path,
    reduced_rotation,
    rotation_matrix,
    spherical_angles,
)
from rispos.scenario import Scenario

angles = st.floats(-np.pi, np.pi, allow_nan=False)
coord = st.floats(-60, 60, allow_nan=False)


def _oracle_rotation(a1, a2, a3):
    # independent construction from elementary rotations written out by hand
    def rz(a):
        return np.array([[np.cos(a), np.sin(a), 0], [-np.sin(a), np.cos(a), 0], [0, 0, 1]])

    def rx(a):
        return np.array([[1, 0, 0], [0, np.cos(a), np.sin(a)], [0, -np.sin(a), np.cos(a)]])

    return -(rz(a3) @ rx(a2) @ rz(a1))


class TestRotation:
    def test_zero_angles_give_minus_identity(self):
        np.testing.assert_array_equal(rotation_matrix((0, 0, 0)), -np.eye(3))

    def test_half_turn_first_angle(self):
        np.testing.assert_allclose(rotation_matrix((np.pi, 0, 0)), np.diag([1.0, 1.0, -1.0]), atol=1e-15)

    def test_dataclass_and_tuple_agree(self):
        rot = EulerRotation(0.3, 0.2, 0.1)
        np.testing.assert_array_equal(rot.matrix, rotation_matrix((0.3, 0.2, 0.1)))
        np.testing.assert_array_equal(rot.reduced, rot.matrix[1:3])

    @given(angles, angles, angles)
    def test_orthogonal(self, a1, a2, a3):
        m = rotation_matrix((a1, a2, a3))
        np.testing.assert_allclose(m.T @ m, np.eye(3), atol=1e-12)

    @given(angles, angles, angles)
    def test_matches_oracle(self, a1, a2, a3):
        np.testing.assert_allclose(rotation_matrix((a1, a2, a3)), _oracle_rotation(a1, a2, a3), atol=1e-14)

    def test_reduced_is_rows_two_and_three(self):
        m = rotation_matrix((0.4, -1.1, 2.0))
        np.testing.assert_array_equal(reduced_rotation((0.4, -1.1, 2.0)), m[1:3])

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            rotation_matrix((np.nan, 0, 0))


class TestParameterVectors:
    def test_channel_roundtrip_and_length(self):
        eta = ChannelParams(1 + 2j, 1e-7, 0.1, 0.2, 0.3, 0.4, [3 - 1j, 2j], [1e-8, 2e-8], [0.5, 0.6], [-0.1, -0.2])
        v = eta.to_vector()
        assert v.size == 7 + 5 * 2
        back = ChannelParams.from_vector(v)
        np.testing.assert_array_equal(back.to_vector(), v)

    def test_position_roundtrip_and_length(self):
        xi = PositionParams([1, 2, 3], 1j, [2 + 1j])
        v = xi.to_vector()
        assert v.size == 5 + 2
        np.testing.assert_array_equal(PositionParams.from_vector(v).to_vector(), v)

    def test_bad_lengths(self):
        with pytest.raises(ValueError):
            ChannelParams.from_vector(np.zeros(9))
        with pytest.raises(ValueError):
            PositionParams.from_vector(np.zeros(6))


class TestForwardMap:
    def test_direct_delay_table_scenario(self, table1):
        eta = forward_map(PositionParams([50, 10, 20], 1.0, [1.0]), table1)
        assert eta.tau_d == pytest.approx(np.sqrt(3000.0) / SPEED_OF_LIGHT, rel=1e-15)
        # the closed-form figure quoted for this case (with c rounded to 3e8) agrees to 1e-3
        assert eta.tau_d == pytest.approx(1.8257e-7, rel=1e-3)

    def test_boresight_z_axis_is_degenerate_for_azimuth(self):
        g_u, v_u, g_b, v_b = direct_path_cosines([0, 0, 5.0], (0, 0, 0))
        assert (g_b, v_b) == (0.0, 1.0)
        with pytest.raises(DegenerateGeometry):
            spherical_angles([0, 0, 5.0])

    def test_axis_aligned_ris_offset(self):
        sc = Scenario(ue_position=[33.0, -5, 2], ris_positions=[[30.0, -5, 2]])
        eta = forward_map(PositionParams([33.0, -5, 2], 1.0, [1.0]), sc)
        theta, phi = spherical_angles(np.array([3.0, 0, 0]))
        assert theta == pytest.approx(np.pi / 2)
        assert phi == pytest.approx(0.0)
        assert eta.tau_r2[0] == pytest.approx(3.0 / SPEED_OF_LIGHT)

    def test_gains_copied(self, table1):
        eta = forward_map(PositionParams([50, 10, 20], 2 - 1j, [3j]), table1)
        assert eta.h_d == 2 - 1j and eta.h_r[0] == 3j

    def test_coincident_points_rejected(self, table1):
        with pytest.raises(DegenerateGeometry):
            forward_map(PositionParams([0, 0, 0], 1.0, [1.0]), table1)
        with pytest.raises(DegenerateGeometry):
            forward_map(PositionParams([30, -5, 2], 1.0, [1.0]), table1)

    @settings(max_examples=60)
    @given(angles, angles, angles, st.floats(1, 80), coord, coord)
    def test_rotation_consistency(self, a1, a2, a3, x, y, z):
        p = np.array([x, y, z])
        p_r = np.array([20.0, -5.0, 3.0])
        if np.linalg.norm(p - p_r) < 1e-3:
            return
        sc = Scenario(ue_position=p, ris_positions=[p_r], rotation=(a1, a2, a3))
        eta = forward_map(PositionParams(p, 1.0, [1.0]), sc)
        m = reduced_rotation((a1, a2, a3))
        np.testing.assert_allclose([eta.g_ud, eta.v_ud], m @ (p / np.linalg.norm(p)), atol=1e-12)
        u = (p - p_r) / np.linalg.norm(p - p_r)
        np.testing.assert_allclose([eta.g_ur[0], eta.v_ur[0]], m @ u, atol=1e-12)
        for g, v in ((eta.g_ud, eta.v_ud), (eta.g_bd, eta.v_bd), (eta.g_ur[0], eta.v_ur[0])):
            assert g * g + v * v <= 1 + 1e-12


class TestInverseMaps:
    def test_direct_roundtrip_table(self, table1):
        eta = forward_map(PositionParams([50, 10, 20], 1.0, [1.0]), table1)
        np.testing.assert_allclose(invert_direct_path(eta.tau_d, eta.g_bd, eta.v_bd), [50, 10, 20], rtol=1e-12)

    def test_direct_boresight(self):
        np.testing.assert_allclose(invert_direct_path(1 / SPEED_OF_LIGHT, 0.0, 1.0), [0, 0, 1], atol=1e-15)

    def test_direct_pure_y(self):
        np.testing.assert_allclose(invert_direct_path(2 / SPEED_OF_LIGHT, 1.0, 0.0), [0, 2, 0], atol=1e-15)

    def test_reflection_roundtrip_table(self, table1):
        eta = forward_map(PositionParams([50, 10, 20], 1.0, [1.0]), table1)
        p = invert_reflection_path(eta.tau_r2[0], eta.g_ur[0], eta.v_ur[0], [30, -5, 2], (0, 0, 0))
        np.testing.assert_allclose(p, [50, 10, 20], rtol=1e-12)

    def test_reflection_unit_direction(self):
        # rotated frame cosines of the +x direction under the zero rotation are (f, g, v) = (-1, 0, 0)
        p = invert_reflection_path(1 / SPEED_OF_LIGHT, 0.0, 0.0, [0, 0, 0], (0, 0, 0))
        np.testing.assert_allclose(p, [1, 0, 0], atol=1e-15)

    def test_reflection_roundtrip_rotated(self):
        sc = Scenario(rotation=(0.3, 0.2, 0.1))
        eta = forward_map(PositionParams([50, 10, 20], 1.0, [1.0]), sc)
        p = invert_reflection_path(eta.tau_r2[0], eta.g_ur[0], eta.v_ur[0], [30, -5, 2], sc.rotation)
        np.testing.assert_allclose(p, [50, 10, 20], rtol=1e-9)

    def test_outside_unit_disc_rejected(self):
        with pytest.raises(DegenerateGeometry):
            invert_direct_path(1e-7, 0.8, 0.8)
        # within tolerance is clamped
        p = invert_direct_path(1 / SPEED_OF_LIGHT, 1.0 + 1e-12, 0.0)
        assert p[0] == 0.0
