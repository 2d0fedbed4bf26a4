import numpy as np
import pytest

from conftest import random_scenario
from rispos.channel import effective_channels, steering_1d_grid, delay_vector_grid
from rispos.exceptions import DimensionMismatch, InvalidPilot
from rispos.scenario import synthesize
from rispos.signal import (
    ObservationSet,
    orthogonal_pilot,
    reshape_bs,
    reshape_delay,
    reshape_ue,
    simulate_observations,
    simulate_raw,
)


def _projection_residual(mat, basis):
    q, _ = np.linalg.qr(basis)
    return np.linalg.norm(mat - q @ (q.conj().T @ mat)) / np.linalg.norm(mat)


def _rank(mat, tol=1e-9):
    s = np.linalg.svd(mat, compute_uv=False)
    return int(np.sum(s > tol * s[0]))


@pytest.fixture(scope="module")
def two_ris():
    rng = np.random.default_rng(7)
    sc = random_scenario(rng, q=2, n_bs=36, n_ue=36, n_ris=16, n_sub=16)
    return sc, synthesize(sc, rng).eta


class TestSimulateObservations:
    def test_noiseless_limit(self, table1):
        eta = synthesize(table1, np.random.default_rng(0)).eta
        obs = simulate_observations(eta, table1, noiseless=True)
        np.testing.assert_array_equal(obs.r_tilde, effective_channels(eta, table1))

    def test_zero_variance_is_noiseless(self, table1):
        eta = synthesize(table1).eta
        obs = simulate_observations(eta, table1, 3, sigma2_eff=0.0)
        np.testing.assert_array_equal(obs.r_tilde, effective_channels(eta, table1))

    def test_noise_moment(self, table1):
        eta = synthesize(table1, np.random.default_rng(1)).eta
        obs = simulate_observations(eta, table1, np.random.default_rng(2))
        err = (obs.r_tilde - effective_channels(eta, table1)).ravel()
        assert err.size >= 1e5
        s2 = table1.sigma2_eff
        # |e|^2 is exponential with mean s2 and standard deviation s2
        se = s2 / np.sqrt(err.size)
        assert abs(np.mean(np.abs(err) ** 2) - s2) < 3 * se
        assert abs(np.mean(err)) < 3 * np.sqrt(s2 / err.size)

    def test_same_seed_bit_identical(self, table1):
        eta = synthesize(table1, np.random.default_rng(1)).eta
        a = simulate_observations(eta, table1, 99).r_tilde
        b = simulate_observations(eta, table1, np.random.default_rng(99)).r_tilde
        assert a.tobytes() == b.tobytes()

    def test_effective_variance(self, table1):
        expected = 64 / 6e5 * 10 ** (-11) + table1.beta_direct / 101
        assert table1.sigma2_eff == pytest.approx(expected, rel=1e-12)


class TestRaw:
    def test_pilot_orthogonality(self):
        x = orthogonal_pilot(16, 40, 16)
        np.testing.assert_allclose(x @ x.conj().T, 40 / 16 * np.eye(16), atol=1e-12)

    def test_pilot_too_short(self):
        with pytest.raises(InvalidPilot):
            orthogonal_pilot(16, 8, 16)

    def test_noiseless_decorrelation_exact(self):
        sc = random_scenario(np.random.default_rng(3), q=1, rician_k=np.inf)
        eta = synthesize(sc, np.random.default_rng(4)).eta
        obs = simulate_raw(eta, sc, 64, 0, sigma2=0.0)
        np.testing.assert_allclose(obs.r_tilde, effective_channels(eta, sc), atol=1e-10 * abs(eta.h_d))

    def test_square_unitary_pilot(self):
        # T = D with a scaled unitary pilot decorrelates exactly
        sc = random_scenario(np.random.default_rng(5), q=1, rician_k=np.inf)
        eta = synthesize(sc).eta
        u, _ = np.linalg.qr(np.random.default_rng(6).standard_normal((16, 16)) + 0j)
        obs = simulate_raw(eta, sc, 16, 0, sigma2=0.0, pilot=u)
        np.testing.assert_allclose(obs.r_tilde, effective_channels(eta, sc), atol=1e-10 * abs(eta.h_d))

    def test_slot_count_validation(self):
        sc = random_scenario(np.random.default_rng(5), q=0)
        eta = synthesize(sc).eta
        with pytest.raises(InvalidPilot):
            simulate_raw(eta, sc, 8)
        with pytest.raises(InvalidPilot):
            simulate_raw(eta, sc, 32, pilot=np.ones((16, 20)))

    def test_moments_match_decorrelated_model(self):
        sc = random_scenario(np.random.default_rng(8), q=1, rician_k=10.0, inv_sigma2_db=100)
        eta = synthesize(sc, np.random.default_rng(9)).eta
        t_slots = 32
        obs = simulate_raw(eta, sc, t_slots, np.random.default_rng(10))
        ref = simulate_observations(eta, sc, np.random.default_rng(11), sigma2_eff=obs.sigma2_eff)
        assert obs.sigma2_eff == pytest.approx(16 / t_slots * sc.sigma2 + sc.beta_direct / 11)
        h = effective_channels(eta, sc)
        for r in (obs.r_tilde, ref.r_tilde):
            e = (r - h).ravel()
            se = obs.sigma2_eff / np.sqrt(e.size)
            assert abs(np.mean(np.abs(e) ** 2) - obs.sigma2_eff) < 4 * se
            assert abs(np.mean(e)) < 4 * np.sqrt(obs.sigma2_eff / e.size)


class TestReshapes:
    def test_shapes(self, table1):
        obs = ObservationSet(np.zeros((32, 64, 100), complex), 1.0)
        assert reshape_bs(obs).shape == (10, 10 * 64 * 32)
        assert reshape_ue(obs, "v").shape == (8, 8 * 100 * 32)
        assert reshape_delay(obs).shape == (32, 6400)
        for m in (reshape_bs(obs), reshape_ue(obs), reshape_delay(obs)):
            assert not np.any(m)

    def test_single_path_rank_one(self):
        sc = random_scenario(np.random.default_rng(12), q=0, n_bs=36, n_ue=36)
        eta = synthesize(sc).eta
        obs = simulate_observations(eta, sc, noiseless=True)
        for axis in ("g", "v"):
            assert _rank(reshape_bs(obs, axis)) == 1
            assert _rank(reshape_ue(obs, axis)) == 1
        assert _rank(reshape_delay(obs)) == 1

    def test_column_spaces(self, two_ris):
        sc, eta = two_ris
        obs = simulate_observations(eta, sc, noiseless=True)
        links = sc.ris_links
        gb = [eta.g_bd] + [l.g_br for l in links]
        vb = [eta.v_bd] + [l.v_br for l in links]
        gu = [eta.g_ud, *eta.g_ur]
        vu = [eta.v_ud, *eta.v_ur]
        taus = [eta.tau_d] + [l.tau_r1 + t for l, t in zip(links, eta.tau_r2)]
        cases = [
            (reshape_bs(obs, "g"), steering_1d_grid(gb, 36)),
            (reshape_bs(obs, "v"), steering_1d_grid(vb, 36)),
            (reshape_ue(obs, "g"), steering_1d_grid(gu, 36)),
            (reshape_ue(obs, "v"), steering_1d_grid(vu, 36)),
            (reshape_delay(obs), delay_vector_grid(taus, sc.bandwidth_hz, sc.n_subcarriers)),
        ]
        for mat, basis in cases:
            assert _rank(mat) == 3
            assert _projection_residual(mat, basis) < 1e-9

    def test_delay_rows_are_column_major_vec(self, two_ris):
        sc, eta = two_ris
        obs = simulate_observations(eta, sc, noiseless=True)
        rd = reshape_delay(obs)
        np.testing.assert_array_equal(rd[3], obs.r_tilde[3].ravel(order="F"))

    def test_bad_axis(self):
        obs = ObservationSet(np.zeros((2, 4, 4), complex), 1.0)
        with pytest.raises(ValueError):
            reshape_bs(obs, "x")

    def test_bad_shape(self):
        with pytest.raises(DimensionMismatch):
            ObservationSet(np.zeros((4, 4)), 1.0)
