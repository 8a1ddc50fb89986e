import numpy as np
import pytest

from rclab.dynamics import (
    DivergenceError,
    Trajectory,
    closed_loop_outputs,
    closed_loop_rhs,
    drive_open_loop,
    grid_steps,
    integrate_rk4,
    iter_closed_loop_outputs,
    open_loop_rhs,
    run_closed_loop,
)
from rclab.linalg import SparseMatrix
from rclab.reservoir import ReservoirConfig, ReservoirWeights
from rclab.signal import OrbitPair, OrbitSpec, make_orbit_pair
from rclab.training import feature_map


def rk4_decay_oracle(tau):
    # one classical RK4 step of dr/dt = -r from r=1 is the quartic Taylor
    # polynomial of exp(-tau)
    return 1.0 - tau + tau**2 / 2 - tau**3 / 6 + tau**4 / 24


def make_single_neuron(input_scale=1.0, decay_rate=10.0, w_in_value=1.0):
    cfg = ReservoirConfig(
        n_neurons=1, input_dim=1, connect_prob=1.0, spectral_radius=0.0,
        input_scale=input_scale, decay_rate=decay_rate, seed=0,
    )
    m = SparseMatrix.from_coo(1, 1, [], [], [])
    weights = ReservoirWeights(
        m_base=m, m=m, w_in=np.array([[w_in_value]]), spectral_radius=0.0
    )
    return cfg, weights


class TestRhs:
    def test_zero_state_zero_input(self, small_config, small_weights):
        n = small_config.n_neurons
        deriv = open_loop_rhs(np.zeros(n), np.zeros(2), small_weights, small_config)
        np.testing.assert_array_equal(deriv, np.zeros(n))

    def test_saturation_limit(self):
        cfg, weights = make_single_neuron(input_scale=1.0, decay_rate=10.0)
        r = np.array([0.25])
        deriv_pos = open_loop_rhs(r, np.array([50.0]), weights, cfg)
        deriv_neg = open_loop_rhs(r, np.array([-50.0]), weights, cfg)
        np.testing.assert_allclose(deriv_pos, 10.0 * (1.0 - 0.25), rtol=1e-12)
        np.testing.assert_allclose(deriv_neg, 10.0 * (-1.0 - 0.25), rtol=1e-12)

    def test_scalar_tanh_value(self):
        # single neuron, no recurrence, drive 0.5: derivative gamma*tanh(0.5)
        cfg, weights = make_single_neuron(input_scale=0.5, decay_rate=10.0)
        deriv = open_loop_rhs(np.zeros(1), np.array([1.0]), weights, cfg)
        assert deriv[0] == pytest.approx(10.0 * np.tanh(0.5), rel=1e-12)
        assert deriv[0] == pytest.approx(4.6212, abs=5e-4)

    def test_closed_loop_origin_equilibrium(self, small_config, small_weights):
        n = small_config.n_neurons
        w_out = np.full((2, 2 * n), 0.3)
        deriv = closed_loop_rhs(np.zeros(n), small_weights, w_out, small_config)
        np.testing.assert_array_equal(deriv, np.zeros(n))

    def test_closed_equals_open_with_readout_input(self, small_config, small_weights, rng):
        n = small_config.n_neurons
        r = rng.uniform(-0.5, 0.5, n)
        w_out = rng.uniform(-0.2, 0.2, (2, 2 * n))
        u = w_out @ feature_map(r)
        np.testing.assert_array_equal(
            closed_loop_rhs(r, small_weights, w_out, small_config),
            open_loop_rhs(r, u, small_weights, small_config),
        )

    def test_zero_readout_decouples(self, small_config, small_weights, rng):
        from rclab.linalg import sparse_matvec

        n = small_config.n_neurons
        r = rng.uniform(-0.5, 0.5, n)
        got = closed_loop_rhs(r, small_weights, np.zeros((2, 2 * n)), small_config)
        expected = small_config.decay_rate * (
            np.tanh(sparse_matvec(small_weights.m, r)) - r
        )
        np.testing.assert_allclose(got, expected, rtol=1e-14)


class TestIntegrateRk4:
    def test_single_decay_step_matches_hand_value(self):
        traj = integrate_rk4(lambda t, r: -r, np.array([1.0]), 0.0, 0.01, 0.01)
        expected = rk4_decay_oracle(0.01)
        assert traj.values[-1, 0] == pytest.approx(expected, abs=1e-15)
        assert traj.values[-1, 0] == pytest.approx(0.99004983375, abs=1e-11)

    def test_constant_rhs_zero(self):
        traj = integrate_rk4(lambda t, r: np.zeros_like(r), np.array([2.5]), 0.0, 1.0, 0.01)
        assert np.all(traj.values == 2.5)

    def test_fourth_order_convergence(self):
        # halving the step cuts the global error on dr/dt=-r by about 2^4
        def err(tau):
            traj = integrate_rk4(lambda t, r: -r, np.array([1.0]), 0.0, 1.0, tau)
            return abs(traj.values[-1, 0] - np.exp(-1.0))

        ratio = err(0.02) / err(0.01)
        assert 12.0 <= ratio <= 20.0

    def test_nonautonomous_uses_half_steps(self):
        # dr/dt = cos(t) integrates to sin(t) with O(tau^4) error
        traj = integrate_rk4(lambda t, r: np.array([np.cos(t)]), np.array([0.0]),
                             0.0, 1.0, 0.01)
        assert traj.values[-1, 0] == pytest.approx(np.sin(1.0), abs=1e-10)

    def test_divergence_error_carries_time(self):
        with pytest.raises(DivergenceError) as err:
            integrate_rk4(lambda t, r: r**2, np.array([1.0]), 0.0, 10.0, 0.01,
                          guard=1e3)
        assert 0.0 < err.value.time < 10.0

    def test_record_stride(self):
        traj = integrate_rk4(lambda t, r: -r, np.array([1.0]), 0.0, 1.0, 0.01,
                             record_stride=10)
        assert len(traj) == 11
        assert traj.dt == pytest.approx(0.1)

    def test_rejects_bad_grid(self):
        with pytest.raises(ValueError):
            integrate_rk4(lambda t, r: -r, np.array([1.0]), 0.0, 0.015, 0.01)


class TestDriveOpenLoop:
    def test_grid_point_count(self, small_config, small_weights, small_pair):
        traj = drive_open_loop(small_weights, small_config, small_pair, "A", 0.1)
        assert len(traj) == 11
        assert traj.t0 == 0.0
        assert traj.dt == small_config.time_step

    def test_zero_amplitude_keeps_origin(self, small_config, small_weights):
        degenerate = OrbitPair(
            orbit_a=OrbitSpec(0.0, 0.0, 0.0), orbit_b=OrbitSpec(0.0, 0.0, 0.0)
        )
        traj = drive_open_loop(small_weights, small_config, degenerate, "A", 0.5)
        assert np.all(traj.values == 0.0)

    def test_deterministic(self, small_config, small_weights, small_pair):
        t1 = drive_open_loop(small_weights, small_config, small_pair, "B", 1.0)
        t2 = drive_open_loop(small_weights, small_config, small_pair, "B", 1.0)
        np.testing.assert_array_equal(t1.values, t2.values)

    def test_differs_between_orbits(self, small_config, small_weights, small_pair):
        a = drive_open_loop(small_weights, small_config, small_pair, "A", 1.0)
        b = drive_open_loop(small_weights, small_config, small_pair, "B", 1.0)
        assert not np.array_equal(a.values, b.values)

    def test_rejects_unknown_orbit(self, small_config, small_weights, small_pair):
        with pytest.raises(ValueError):
            drive_open_loop(small_weights, small_config, small_pair, "C", 1.0)

    def test_matches_generic_integrator(self, small_config, small_weights, small_pair):
        from rclab.signal import orbit_point

        traj = drive_open_loop(small_weights, small_config, small_pair, "A", 0.2)
        ref = integrate_rk4(
            lambda t, r: open_loop_rhs(
                r, orbit_point(small_pair.orbit_a, t), small_weights, small_config
            ),
            np.zeros(small_config.n_neurons), 0.0, 0.2, small_config.time_step,
        )
        np.testing.assert_allclose(traj.values, ref.values, rtol=1e-10, atol=1e-12)


class TestClosedLoop:
    def test_origin_stays_fixed(self, small_config, small_weights, rng):
        n = small_config.n_neurons
        w_out = rng.uniform(-0.2, 0.2, (2, 2 * n))
        traj_s, traj_p = run_closed_loop(
            small_weights, small_config, w_out, np.zeros(n), 1.0
        )
        assert np.all(traj_s.values == 0.0)
        assert np.all(traj_p.values == 0.0)

    def test_trajectories_share_grid(self, small_config, small_trained):
        traj_s, traj_p = run_closed_loop(
            small_trained.weights, small_config, small_trained.w_out,
            small_trained.init_a, 2.0, record_stride=5,
        )
        assert len(traj_s) == len(traj_p)
        assert traj_s.dt == traj_p.dt
        np.testing.assert_array_equal(traj_s.times, traj_p.times)

    def test_outputs_are_readout_of_states(self, small_config, small_trained):
        traj_s, traj_p = run_closed_loop(
            small_trained.weights, small_config, small_trained.w_out,
            small_trained.init_a, 1.0,
        )
        for row_s, row_p in zip(traj_s.values[::100], traj_p.values[::100]):
            np.testing.assert_allclose(
                row_p, small_trained.w_out @ feature_map(row_s), rtol=1e-12, atol=1e-14
            )

    def test_boundedness_after_transient(self, small_config, small_trained, rng):
        # tanh image is (-1,1) and the linear part contracts: components sit
        # inside the unit box (small slack) after t >= 5/gamma
        r0 = rng.uniform(-1.0, 1.0, small_config.n_neurons)
        traj_s, _ = run_closed_loop(
            small_trained.weights, small_config, small_trained.w_out, r0, 2.0
        )
        settle = traj_s.times >= 5.0 / small_config.decay_rate
        assert np.abs(traj_s.values[settle]).max() <= 1.01

    def test_zero_duration_single_point(self, small_config, small_trained):
        traj_p, r_final = closed_loop_outputs(
            small_trained.weights, small_config, small_trained.w_out,
            small_trained.init_a, 0.0,
        )
        assert len(traj_p) == 1
        np.testing.assert_array_equal(r_final, small_trained.init_a)

    def test_outputs_variant_matches_full_run(self, small_config, small_trained):
        traj_s, traj_p = run_closed_loop(
            small_trained.weights, small_config, small_trained.w_out,
            small_trained.init_a, 2.0,
        )
        traj_p2, r_final = closed_loop_outputs(
            small_trained.weights, small_config, small_trained.w_out,
            small_trained.init_a, 2.0,
        )
        np.testing.assert_array_equal(traj_p.values, traj_p2.values)
        np.testing.assert_array_equal(r_final, traj_s.values[-1])


class TestStreaming:
    def test_chunked_stream_matches_single_run(self, small_config, small_trained):
        traj_p, _ = closed_loop_outputs(
            small_trained.weights, small_config, small_trained.w_out,
            small_trained.init_a, 3.0,
        )
        collected = []
        for idx, outputs in iter_closed_loop_outputs(
            small_trained.weights, small_config, small_trained.w_out,
            small_trained.init_a, chunk_steps=70, max_steps=300,
        ):
            collected.append((idx, outputs))
        idx = np.concatenate([c[0] for c in collected])
        outs = np.concatenate([c[1] for c in collected])
        np.testing.assert_array_equal(idx, np.arange(301))
        np.testing.assert_array_equal(outs, traj_p.values)

    def test_stride_and_seams(self, small_config, small_trained):
        traj_p, _ = closed_loop_outputs(
            small_trained.weights, small_config, small_trained.w_out,
            small_trained.init_a, 3.0, record_stride=5,
        )
        blocks = list(iter_closed_loop_outputs(
            small_trained.weights, small_config, small_trained.w_out,
            small_trained.init_a, record_stride=5, chunk_steps=100, max_steps=300,
        ))
        idx = np.concatenate([b[0] for b in blocks])
        outs = np.concatenate([b[1] for b in blocks])
        np.testing.assert_array_equal(idx, np.arange(0, 301, 5))
        np.testing.assert_array_equal(outs, traj_p.values)


def test_grid_steps_rounding():
    assert grid_steps(0.1, 0.01) == 10
    assert grid_steps(550.0, 0.01) == 55000
    with pytest.raises(ValueError):
        grid_steps(0.015, 0.01)


def test_trajectory_times():
    traj = Trajectory(t0=1.0, dt=0.5, values=np.zeros((4, 2)), space="output")
    np.testing.assert_allclose(traj.times, [1.0, 1.5, 2.0, 2.5])
    assert traj.t_end == pytest.approx(2.5)
