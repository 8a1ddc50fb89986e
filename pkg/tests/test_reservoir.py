import dataclasses

import numpy as np
import pytest

from rclab.io import load_weights, save_weights
from rclab.linalg import spectral_radius
from rclab.reservoir import ReservoirConfig, build_reservoir, with_spectral_radius


def test_nonzero_count_near_expectation():
    cfg = ReservoirConfig(n_neurons=500, connect_prob=0.04, spectral_radius=0.5, seed=1)
    w = build_reservoir(cfg)
    expected = 0.04 * 500 * 500
    assert abs(w.m.nnz - expected) <= 0.05 * expected


def test_target_spectral_radius_hit():
    cfg = ReservoirConfig(n_neurons=200, spectral_radius=0.3, seed=4)
    w = build_reservoir(cfg)
    assert spectral_radius(w.m) == pytest.approx(0.3, rel=1e-6)
    assert spectral_radius(w.m_base) == pytest.approx(1.0, rel=1e-6)


def test_same_seed_bit_identical():
    cfg = ReservoirConfig(n_neurons=120, spectral_radius=0.4, seed=99)
    w1 = build_reservoir(cfg)
    w2 = build_reservoir(cfg)
    np.testing.assert_array_equal(w1.m.data, w2.m.data)
    np.testing.assert_array_equal(w1.m.indices, w2.m.indices)
    np.testing.assert_array_equal(w1.m.indptr, w2.m.indptr)
    np.testing.assert_array_equal(w1.w_in, w2.w_in)


def test_different_seed_differs():
    cfg = ReservoirConfig(n_neurons=120, spectral_radius=0.4, seed=99)
    other = build_reservoir(dataclasses.replace(cfg, seed=100))
    w = build_reservoir(cfg)
    assert not np.array_equal(w.m.data, other.m.data)


def test_input_matrix_one_nonzero_per_row():
    cfg = ReservoirConfig(n_neurons=150, input_dim=2, spectral_radius=0.5, seed=0)
    w = build_reservoir(cfg)
    nonzeros_per_row = (w.w_in != 0).sum(axis=1)
    np.testing.assert_array_equal(nonzeros_per_row, np.ones(150, dtype=int))
    values = w.w_in[w.w_in != 0]
    assert np.all(np.abs(values) < 1.0)
    # both input columns get used
    assert set(np.nonzero(w.w_in)[1]) == {0, 1}


def test_rescale_idempotent_and_exact_ratio():
    cfg = ReservoirConfig(n_neurons=100, spectral_radius=0.7, seed=5)
    w = build_reservoir(cfg)
    same = with_spectral_radius(w, 0.7)
    np.testing.assert_array_equal(same.m.data, w.m.data)

    down = with_spectral_radius(w, 0.699)
    np.testing.assert_array_equal(down.m.data, 0.699 * np.asarray(w.m_base.data))
    assert down.m.indptr is w.m_base.indptr
    assert down.m.indices is w.m_base.indices
    assert down.w_in is w.w_in


def test_rescale_zero_gives_zero_matrix():
    cfg = ReservoirConfig(n_neurons=50, spectral_radius=0.7, seed=5)
    w = with_spectral_radius(build_reservoir(cfg), 0.0)
    assert np.all(np.asarray(w.m.data) == 0.0)
    assert w.m.nnz == w.m_base.nnz  # pattern untouched


def test_rescale_rejects_negative():
    cfg = ReservoirConfig(n_neurons=20, spectral_radius=0.5, seed=5)
    with pytest.raises(ValueError):
        with_spectral_radius(build_reservoir(cfg), -0.1)


def test_connectivity_fraction_matches_probability():
    # advisory sanity: pooled nonzero fraction over several seeds stays
    # within 4 sigma of the binomial expectation
    n, p = 150, 0.04
    total = 0
    seeds = range(20)
    for seed in seeds:
        cfg = ReservoirConfig(n_neurons=n, connect_prob=p, spectral_radius=0.5, seed=seed)
        total += build_reservoir(cfg).m.nnz
    draws = len(seeds) * n * n
    sigma = np.sqrt(draws * p * (1 - p))
    assert abs(total - draws * p) <= 4 * sigma


def test_zero_radius_draw_raises():
    # connect_prob small enough that a tiny matrix draws no entries at all
    cfg = ReservoirConfig(n_neurons=2, connect_prob=1e-6, spectral_radius=0.5, seed=3)
    with pytest.raises(ValueError, match="seed"):
        build_reservoir(cfg)


def test_config_validation():
    with pytest.raises(ValueError):
        ReservoirConfig(n_neurons=0)
    with pytest.raises(ValueError):
        ReservoirConfig(n_neurons=10, connect_prob=0.0)
    with pytest.raises(ValueError):
        ReservoirConfig(n_neurons=10, connect_prob=1.5)
    with pytest.raises(ValueError):
        ReservoirConfig(n_neurons=10, spectral_radius=-1.0)
    with pytest.raises(ValueError):
        ReservoirConfig(n_neurons=10, decay_rate=0.0)
    with pytest.raises(ValueError):
        ReservoirConfig(n_neurons=10, time_step=-0.01)


def test_weights_roundtrip_bit_exact(tmp_path):
    cfg = ReservoirConfig(n_neurons=80, spectral_radius=0.27, seed=12)
    w = build_reservoir(cfg)
    path = tmp_path / "weights.npz"
    save_weights(path, cfg, w)
    cfg2, w2 = load_weights(path)
    assert cfg2 == cfg
    np.testing.assert_array_equal(w2.m_base.data, w.m_base.data)
    np.testing.assert_array_equal(w2.m.data, w.m.data)
    np.testing.assert_array_equal(w2.m.indices, w.m.indices)
    np.testing.assert_array_equal(w2.m.indptr, w.m.indptr)
    np.testing.assert_array_equal(w2.w_in, w.w_in)
    assert w2.spectral_radius == w.spectral_radius
