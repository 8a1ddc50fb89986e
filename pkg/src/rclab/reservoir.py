"""Construction of the fixed random network weights.

The recurrent matrix is a sparse random matrix (each entry independently
nonzero with probability ``connect_prob``, values uniform on (-1, 1))
rescaled to a target spectral radius.  The input matrix has exactly one
nonzero per row so each neuron listens to a single input component.

Randomness is fully deterministic per seed.  A PCG64 generator is split
into three named substreams via ``SeedSequence(seed).spawn(3)``:

    substream 0 -> sparsity pattern of the recurrent matrix
    substream 1 -> values of the recurrent matrix
    substream 2 -> input-matrix columns, then values

The base matrix is stored at unit spectral radius and every target radius
is obtained by pure rescaling, so a radius sweep operates on one fixed
realization rather than resampling.
"""

from dataclasses import dataclass, replace

import numpy as np

from .linalg import SparseMatrix, spectral_radius

__all__ = [
    "ReservoirConfig",
    "ReservoirWeights",
    "build_reservoir",
    "with_spectral_radius",
]


@dataclass(frozen=True)
class ReservoirConfig:
    """Hyperparameters of the network and its integration grid."""

    n_neurons: int
    input_dim: int = 2
    connect_prob: float = 0.04
    spectral_radius: float = 0.7
    input_scale: float = 0.1
    decay_rate: float = 10.0
    time_step: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.n_neurons < 1:
            raise ValueError("n_neurons must be at least 1")
        if self.input_dim < 1:
            raise ValueError("input_dim must be at least 1")
        if not 0.0 < self.connect_prob <= 1.0:
            raise ValueError("connect_prob must be in (0, 1]")
        if self.spectral_radius < 0:
            raise ValueError("spectral_radius must be nonnegative")
        if self.decay_rate <= 0:
            raise ValueError("decay_rate must be positive")
        if self.time_step <= 0:
            raise ValueError("time_step must be positive")

    def with_radius(self, rho):
        return replace(self, spectral_radius=float(rho))


@dataclass(frozen=True)
class ReservoirWeights:
    """Fixed random weights: base matrix (unit radius), scaled matrix, input matrix.

    ``m`` always equals ``spectral_radius * m_base`` and shares the base
    matrix's sparsity pattern (literally the same index arrays).
    """

    m_base: SparseMatrix
    m: SparseMatrix
    w_in: np.ndarray
    spectral_radius: float

    def __post_init__(self):
        self.w_in.flags.writeable = False

    @property
    def n_neurons(self):
        return self.m.n_rows

    @property
    def input_dim(self):
        return self.w_in.shape[1]


def build_reservoir(config):
    """Draw the random weights for ``config`` (deterministic per seed)."""
    n, d = config.n_neurons, config.input_dim
    pattern_ss, value_ss, input_ss = np.random.SeedSequence(config.seed).spawn(3)
    rng_pattern = np.random.Generator(np.random.PCG64(pattern_ss))
    rng_value = np.random.Generator(np.random.PCG64(value_ss))
    rng_input = np.random.Generator(np.random.PCG64(input_ss))

    mask = rng_pattern.random((n, n)) < config.connect_prob
    rows, cols = np.nonzero(mask)
    values = rng_value.uniform(-1.0, 1.0, size=rows.size)
    raw = SparseMatrix.from_coo(n, n, rows, cols, values)

    base_radius = spectral_radius(raw)
    if base_radius <= 0.0:
        raise ValueError(
            "raw recurrent matrix has zero spectral radius (too small or too "
            "sparse a draw); try another seed"
        )
    m_base = raw.scaled(1.0 / base_radius)

    in_cols = rng_input.integers(0, d, size=n)
    in_vals = rng_input.uniform(-1.0, 1.0, size=n)
    w_in = np.zeros((n, d))
    w_in[np.arange(n), in_cols] = in_vals

    return ReservoirWeights(
        m_base=m_base,
        m=m_base.scaled(config.spectral_radius),
        w_in=w_in,
        spectral_radius=float(config.spectral_radius),
    )


def with_spectral_radius(weights, rho):
    """Rescale the same realization to a new spectral radius.

    The base matrix and input matrix are untouched; no re-randomization
    happens, which is what a radius sweep requires.
    """
    if rho < 0:
        raise ValueError("spectral radius must be nonnegative")
    return ReservoirWeights(
        m_base=weights.m_base,
        m=weights.m_base.scaled(rho),
        w_in=weights.w_in,
        spectral_radius=float(rho),
    )
