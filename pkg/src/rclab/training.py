"""Readout training: fit one linear readout that reconstructs both orbits.

The open loop is driven separately with each orbit's signal from the zero
state.  Samples before ``t_listen`` are discarded (they still depend on the
initial condition); samples in ``[t_listen, t_train]`` are mapped through
the quadratic feature map and concatenated across the two orbits into the
regression data.  The readout solves a ridge problem via its normal
equations, whose 2N x 2N size is independent of the (much larger) sample
count.

The quadratic feature map breaks the sign symmetry of the tanh network;
without it every reconstructed orbit would drag along a mirrored twin.

For large networks the regression matrices are never materialised: the
normal matrices are accumulated over fixed-size chunks of the response
while it is integrated, which keeps peak memory flat and is bit-stable
(fixed chunk length, integer-indexed time grid).
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dynamics import SPACE_STATE, grid_steps, open_loop_chunk
from .linalg import SingularMatrixError, spd_solve
from .reservoir import build_reservoir
from .signal import make_orbit_pair, orbit_point

__all__ = [
    "TrainingConfig",
    "FitReport",
    "TrainedRC",
    "feature_map",
    "assemble_training_matrices",
    "ridge_readout",
    "train_readout",
    "train_multifunctional",
]

# Chunk length (integrator steps) of the streaming accumulation.  Fixed so
# reruns accumulate in the identical order.
_CHUNK_STEPS = 2000


@dataclass(frozen=True)
class TrainingConfig:
    t_listen: float = 50.0
    t_train: float = 550.0
    ridge: float = 1e-6

    def __post_init__(self):
        if not 0 < self.t_listen < self.t_train:
            raise ValueError("need 0 < t_listen < t_train")
        if self.ridge < 0:
            raise ValueError("ridge parameter must be nonnegative")


@dataclass(frozen=True)
class FitReport:
    """Training diagnostics: normal-equation residual and in-sample error."""

    normal_residual: float
    max_error: float
    rms_error: float


@dataclass(frozen=True)
class TrainedRC:
    """Everything needed to run the trained autonomous network.

    ``init_a`` and ``init_b`` are the open-loop states at the end of the
    two training drives; starting the closed loop from them is the canonical
    reconstruction test for each orbit.
    """

    weights: object
    config: object
    training: TrainingConfig
    pair: object
    w_out: np.ndarray
    init_a: np.ndarray
    init_b: np.ndarray
    fit: Optional[FitReport] = None

    def initial_state(self, which):
        key = str(which).upper()
        if key == "A":
            return self.init_a
        if key == "B":
            return self.init_b
        raise ValueError(f"initial state id must be 'A' or 'B', got {which!r}")


def feature_map(r):
    """Quadratic features ``(r_1..r_N, r_1^2..r_N^2)`` of a state vector."""
    r = np.asarray(r, dtype=np.float64)
    return np.concatenate((r, r * r))


def _feature_block(states):
    # row-wise feature map for a (m, N) block of states
    return np.hstack((states, states * states))


def _slice_range(traj, t_lo, t_hi):
    i0 = int(round((t_lo - traj.t0) / traj.dt))
    i1 = int(round((t_hi - traj.t0) / traj.dt))
    ok = (
        0 <= i0 <= i1 < len(traj)
        and abs(traj.t0 + i0 * traj.dt - t_lo) <= 1e-9
        and abs(traj.t0 + i1 * traj.dt - t_hi) <= 1e-9
    )
    if not ok:
        raise ValueError(
            f"trajectory grid (t0={traj.t0}, dt={traj.dt}, n={len(traj)}) does "
            f"not cover [{t_lo}, {t_hi}] on the step grid"
        )
    return i0, i1


def assemble_training_matrices(resp_a, resp_b, pair, tcfg):
    """Build the concatenated regression matrices from two recorded responses.

    Columns of the feature matrix are ``q(r(t))`` for ``t`` from
    ``t_listen`` to ``t_train`` on the step grid, first for orbit A, then
    for orbit B; the target matrix holds the orbit points at the same
    times.  Returns ``(features, targets)`` of shapes (2N, K) and (D, K).
    """
    for resp in (resp_a, resp_b):
        if resp.space != SPACE_STATE:
            raise ValueError("responses must be state-space trajectories")
    if resp_a.dt != resp_b.dt:
        raise ValueError("responses must share one time grid")
    xs, ys = [], []
    for resp, orbit in ((resp_a, pair.orbit_a), (resp_b, pair.orbit_b)):
        i0, i1 = _slice_range(resp, tcfg.t_listen, tcfg.t_train)
        block = resp.values[i0 : i1 + 1]
        times = resp.t0 + resp.dt * np.arange(i0, i1 + 1)
        xs.append(_feature_block(block).T)
        ys.append(orbit_point(orbit, times).T)
    return np.concatenate(xs, axis=1), np.concatenate(ys, axis=1)


def _solve_normal_equations(gram, cross, ridge):
    # gram: (2N, 2N) feature Gram matrix, cross: (D, 2N) target-feature products
    h = 0.5 * (gram + gram.T)
    h[np.diag_indices_from(h)] += ridge
    try:
        z = spd_solve(h, cross.T)
    except SingularMatrixError as exc:
        raise SingularMatrixError(
            f"{exc}; the regression normal matrix is singular -- use a "
            "positive ridge parameter",
            pivot=exc.pivot,
        ) from exc
    residual = np.linalg.norm(h @ z - cross.T) / np.linalg.norm(cross.T)
    return z.T, float(residual)


def ridge_readout(x, y, ridge):
    """Ridge regression readout ``W = Y X^T (X X^T + ridge I)^{-1}``.

    Solved through the normal equations with a Cholesky factorisation; the
    ridge shift makes the system positive definite for any ``ridge > 0``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2 or x.shape[1] != y.shape[1]:
        raise ValueError("feature and target matrices must share columns")
    w, _ = _solve_normal_equations(x @ x.T, y @ x.T, ridge)
    return w


def _response_blocks(weights, config, orbit, tcfg):
    """Yield ``(times, states)`` blocks of the training-window response.

    Runs the listening stage silently, then streams the training window in
    fixed chunks.  Block boundaries do not perturb the integration, and the
    concatenated blocks tile [t_listen, t_train] exactly once.
    """
    tau = config.time_step
    n_listen = grid_steps(tcfg.t_listen, tau)
    n_cols = grid_steps(tcfg.t_train - tcfg.t_listen, tau) + 1
    r = np.zeros(weights.n_neurons)
    _, r = open_loop_chunk(weights, config, orbit, r, 0, n_listen,
                           record_states=False)
    step = n_listen
    remaining = n_cols - 1
    first = True
    while first or remaining > 0:
        m = min(_CHUNK_STEPS, remaining)
        states, r = open_loop_chunk(weights, config, orbit, r, step, m)
        block = states if first else states[1:]
        lo = step if first else step + 1
        times = tau * np.arange(lo, step + m + 1)
        yield times, block, r
        step += m
        remaining -= m
        first = False


def train_readout(weights, config, tcfg, pair, evaluate_fit=True):
    """Fit the readout for a fixed weight realization and return the result.

    The same weights and training parameters are used for both orbit
    drives.  When ``evaluate_fit`` is set the training window is integrated
    a second time to measure in-sample reconstruction errors.
    """
    if config.input_dim != 2:
        raise ValueError("the twin-orbit task drives 2 input components; set input_dim=2")
    n = weights.n_neurons
    gram = np.zeros((2 * n, 2 * n))
    cross = np.zeros((config.input_dim, 2 * n))
    finals = {}
    for name, orbit in (("A", pair.orbit_a), ("B", pair.orbit_b)):
        r_final = None
        for times, block, r_final in _response_blocks(weights, config, orbit, tcfg):
            q = _feature_block(block)
            gram += q.T @ q
            cross += orbit_point(orbit, times).T @ q
        finals[name] = r_final
    w_out, residual = _solve_normal_equations(gram, cross, tcfg.ridge)

    fit = None
    if evaluate_fit:
        max_err = 0.0
        sq_sum = 0.0
        count = 0
        for _, orbit in (("A", pair.orbit_a), ("B", pair.orbit_b)):
            for times, block, _ in _response_blocks(weights, config, orbit, tcfg):
                pred = _feature_block(block) @ w_out.T
                err = np.linalg.norm(pred - orbit_point(orbit, times), axis=1)
                max_err = max(max_err, float(err.max()))
                sq_sum += float((err ** 2).sum())
                count += err.size
        fit = FitReport(
            normal_residual=residual,
            max_error=max_err,
            rms_error=float(np.sqrt(sq_sum / count)),
        )

    return TrainedRC(
        weights=weights,
        config=config,
        training=tcfg,
        pair=pair,
        w_out=w_out,
        init_a=finals["A"],
        init_b=finals["B"],
        fit=fit,
    )


def train_multifunctional(config, tcfg, x_cen, b=5.0, evaluate_fit=True):
    """Full pipeline: draw weights from the seed, train on both orbits."""
    weights = build_reservoir(config)
    pair = make_orbit_pair(x_cen, b)
    return train_readout(weights, config, tcfg, pair, evaluate_fit=evaluate_fit)
