"""Fixed-step RK4 integration of the driven and autonomous networks.

Two systems are integrated on the same time grid:

* the input-driven ("open-loop") network
      dr/dt = gamma * (-r + tanh(M r + sigma W_in u(t)))
* the autonomous ("closed-loop") network obtained after training, where the
  input is replaced by the readout of the quadratic features
      dr/dt = gamma * (-r + tanh(M r + sigma W_in W_out q(r))).

The step is fixed (no adaptivity) so chaotic trajectories are reproducible;
nonautonomous inputs are evaluated analytically at the half steps.  A cheap
divergence guard aborts when any component leaves [-guard, guard], far
outside the tanh-bounded attractor.
"""

from dataclasses import dataclass

import numpy as np

from ._kernels import closed_loop_rk4, open_loop_rk4
from .signal import orbit_point

__all__ = [
    "Trajectory",
    "DivergenceError",
    "open_loop_rhs",
    "closed_loop_rhs",
    "integrate_rk4",
    "drive_open_loop",
    "run_closed_loop",
    "closed_loop_outputs",
    "iter_closed_loop_outputs",
]

# Abort threshold for the network integrators; tanh bounds the attractor to
# (-1, 1) so anything beyond this is a blow-up in progress.
DIVERGENCE_GUARD = 10.0

SPACE_STATE = "state"
SPACE_OUTPUT = "output"


class DivergenceError(RuntimeError):
    """Integration left the admissible region; ``time`` is the blow-up time."""

    def __init__(self, msg, time):
        super().__init__(msg)
        self.time = time


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled trajectory, in state space or readout space."""

    t0: float
    dt: float
    values: np.ndarray
    space: str

    def __post_init__(self):
        if self.values.ndim != 2 or len(self.values) < 1:
            raise ValueError("trajectory needs a (n_points, dim) value array")

    def __len__(self):
        return len(self.values)

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(len(self.values))

    @property
    def t_end(self):
        return self.t0 + self.dt * (len(self.values) - 1)


def grid_steps(span, time_step):
    """Number of integrator steps covering ``span``; rejects misaligned spans."""
    n = int(round(span / time_step))
    if abs(n * time_step - span) > 1e-9 * max(1.0, abs(span)):
        raise ValueError(
            f"span {span} is not a multiple of the time step {time_step}"
        )
    return n


def open_loop_rhs(r, u, weights, config):
    """Time derivative of the driven network at state ``r`` with input ``u``."""
    from .linalg import sparse_matvec

    pre = sparse_matvec(weights.m, r) + config.input_scale * (weights.w_in @ u)
    return config.decay_rate * (np.tanh(pre) - r)


def closed_loop_rhs(r, weights, w_out, config):
    """Time derivative of the autonomous network (readout fed back as input)."""
    from .training import feature_map

    return open_loop_rhs(r, w_out @ feature_map(r), weights, config)


def integrate_rk4(rhs, r0, t0, t1, tau, record_stride=1, guard=np.inf):
    """Classical RK4 with fixed step ``tau`` for a generic ``rhs(t, r)``.

    Records the state every ``record_stride`` steps (always including the
    initial state).  Raises :class:`DivergenceError` when the state leaves
    the guard region or turns non-finite.
    """
    if t1 <= t0:
        raise ValueError("t1 must exceed t0")
    if tau <= 0 or record_stride < 1:
        raise ValueError("tau must be positive and record_stride at least 1")
    n_steps = grid_steps(t1 - t0, tau)
    r = np.atleast_1d(np.array(r0, dtype=np.float64))
    states = np.empty((n_steps // record_stride + 1, r.size))
    states[0] = r
    half, sixth = 0.5 * tau, tau / 6.0
    rec = 1
    for k in range(n_steps):
        t = t0 + k * tau
        k1 = rhs(t, r)
        k2 = rhs(t + half, r + half * k1)
        k3 = rhs(t + half, r + half * k2)
        k4 = rhs(t + tau, r + tau * k3)
        r = r + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(r)) or np.abs(r).max() > guard:
            raise DivergenceError(
                f"state diverged at t={t0 + (k + 1) * tau}", time=t0 + (k + 1) * tau
            )
        if (k + 1) % record_stride == 0:
            states[rec] = r
            rec += 1
    return Trajectory(t0=t0, dt=tau * record_stride, values=states[:rec], space=SPACE_STATE)


def _select_orbit(pair, which):
    key = str(which).upper()
    if key == "A":
        return pair.orbit_a
    if key == "B":
        return pair.orbit_b
    raise ValueError(f"orbit id must be 'A' or 'B', got {which!r}")


def _orbit_inputs(orbit, tau, start_step, n_steps):
    """Inputs on the step grid and at half steps, indexed from a global step.

    Times are computed as ``index * tau`` from the global integer step index
    so that chunked integration reproduces a single long run bit for bit.
    """
    idx = start_step + np.arange(n_steps + 1)
    u_grid = orbit_point(orbit, idx * tau)
    u_mid = orbit_point(orbit, (idx[:-1] + 0.5) * tau)
    return u_grid, u_mid


def open_loop_chunk(weights, config, orbit, r, start_step, n_steps,
                    record_states=True, record_stride=1):
    """Advance the driven network ``n_steps`` from global step ``start_step``.

    Returns ``(states, r_final)`` where ``states`` includes the entry state
    as row 0 (or None when recording is off).  Raises on divergence.
    """
    u_grid, u_mid = _orbit_inputs(orbit, config.time_step, start_step, n_steps)
    states, r_final, _, blowup = open_loop_rk4(
        weights.m.indptr, weights.m.indices, weights.m.data,
        config.input_scale * weights.w_in, config.decay_rate, config.time_step,
        np.ascontiguousarray(r, dtype=np.float64), u_grid, u_mid,
        record_stride, record_states, DIVERGENCE_GUARD,
    )
    if blowup >= 0:
        t_bad = (start_step + blowup) * config.time_step
        raise DivergenceError(f"driven network diverged at t={t_bad}", time=t_bad)
    return states, r_final


def drive_open_loop(weights, config, pair, which, t_train, record_stride=1):
    """Drive the open loop from the zero state and record the response.

    Integrates from t=0 to ``t_train`` under the selected orbit's input,
    recording every ``record_stride`` steps on the step grid.
    """
    if t_train <= 0:
        raise ValueError("t_train must be positive")
    orbit = _select_orbit(pair, which)
    n_steps = grid_steps(t_train, config.time_step)
    r0 = np.zeros(weights.n_neurons)
    states, _ = open_loop_chunk(
        weights, config, orbit, r0, 0, n_steps, record_stride=record_stride
    )
    return Trajectory(
        t0=0.0, dt=config.time_step * record_stride, values=states, space=SPACE_STATE
    )


def _closed_chunk(weights, config, w_out, r, n_steps, record_stride,
                  record_outputs, record_states, t_offset=0.0):
    outputs, states, r_final, _, blowup = closed_loop_rk4(
        weights.m.indptr, weights.m.indices, weights.m.data,
        config.input_scale * weights.w_in, np.ascontiguousarray(w_out, dtype=np.float64),
        config.decay_rate, config.time_step,
        np.ascontiguousarray(r, dtype=np.float64), n_steps,
        record_stride, record_outputs, record_states, DIVERGENCE_GUARD,
    )
    if blowup >= 0:
        t_bad = t_offset + blowup * config.time_step
        raise DivergenceError(f"autonomous network diverged at t={t_bad}", time=t_bad)
    return outputs, states, r_final


def run_closed_loop(weights, config, w_out, r0, duration, record_stride=1):
    """Run the autonomous network and record state and readout trajectories.

    Returns ``(state_trajectory, output_trajectory)`` on the same grid.  A
    zero duration yields single-point trajectories (the projected initial
    condition), useful for inspecting an initial state.
    """
    if duration < 0:
        raise ValueError("duration must be nonnegative")
    n_steps = grid_steps(duration, config.time_step)
    outputs, states, _ = _closed_chunk(
        weights, config, w_out, r0, n_steps, record_stride, True, True
    )
    dt = config.time_step * record_stride
    return (
        Trajectory(t0=0.0, dt=dt, values=states, space=SPACE_STATE),
        Trajectory(t0=0.0, dt=dt, values=outputs, space=SPACE_OUTPUT),
    )


def closed_loop_outputs(weights, config, w_out, r0, duration, record_stride=1):
    """Run the autonomous network recording only the readout trajectory.

    Returns ``(output_trajectory, final_state)``.  This is the memory-lean
    variant for long runs and sweeps where full state recording would be
    prohibitive.
    """
    if duration < 0:
        raise ValueError("duration must be nonnegative")
    n_steps = grid_steps(duration, config.time_step)
    outputs, _, r_final = _closed_chunk(
        weights, config, w_out, r0, n_steps, record_stride, True, False
    )
    return (
        Trajectory(
            t0=0.0, dt=config.time_step * record_stride, values=outputs,
            space=SPACE_OUTPUT,
        ),
        r_final,
    )


def iter_closed_loop_outputs(weights, config, w_out, r0, *, record_stride=1,
                             chunk_steps=50_000, max_steps=None):
    """Stream readout samples of an arbitrarily long autonomous run.

    Yields ``(step_indices, outputs)`` blocks where ``step_indices`` are
    global integrator step numbers (multiply by the time step for times).
    The initial state appears once as step 0; chunk seams introduce no
    duplicates and no drift (chunking is bit-stable).  Stops after
    ``max_steps`` when given, otherwise runs until the consumer stops.
    """
    if chunk_steps % record_stride != 0:
        raise ValueError("chunk_steps must be a multiple of record_stride")
    r = np.ascontiguousarray(r0, dtype=np.float64)
    start = 0
    first = True
    while max_steps is None or start < max_steps:
        n = chunk_steps
        if max_steps is not None:
            n = min(n, max_steps - start)
        outputs, _, r = _closed_chunk(
            weights, config, w_out, r, n, record_stride, True, False,
            t_offset=start * config.time_step,
        )
        idx = start + record_stride * np.arange(len(outputs))
        if first:
            first = False
        else:
            idx, outputs = idx[1:], outputs[1:]
        yield idx, outputs
        start += n
