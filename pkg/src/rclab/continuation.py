"""Spectral-radius continuation with attractor tracking.

The sweep walks the radius in small steps over one fixed weight
realization.  At every grid point the readout is retrained (the open-loop
response depends on the recurrent matrix, so the regression genuinely
changes with the radius) and each tracked branch continues the autonomous
dynamics from the state it reached at the previous radius.  When a branch's
attractor destabilises the carried state simply falls onto whatever the
flow approaches next, so the branch keeps tracking the successor attractor;
a branch that trips the divergence guard is frozen and the sweep continues
without it.

Branch "A"/"B" are seeded from the two training end states at the first
grid point.  Tracking in the opposite direction from a recorded step
(:func:`reverse_track`) is how coexistence windows are measured.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .analysis import (
    AttractorLabel,
    RelayConfig,
    classify_attractor,
    diverged_label,
    local_maxima,
)
from .dynamics import DivergenceError, closed_loop_outputs
from .reservoir import build_reservoir, with_spectral_radius
from .signal import make_orbit_pair
from .training import train_readout

__all__ = [
    "SweepConfig",
    "ContinuationStep",
    "continuation_sweep",
    "reverse_track",
    "random_ic_probe",
]

# substream tag for random initial-condition probing (keeps probe draws
# disjoint from the weight-construction substreams of the same seed)
_PROBE_STREAM = 0x1C0FFEE


@dataclass(frozen=True)
class SweepConfig:
    x_cen: float
    rho_start: float = 0.7
    rho_end: float = 0.1
    rho_step: float = 0.001
    window: float = 200.0
    direction: str = "down"
    orbit_radius: float = 5.0
    branches: tuple = ("A", "B")

    def __post_init__(self):
        if self.rho_step <= 0:
            raise ValueError("rho_step must be positive")
        if self.window <= 0:
            raise ValueError("window must be positive")
        if self.direction not in ("down", "up"):
            raise ValueError("direction must be 'down' or 'up'")
        lo, hi = sorted((self.rho_start, self.rho_end))
        if self.direction == "down" and self.rho_start < self.rho_end:
            raise ValueError("downward sweep needs rho_start >= rho_end")
        if self.direction == "up" and self.rho_start > self.rho_end:
            raise ValueError("upward sweep needs rho_start <= rho_end")
        if lo < 0:
            raise ValueError("spectral radii must be nonnegative")

    def grid(self):
        span = abs(self.rho_end - self.rho_start)
        n = int(np.floor(span / self.rho_step + 1e-9))
        sign = -1.0 if self.direction == "down" else 1.0
        return self.rho_start + sign * self.rho_step * np.arange(n + 1)


@dataclass
class ContinuationStep:
    rho: float
    branch: str
    x_m_values: np.ndarray
    label: AttractorLabel
    final_state: Optional[np.ndarray] = field(default=None, repr=False)


def continuation_sweep(config, tcfg, sweep, relay=None, initial_states=None,
                       weights=None, progress=None):
    """Run the radius sweep and return one step record per (radius, branch).

    ``initial_states`` may pre-seed branches with explicit states; by
    default both branches start from the training end states at the first
    radius.  ``weights`` lets callers reuse an already-built realization
    (the sweep never resamples weights -- it only rescales them).
    ``progress`` is an optional callback receiving each finished step.
    """
    relay = relay or RelayConfig()
    pair = make_orbit_pair(sweep.x_cen, sweep.orbit_radius)
    if weights is None:
        weights = build_reservoir(config)
    states = dict(initial_states) if initial_states else None
    frozen = set()
    steps = []
    for rho in sweep.grid():
        rho = float(rho)
        w_rho = with_spectral_radius(weights, rho)
        cfg_rho = config.with_radius(rho)
        trained = train_readout(w_rho, cfg_rho, tcfg, pair, evaluate_fit=False)
        if states is None:
            states = {"A": trained.init_a, "B": trained.init_b}
            states = {k: v for k, v in states.items() if k in sweep.branches}
        for branch in sweep.branches:
            if branch in frozen or branch not in states:
                continue
            step = _track_branch(
                w_rho, cfg_rho, trained.w_out, pair, relay, sweep, rho, branch,
                states[branch],
            )
            if step.label.kind == "diverged":
                frozen.add(branch)
            else:
                states[branch] = step.final_state
            steps.append(step)
            if progress is not None:
                progress(step)
    return steps


def _track_branch(weights, config, w_out, pair, relay, sweep, rho, branch, r0):
    try:
        p_traj, r_final = closed_loop_outputs(weights, config, w_out, r0, sweep.window)
    except DivergenceError:
        return ContinuationStep(rho, branch, np.empty(0), diverged_label(), None)
    discard = sweep.window / 2.0
    _, x_m = local_maxima(p_traj.values[:, 0], p_traj.times, t_discard=discard)
    label = classify_attractor(p_traj, relay, pair, t_discard=discard)
    return ContinuationStep(rho, branch, x_m, label, r_final)


def reverse_track(from_step, config, tcfg, sweep, relay=None, weights=None,
                  progress=None):
    """Track one recorded branch state in the opposite radius direction.

    ``sweep`` must already point in the desired direction (typically
    ``direction="up"`` with ``rho_start`` at the recorded step's radius).
    Used to delimit coexistence windows: the branch is followed until its
    label changes.
    """
    if from_step.final_state is None:
        raise ValueError("cannot continue from a diverged step")
    sub = SweepConfig(
        x_cen=sweep.x_cen, rho_start=sweep.rho_start, rho_end=sweep.rho_end,
        rho_step=sweep.rho_step, window=sweep.window, direction=sweep.direction,
        orbit_radius=sweep.orbit_radius, branches=(from_step.branch,),
    )
    return continuation_sweep(
        config, tcfg, sub, relay=relay, weights=weights,
        initial_states={from_step.branch: from_step.final_state},
        progress=progress,
    )


def random_ic_probe(trained, n, box_radius, window=200.0, relay=None):
    """Classify the attractors reached from random initial states.

    States are drawn uniformly from the cube [-box_radius, box_radius]^N
    using a dedicated substream of the experiment seed, so probing is
    reproducible and independent of the weight draws.
    """
    if n < 1:
        raise ValueError("need at least one probe")
    relay = relay or RelayConfig()
    cfg = trained.config
    rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence((cfg.seed, _PROBE_STREAM)))
    )
    labels = []
    for _ in range(n):
        r0 = rng.uniform(-box_radius, box_radius, trained.weights.n_neurons)
        try:
            p_traj, _ = closed_loop_outputs(
                trained.weights, cfg, trained.w_out, r0, window
            )
        except DivergenceError:
            labels.append(diverged_label())
            continue
        labels.append(
            classify_attractor(p_traj, relay, trained.pair, t_discard=window / 2.0)
        )
    return labels
