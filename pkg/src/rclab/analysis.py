"""Time-series analysis of the autonomous network's readout.

The central tool is a two-threshold hysteresis detector ("non-ideal
relay"): the output flips to A when the series reaches the upper threshold
and to B when it reaches the lower one, and holds in between.  Dips that
stay inside the band never fire, which is the point -- a single threshold
would count every zero crossing as a transition.  Transition times feed
residence-time statistics (log-binned densities) and escape-time
measurements; local maxima of the readout's x component are the observable
tracked across parameter sweeps.
"""

from dataclasses import dataclass

import numpy as np

from .dynamics import grid_steps, iter_closed_loop_outputs

__all__ = [
    "RelayConfig",
    "RelayDetector",
    "TransitionEvent",
    "ResidenceSample",
    "AttractorLabel",
    "local_maxima",
    "relay_transitions",
    "residence_times",
    "log_histogram",
    "first_transition_time",
    "escape_time",
    "collect_switchings",
    "classify_attractor",
]

KIND_FIXED_POINT = "fixed_point"
KIND_PERIODIC = "periodic"
KIND_APERIODIC = "aperiodic_localized"
KIND_SWITCHING = "switching"
KIND_DIVERGED = "diverged"

LOCUS_A = "A-side"
LOCUS_B = "B-side"
LOCUS_BOTH = "both"
LOCUS_OTHER = "other"

# classify_attractor defaults: tight enough to split period-1 from period-2
# branches, loose enough to absorb sampling jitter of grid-detected maxima
FIXED_POINT_EPS = 0.05
CLUSTER_EPS = 0.05
MAX_PERIODIC_CLUSTERS = 8


@dataclass(frozen=True)
class RelayConfig:
    """Hysteresis thresholds: output A above ``upper``, B below ``lower``."""

    lower: float = -2.0
    upper: float = 2.0

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError("relay needs lower < upper")


@dataclass(frozen=True)
class TransitionEvent:
    time: float
    to_state: str


@dataclass(frozen=True)
class ResidenceSample:
    state: str
    duration: float


@dataclass(frozen=True)
class AttractorLabel:
    kind: str
    locus: str
    n_maxima_clusters: int


class RelayDetector:
    """Streaming non-ideal relay.

    Feed arbitrary chunks of a series through :meth:`process`; the detector
    carries its output state across chunks.  The first sample that leaves
    the band silently initialises the output; only genuine switches are
    emitted, and emitted events strictly alternate.
    """

    def __init__(self, relay):
        self.relay = relay
        self.state = None

    def process(self, times, x):
        x = np.asarray(x)
        times = np.asarray(times)
        cand = np.flatnonzero((x >= self.relay.upper) | (x <= self.relay.lower))
        if cand.size == 0:
            return []
        codes = np.where(x[cand] >= self.relay.upper, 1, 0)
        if self.state is None:
            self.state = int(codes[0])
            prev = np.concatenate(([codes[0]], codes[:-1]))
        else:
            prev = np.concatenate(([self.state], codes[:-1]))
        switches = np.flatnonzero(codes != prev)
        self.state = int(codes[-1])
        return [
            TransitionEvent(time=float(times[cand[i]]),
                            to_state="A" if codes[i] else "B")
            for i in switches
        ]


def relay_transitions(x, times, relay):
    """All relay switching events of an in-memory series."""
    return RelayDetector(relay).process(times, x)


def local_maxima(x, times, t_discard=0.0):
    """Interior local maxima ``x[i-1] < x[i] >= x[i+1]`` after ``t_discard``.

    Plateaus report their first index.  Returns ``(times, values)`` arrays;
    both empty for monotone or constant series.
    """
    x = np.asarray(x)
    times = np.asarray(times)
    if x.size < 3:
        return np.empty(0), np.empty(0)
    idx = 1 + np.flatnonzero((x[1:-1] > x[:-2]) & (x[1:-1] >= x[2:]))
    keep = times[idx] >= t_discard
    idx = idx[keep]
    return times[idx], x[idx]


def residence_times(events):
    """Dwell durations between consecutive transitions.

    The interval after the last event is still open and is dropped.  Needs
    alternating events (as the relay emits them).
    """
    if len(events) < 2:
        return []
    samples = []
    for a, b in zip(events[:-1], events[1:]):
        if b.to_state == a.to_state or b.time <= a.time:
            raise ValueError("events must alternate with increasing times")
        samples.append(ResidenceSample(state=a.to_state, duration=b.time - a.time))
    return samples


def log_histogram(durations, n_bins, lo, hi):
    """Histogram on geometrically spaced bins, normalised to unit mass.

    Returns a list of ``(bin_lo, bin_hi, count, density)``.  Densities
    satisfy ``sum(density * width) == 1`` over the counted samples; values
    exactly at ``hi`` land in the last bin, values outside [lo, hi] are not
    counted.
    """
    durations = np.asarray(durations, dtype=np.float64)
    if durations.size and durations.min() <= 0:
        raise ValueError("durations must be positive")
    if lo <= 0 or hi <= lo or n_bins < 1:
        raise ValueError("need 0 < lo < hi and at least one bin")
    edges = np.geomspace(lo, hi, n_bins + 1)
    counts, _ = np.histogram(durations, bins=edges)
    widths = np.diff(edges)
    total = counts.sum()
    density = counts / (total * widths) if total > 0 else np.zeros(n_bins)
    return [
        (float(edges[i]), float(edges[i + 1]), int(counts[i]), float(density[i]))
        for i in range(n_bins)
    ]


def first_transition_time(x, times, relay):
    """Time of the first relay switch in a series, or None.

    The first band exit only initialises the relay, so the first emitted
    event is by construction a departure from the initially occupied state.
    """
    events = relay_transitions(x, times, relay)
    return events[0].time if events else None


def escape_time(trained, relay, t_max, chunk_steps=50_000):
    """Escape time of the closed loop started from the orbit-A training state.

    Runs the autonomous network from ``init_a`` and returns the time of the
    first relay switch (the state leaving whichever band it initially
    occupied), or None if no switch occurs before ``t_max`` -- the signature
    of a still-stable reconstruction.
    """
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    cfg = trained.config
    detector = RelayDetector(relay)
    stream = iter_closed_loop_outputs(
        trained.weights, cfg, trained.w_out, trained.init_a,
        chunk_steps=chunk_steps, max_steps=grid_steps(t_max, cfg.time_step),
    )
    for idx, outputs in stream:
        events = detector.process(idx * cfg.time_step, outputs[:, 0])
        if events:
            stream.close()
            return events[0].time
    return None


def collect_switchings(trained, relay, target_samples, t_max, which="A",
                       record_stride=1, chunk_steps=50_000):
    """Stream the closed loop until enough residence samples are collected.

    Runs from the training state of orbit ``which`` and gathers relay
    events until they bound ``target_samples`` completed dwells or the run
    hits ``t_max``.  Returns ``(events, elapsed_time, truncated)``.
    """
    cfg = trained.config
    detector = RelayDetector(relay)
    events = []
    max_steps = grid_steps(t_max, cfg.time_step)
    elapsed_steps = 0
    stream = iter_closed_loop_outputs(
        trained.weights, cfg, trained.w_out, trained.initial_state(which),
        record_stride=record_stride, chunk_steps=chunk_steps, max_steps=max_steps,
    )
    for idx, outputs in stream:
        events.extend(detector.process(idx * cfg.time_step, outputs[:, 0]))
        elapsed_steps = int(idx[-1]) if idx.size else elapsed_steps
        if len(events) >= target_samples + 1:
            stream.close()
            break
    truncated = len(events) < target_samples + 1
    return events, elapsed_steps * cfg.time_step, truncated


def _cluster_ids(values, eps):
    """Single-linkage 1-d clustering: neighbours within ``eps`` merge."""
    order = np.argsort(values)
    ids_sorted = np.zeros(values.size, dtype=np.int64)
    if values.size > 1:
        gaps = np.diff(values[order]) > eps
        ids_sorted[1:] = np.cumsum(gaps)
    ids = np.empty_like(ids_sorted)
    ids[order] = ids_sorted
    return ids, int(ids_sorted[-1]) + 1 if values.size else 0


def _is_recurrent(ids, period):
    if ids.size <= period:
        return True
    return bool(np.all(ids[period:] == ids[:-period]))


def classify_attractor(p_traj, relay, pair, t_discard, *,
                       eps_fp=FIXED_POINT_EPS, eps_cluster=CLUSTER_EPS,
                       k_max=MAX_PERIODIC_CLUSTERS):
    """Label the long-term behaviour visible in a readout trajectory.

    Order of tests on the window after ``t_discard``: a collapsed range in
    both components is a fixed point; two or more relay events mean
    switching between the orbit regions; otherwise the trajectory is
    localized on one side (sign of the mean x relative to the relay band)
    and is periodic when its x maxima fall into at most ``k_max`` value
    clusters revisited in a fixed cyclic order, else aperiodic.
    """
    times = p_traj.times
    window = times >= t_discard
    if window.sum() < 2:
        raise ValueError("classification window is empty after discard")
    xw = p_traj.values[window, 0]
    yw = p_traj.values[window, 1]
    tw = times[window]

    # orientation: which side of the x axis belongs to orbit A
    flip = pair.orbit_a.x_cen < pair.orbit_b.x_cen
    side_a, side_b = (LOCUS_B, LOCUS_A) if flip else (LOCUS_A, LOCUS_B)

    mean_x = float(xw.mean())
    if mean_x >= relay.upper:
        locus = side_a
    elif mean_x <= relay.lower:
        locus = side_b
    else:
        locus = LOCUS_OTHER

    if xw.max() - xw.min() < eps_fp and yw.max() - yw.min() < eps_fp:
        return AttractorLabel(KIND_FIXED_POINT, locus, 0)

    if len(relay_transitions(xw, tw, relay)) >= 2:
        return AttractorLabel(KIND_SWITCHING, LOCUS_BOTH, 0)

    _, values = local_maxima(xw, tw)
    if values.size == 0:
        return AttractorLabel(KIND_APERIODIC, locus, 0)
    ids, n_clusters = _cluster_ids(values, eps_cluster)
    if n_clusters <= k_max and _is_recurrent(ids, n_clusters):
        return AttractorLabel(KIND_PERIODIC, locus, n_clusters)
    return AttractorLabel(KIND_APERIODIC, locus, n_clusters)


def diverged_label():
    """Label for a run that tripped the divergence guard."""
    return AttractorLabel(KIND_DIVERGED, LOCUS_OTHER, 0)
