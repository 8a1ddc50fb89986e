"""Command-line front end.

Subcommands cover the five experiment types: ``train`` (fit and serialize a
network), ``predict`` (run the autonomous network from a stored state),
``sweep`` (radius continuation with attractor tracking), ``residence``
(long switching run with dwell statistics), ``escape`` (escape times over a
radius grid) and ``probe`` (random initial conditions).

Configuration is a flat ``key = value`` file (``#`` comments); unknown keys
are rejected and each subcommand checks its required keys.  All outputs are
CSV files whose comment preamble records the seed, a hash of the effective
configuration and the tool version.

Exit codes: 0 success, 2 configuration error, 3 numeric failure
(divergence, singular solve, estimation), 4 finished with a truncation
warning.
"""

import argparse
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    RelayConfig,
    collect_switchings,
    escape_time,
    log_histogram,
    residence_times,
)
from .continuation import SweepConfig, continuation_sweep, random_ic_probe
from .dynamics import DivergenceError, closed_loop_outputs
from .io import config_digest, load_trained, save_trained, write_csv
from .linalg import EstimationError, SingularMatrixError
from .reservoir import ReservoirConfig, build_reservoir, with_spectral_radius
from .signal import make_orbit_pair
from .training import TrainingConfig, train_multifunctional, train_readout

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_TRUNCATED = 4


class ConfigError(Exception):
    pass


_KEY_TYPES = {
    "seed": int,
    "n_neurons": int,
    "input_dim": int,
    "connect_prob": float,
    "spectral_radius": float,
    "input_scale": float,
    "decay_rate": float,
    "time_step": float,
    "t_listen": float,
    "t_train": float,
    "ridge": float,
    "x_cen": float,
    "orbit_radius": float,
    "relay_lower": float,
    "relay_upper": float,
    "rho_start": float,
    "rho_end": float,
    "rho_step": float,
    "window": float,
    "direction": str,
    "target_switchings": int,
    "residence_t_max": float,
    "residence_stride": int,
    "histogram_bins": int,
    "escape_rho_start": float,
    "escape_rho_end": float,
    "escape_rho_step": float,
    "escape_t_max": float,
    "out_dir": str,
}

_DEFAULTS = {
    "input_dim": 2,
    "connect_prob": 0.04,
    "orbit_radius": 5.0,
    "relay_lower": -2.0,
    "relay_upper": 2.0,
    "window": 200.0,
    "direction": "down",
    "histogram_bins": 100,
    "residence_stride": 1,
}

_TRAIN_REQUIRED = (
    "seed", "n_neurons", "spectral_radius", "input_scale", "decay_rate",
    "time_step", "t_listen", "t_train", "ridge", "x_cen",
)

_REQUIRED = {
    "train": _TRAIN_REQUIRED,
    "sweep": _TRAIN_REQUIRED + ("rho_start", "rho_end", "rho_step"),
    "residence": _TRAIN_REQUIRED + ("target_switchings", "residence_t_max"),
    "escape": _TRAIN_REQUIRED + (
        "escape_rho_start", "escape_rho_end", "escape_rho_step", "escape_t_max",
    ),
}


def parse_config(path):
    """Parse a flat ``key = value`` file, rejecting unknown keys."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    params = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep or not key:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        if key not in _KEY_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown key '{key}'")
        if key in params:
            raise ConfigError(f"{path}:{lineno}: duplicate key '{key}'")
        try:
            params[key] = _KEY_TYPES[key](value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for '{key}': {exc}") from exc
    return params


@dataclass
class Experiment:
    """Effective, validated parameter set of one run."""

    params: dict
    reservoir: ReservoirConfig
    training: TrainingConfig
    relay: RelayConfig

    @property
    def seed(self):
        return self.params["seed"]

    @property
    def digest(self):
        return config_digest(self.params)

    def meta(self):
        return {
            "seed": self.seed,
            "config_sha": self.digest,
            "tool_version": __version__,
        }


def build_experiment(command, config_path, seed_override=None):
    params = parse_config(config_path)
    required = _REQUIRED[command]
    missing = [k for k in required if k not in params]
    if missing:
        raise ConfigError(f"{config_path}: missing required key(s): {', '.join(missing)}")
    merged = {**_DEFAULTS, **params}
    if seed_override is not None:
        merged["seed"] = seed_override
    try:
        reservoir = ReservoirConfig(
            n_neurons=merged["n_neurons"],
            input_dim=merged["input_dim"],
            connect_prob=merged["connect_prob"],
            spectral_radius=merged["spectral_radius"],
            input_scale=merged["input_scale"],
            decay_rate=merged["decay_rate"],
            time_step=merged["time_step"],
            seed=merged["seed"],
        )
        training = TrainingConfig(
            t_listen=merged["t_listen"],
            t_train=merged["t_train"],
            ridge=merged["ridge"],
        )
        relay = RelayConfig(lower=merged["relay_lower"], upper=merged["relay_upper"])
    except ValueError as exc:
        raise ConfigError(f"{config_path}: {exc}") from exc
    return Experiment(params=merged, reservoir=reservoir, training=training, relay=relay)


def resolve_out_dir(args, params=None):
    out = args.out or (params or {}).get("out_dir") or os.environ.get("RCLAB_OUT") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_train(args):
    exp = build_experiment("train", args.config, args.seed)
    out = resolve_out_dir(args, exp.params)
    trained = train_multifunctional(
        exp.reservoir, exp.training, exp.params["x_cen"], exp.params["orbit_radius"]
    )
    save_trained(out / "trained.npz", trained)
    write_csv(
        out / "fit_report.csv",
        ("metric", "value"),
        [
            ("max_error", trained.fit.max_error),
            ("rms_error", trained.fit.rms_error),
            ("normal_residual", trained.fit.normal_residual),
        ],
        exp.meta(),
    )
    print(f"trained network written to {out / 'trained.npz'}")
    print(f"max fit error {trained.fit.max_error:.3e}, "
          f"normal residual {trained.fit.normal_residual:.3e}")
    return EXIT_OK


def _load_initial_state(trained, init):
    if init.upper() in ("A", "B"):
        return trained.initial_state(init)
    try:
        state = np.loadtxt(init, dtype=np.float64, ndmin=1)
    except OSError as exc:
        raise ConfigError(f"cannot read initial state file {init}: {exc}") from exc
    if state.shape != (trained.weights.n_neurons,):
        raise ConfigError(
            f"initial state file {init} has {state.size} entries, "
            f"expected {trained.weights.n_neurons}"
        )
    return state


def cmd_predict(args):
    trained = _load_container(args.trained)
    if args.duration < 0:
        raise ConfigError("duration must be nonnegative")
    out = resolve_out_dir(args)
    r0 = _load_initial_state(trained, args.init)
    p_traj, _ = closed_loop_outputs(
        trained.weights, trained.config, trained.w_out, r0, args.duration,
        record_stride=args.stride,
    )
    meta = {
        "seed": trained.config.seed,
        "config_sha": config_digest(
            {"command": "predict", "init": args.init, "duration": args.duration,
             "stride": args.stride, "trained": Path(args.trained).name}
        ),
        "tool_version": __version__,
    }
    rows = [(t, xy[0], xy[1]) for t, xy in zip(p_traj.times, p_traj.values)]
    write_csv(out / "prediction.csv", ("t", "x", "y"), rows, meta)
    print(f"{len(rows)} prediction samples written to {out / 'prediction.csv'}")
    return EXIT_OK


def _load_container(path):
    try:
        return load_trained(path)
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot load trained container {path}: {exc}") from exc


def cmd_sweep(args):
    exp = build_experiment("sweep", args.config, args.seed)
    out = resolve_out_dir(args, exp.params)
    sweep = SweepConfig(
        x_cen=exp.params["x_cen"],
        rho_start=exp.params["rho_start"],
        rho_end=exp.params["rho_end"],
        rho_step=exp.params["rho_step"],
        window=exp.params["window"],
        direction=exp.params["direction"],
        orbit_radius=exp.params["orbit_radius"],
    )
    steps = continuation_sweep(exp.reservoir, exp.training, sweep, relay=exp.relay)
    bif_rows = [
        (step.rho, step.branch, x_m)
        for step in steps
        for x_m in step.x_m_values
    ]
    label_rows = [
        (step.rho, step.branch, step.label.kind, step.label.locus,
         step.label.n_maxima_clusters)
        for step in steps
    ]
    write_csv(out / "bifurcation.csv", ("rho", "branch", "x_m"), bif_rows, exp.meta())
    write_csv(
        out / "labels.csv",
        ("rho", "branch", "kind", "locus", "n_clusters"),
        label_rows,
        exp.meta(),
    )
    print(f"{len(steps)} sweep steps written to {out}")
    return EXIT_OK


def cmd_residence(args):
    exp = build_experiment("residence", args.config, args.seed)
    out = resolve_out_dir(args, exp.params)
    trained = train_multifunctional(
        exp.reservoir, exp.training, exp.params["x_cen"],
        exp.params["orbit_radius"], evaluate_fit=False,
    )
    events, elapsed, truncated = collect_switchings(
        trained, exp.relay, exp.params["target_switchings"],
        exp.params["residence_t_max"], record_stride=exp.params["residence_stride"],
    )
    samples = residence_times(events)
    meta = exp.meta()
    write_csv(
        out / "transitions.csv", ("time", "to_state"),
        [(e.time, e.to_state) for e in events], meta,
    )
    write_csv(
        out / "residence.csv", ("state", "duration"),
        [(s.state, s.duration) for s in samples], meta,
    )
    if samples:
        durations = np.array([s.duration for s in samples])
        lo, hi = float(durations.min()), float(durations.max())
        if hi <= lo:
            hi = lo * (1.0 + 1e-9)
        bins = log_histogram(durations, exp.params["histogram_bins"], lo, hi)
    else:
        bins = []
    write_csv(
        out / "histogram.csv", ("bin_lo", "bin_hi", "count", "density"), bins, meta,
    )
    print(f"{len(samples)} residence samples over t={elapsed:.1f} written to {out}")
    if truncated:
        print(
            f"warning: collected {len(samples)} of "
            f"{exp.params['target_switchings']} requested dwells before "
            f"t_max={exp.params['residence_t_max']}",
            file=sys.stderr,
        )
        return EXIT_TRUNCATED
    return EXIT_OK


def _escape_grid(params):
    lo = params["escape_rho_start"]
    hi = params["escape_rho_end"]
    step = params["escape_rho_step"]
    if step <= 0 or hi < lo:
        raise ConfigError("escape grid needs escape_rho_end >= escape_rho_start and a positive step")
    n = int(np.floor((hi - lo) / step + 1e-9))
    return lo + step * np.arange(n + 1)


def _escape_point(exp, weights, rho):
    cfg = exp.reservoir.with_radius(float(rho))
    pair = make_orbit_pair(exp.params["x_cen"], exp.params["orbit_radius"])
    trained = train_readout(
        with_spectral_radius(weights, float(rho)), cfg, exp.training, pair,
        evaluate_fit=False,
    )
    return escape_time(trained, exp.relay, exp.params["escape_t_max"])


_WORKER_STATE = {}


def _escape_worker_init(exp):
    _WORKER_STATE["exp"] = exp
    _WORKER_STATE["weights"] = build_reservoir(exp.reservoir)


def _escape_worker(rho):
    return rho, _escape_point(_WORKER_STATE["exp"], _WORKER_STATE["weights"], rho)


def cmd_escape(args):
    exp = build_experiment("escape", args.config, args.seed)
    out = resolve_out_dir(args, exp.params)
    grid = _escape_grid(exp.params)
    if args.jobs > 1:
        import multiprocessing as mp

        with mp.Pool(args.jobs, initializer=_escape_worker_init, initargs=(exp,)) as pool:
            results = pool.map(_escape_worker, [float(r) for r in grid])
    else:
        weights = build_reservoir(exp.reservoir)
        results = [(float(rho), _escape_point(exp, weights, rho)) for rho in grid]
    write_csv(out / "escape.csv", ("rho", "t_esc"), results, exp.meta())
    n_finite = sum(1 for _, t in results if t is not None)
    print(f"{len(results)} grid points ({n_finite} finite escapes) written to {out}")
    return EXIT_OK


def cmd_probe(args):
    trained = _load_container(args.trained)
    out = resolve_out_dir(args)
    labels = random_ic_probe(trained, args.n, args.box, window=args.window)
    meta = {
        "seed": trained.config.seed,
        "config_sha": config_digest(
            {"command": "probe", "n": args.n, "box": args.box,
             "window": args.window, "trained": Path(args.trained).name}
        ),
        "tool_version": __version__,
    }
    rows = [
        (i, lab.kind, lab.locus, lab.n_maxima_clusters)
        for i, lab in enumerate(labels)
    ]
    write_csv(out / "probe_labels.csv", ("index", "kind", "locus", "n_clusters"), rows, meta)
    print(f"{len(rows)} probe labels written to {out / 'probe_labels.csv'}")
    return EXIT_OK


def _add_common(parser, config=True):
    if config:
        parser.add_argument("--config", required=True, help="experiment config file")
        parser.add_argument("--seed", type=int, default=None,
                            help="override the config seed")
    parser.add_argument("--out", default=None,
                        help="output directory (default: out_dir key, $RCLAB_OUT, or '.')")
    parser.add_argument("--jobs", type=int, default=1,
                        help="parallel workers for independent grid points")


def make_parser():
    parser = argparse.ArgumentParser(
        prog="rclab",
        description="Twin-orbit reservoir training, continuation and switching statistics.",
    )
    parser.add_argument("--version", action="version", version=f"rclab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a network and serialize it")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="run the autonomous network from a stored state")
    p.add_argument("--trained", required=True, help="trained container (npz)")
    p.add_argument("--init", default="A",
                   help="initial state: A, B, or a whitespace-separated file")
    p.add_argument("--duration", type=float, default=200.0)
    p.add_argument("--stride", type=int, default=1, help="recording stride (steps)")
    _add_common(p, config=False)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("sweep", help="radius continuation with attractor tracking")
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("residence", help="collect switching events and dwell statistics")
    _add_common(p)
    p.set_defaults(func=cmd_residence)

    p = sub.add_parser("escape", help="escape times over a radius grid")
    _add_common(p)
    p.set_defaults(func=cmd_escape)

    p = sub.add_parser("probe", help="classify attractors from random initial states")
    p.add_argument("--trained", required=True, help="trained container (npz)")
    p.add_argument("--n", type=int, default=10, help="number of probes")
    p.add_argument("--box", type=float, default=0.5, help="half-width of the probe cube")
    p.add_argument("--window", type=float, default=200.0, help="run length per probe")
    _add_common(p, config=False)
    p.set_defaults(func=cmd_probe)

    return parser


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergenceError, SingularMatrixError, EstimationError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
