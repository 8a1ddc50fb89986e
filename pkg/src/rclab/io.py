"""Serialization containers and provenance-stamped CSV output.

Weight and trained-network containers are npz archives holding the raw
float64 arrays plus JSON metadata; round trips are bit-exact.  Every CSV
written by the command-line tools starts with ``# key=value`` comment lines
carrying the seed, a hash of the effective configuration and the tool
version, so each artifact is traceable to the run that produced it.
"""

import dataclasses
import hashlib
import json

import numpy as np

from .reservoir import ReservoirConfig, ReservoirWeights
from .signal import make_orbit_pair
from .training import FitReport, TrainedRC, TrainingConfig

__all__ = [
    "save_weights",
    "load_weights",
    "save_trained",
    "load_trained",
    "write_csv",
    "config_digest",
]


def _weight_arrays(weights):
    base = weights.m_base
    return {
        "indptr": base.indptr,
        "indices": base.indices,
        "base_data": base.data,
        "w_in": weights.w_in,
        "rho": np.float64(weights.spectral_radius),
    }


def _weights_from_arrays(data):
    from .linalg import SparseMatrix

    n = data["indptr"].size - 1
    base = SparseMatrix(
        n, n,
        np.ascontiguousarray(data["indptr"], dtype=np.int32),
        np.ascontiguousarray(data["indices"], dtype=np.int32),
        np.ascontiguousarray(data["base_data"], dtype=np.float64),
    )
    rho = float(data["rho"])
    return ReservoirWeights(
        m_base=base, m=base.scaled(rho),
        w_in=np.ascontiguousarray(data["w_in"], dtype=np.float64),
        spectral_radius=rho,
    )


def save_weights(path, config, weights):
    np.savez(
        path,
        kind="rclab-weights-v1",
        config=json.dumps(dataclasses.asdict(config)),
        **_weight_arrays(weights),
    )


def load_weights(path):
    with np.load(path, allow_pickle=False) as data:
        config = ReservoirConfig(**json.loads(str(data["config"])))
        return config, _weights_from_arrays(data)


def save_trained(path, trained):
    fit = dataclasses.asdict(trained.fit) if trained.fit is not None else None
    np.savez(
        path,
        kind="rclab-trained-v1",
        config=json.dumps(dataclasses.asdict(trained.config)),
        training=json.dumps(dataclasses.asdict(trained.training)),
        fit=json.dumps(fit),
        x_cen=np.float64(trained.pair.orbit_a.x_cen),
        orbit_radius=np.float64(trained.pair.orbit_a.radius),
        w_out=trained.w_out,
        init_a=trained.init_a,
        init_b=trained.init_b,
        **_weight_arrays(trained.weights),
    )


def load_trained(path):
    with np.load(path, allow_pickle=False) as data:
        config = ReservoirConfig(**json.loads(str(data["config"])))
        training = TrainingConfig(**json.loads(str(data["training"])))
        fit_dict = json.loads(str(data["fit"]))
        return TrainedRC(
            weights=_weights_from_arrays(data),
            config=config,
            training=training,
            pair=make_orbit_pair(float(data["x_cen"]), float(data["orbit_radius"])),
            w_out=np.ascontiguousarray(data["w_out"], dtype=np.float64),
            init_a=np.ascontiguousarray(data["init_a"], dtype=np.float64),
            init_b=np.ascontiguousarray(data["init_b"], dtype=np.float64),
            fit=FitReport(**fit_dict) if fit_dict is not None else None,
        )


def config_digest(params):
    """Stable hash of an effective parameter map (sorted key=value lines)."""
    canon = "\n".join(f"{k} = {params[k]}" for k in sorted(params))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _format_cell(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, columns, rows, meta):
    """Write rows with a comment preamble; plain RFC-4180-style body."""
    with open(path, "w", newline="") as fh:
        for key, value in meta.items():
            fh.write(f"# {key}={value}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_format_cell(c) for c in row) + "\n")
