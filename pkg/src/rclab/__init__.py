"""rclab: a numerical lab for twin-orbit reservoir training and its breakdown.

Trains a continuous-time echo-state network to reconstruct two mirrored
circular orbits simultaneously, then studies how that multistability decays
into metastable switching as the recurrent matrix's spectral radius shrinks:
radius continuation with attractor tracking, hysteresis-relay transition
detection, residence-time statistics, and escape-time measurement.
"""

from ._kernels import BACKEND as kernel_backend
from .analysis import RelayConfig
from .dynamics import Trajectory, drive_open_loop, run_closed_loop
from .reservoir import ReservoirConfig, ReservoirWeights, build_reservoir, with_spectral_radius
from .signal import OrbitPair, OrbitSpec, make_orbit_pair, orbit_point
from .training import TrainedRC, TrainingConfig, train_multifunctional, train_readout

__version__ = "0.1.0"

__all__ = [
    "kernel_backend",
    "RelayConfig",
    "Trajectory",
    "drive_open_loop",
    "run_closed_loop",
    "ReservoirConfig",
    "ReservoirWeights",
    "build_reservoir",
    "with_spectral_radius",
    "OrbitPair",
    "OrbitSpec",
    "make_orbit_pair",
    "orbit_point",
    "TrainedRC",
    "TrainingConfig",
    "train_multifunctional",
    "train_readout",
    "__version__",
]
