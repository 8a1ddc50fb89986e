"""Twin-circle driving signals.

The task drives the network with points on two circular orbits of equal
radius: orbit A runs counter-clockwise around ``(+x_cen, 0)``, orbit B
clockwise around ``(-x_cen, 0)``.  The orbits overlap whenever
``x_cen < radius``, touch at the origin when ``x_cen == radius`` and
coincide (up to direction) when ``x_cen == 0``.

Signals are exposed as functions of continuous time rather than pre-sampled
arrays so the integrator can evaluate half-step inputs exactly; sampling
and interpolating would destroy the integrator's order.
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["OrbitSpec", "OrbitPair", "orbit_point", "make_orbit_pair"]


@dataclass(frozen=True)
class OrbitSpec:
    """One circular orbit: ``(b_x cos t + x_cen, b_y sin t)``.

    ``|b_x| == |b_y|`` so the orbit is a circle; the signs set the rotation
    direction.  A zero radius (degenerate, constant signal) is permitted for
    diagnostics even though the task itself always uses a positive radius.
    """

    b_x: float
    b_y: float
    x_cen: float

    def __post_init__(self):
        if abs(abs(self.b_x) - abs(self.b_y)) > 1e-12 * max(abs(self.b_x), 1.0):
            raise ValueError("orbit amplitudes must satisfy |b_x| == |b_y|")

    @property
    def radius(self):
        return abs(self.b_x)

    @property
    def center(self):
        return np.array([self.x_cen, 0.0])


@dataclass(frozen=True)
class OrbitPair:
    orbit_a: OrbitSpec
    orbit_b: OrbitSpec


def orbit_point(spec, t):
    """Evaluate the orbit at time ``t`` (scalar or array).

    Returns shape (2,) for scalar ``t`` and (len(t), 2) for an array.
    """
    t = np.asarray(t, dtype=np.float64)
    x = spec.b_x * np.cos(t) + spec.x_cen
    y = spec.b_y * np.sin(t)
    if t.ndim == 0:
        return np.array([x, y])
    return np.stack([x, y], axis=-1)


def make_orbit_pair(x_cen, b=5.0):
    """Build the standard orbit pair for centre offset ``x_cen`` and radius ``b``.

    Orbit A is counter-clockwise around ``(+x_cen, 0)``; orbit B is the
    mirrored clockwise orbit around ``(-x_cen, 0)``.
    """
    if b <= 0:
        raise ValueError("orbit radius must be positive")
    if x_cen < 0:
        raise ValueError("centre offset must be nonnegative")
    return OrbitPair(
        orbit_a=OrbitSpec(b_x=b, b_y=b, x_cen=x_cen),
        orbit_b=OrbitSpec(b_x=-b, b_y=b, x_cen=-x_cen),
    )


def orbits_overlap(pair):
    """True when the two orbits share at least one point."""
    gap = abs(pair.orbit_a.x_cen - pair.orbit_b.x_cen)
    return gap <= pair.orbit_a.radius + pair.orbit_b.radius
