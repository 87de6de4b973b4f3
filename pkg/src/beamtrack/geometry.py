"""Refraction geometry for a vertical beam leaving a tilted water surface.

All functions accept scalars or numpy arrays and broadcast. Scalar inputs
give Python floats back.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "OpticalConstants",
    "SlopeState",
    "SurfaceNormal",
    "SpotSample",
    "TotalInternalReflection",
    "NonInvertibleOffset",
    "refract_displacement",
    "spot_speed",
    "surface_normal",
    "slope_change",
    "slopes_from_offset",
    "gamma_from_offset",
    "beam_to_plane",
]

_BISECT_TOL = 1e-12


class TotalInternalReflection(ValueError):
    """The ray meets the surface beyond the critical angle and never exits."""


class NonInvertibleOffset(ValueError):
    """A spot offset larger than any exiting ray can produce."""


@dataclass(frozen=True)
class OpticalConstants:
    h: float = 1.83          # air path, surface to receiver plane (m)
    n_prime: float = 1.33    # n_water / n_air

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"h must be positive, got {self.h}")
        if not self.n_prime > 1:
            raise ValueError(f"n_prime must exceed 1, got {self.n_prime}")

    @property
    def critical_angle(self) -> float:
        return math.asin(1.0 / self.n_prime)

    @property
    def max_offset(self) -> float:
        """Displacement limit as the slope angle approaches the critical angle."""
        return self.h / math.tan(self.critical_angle)


@dataclass(frozen=True)
class SlopeState:
    f_x: float
    f_y: float
    gamma_x: float
    gamma_y: float

    @classmethod
    def from_slopes(cls, f_x, f_y) -> "SlopeState":
        return cls(f_x, f_y, np.arctan(f_x), np.arctan(f_y))

    @classmethod
    def flat(cls) -> "SlopeState":
        return cls(0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class SurfaceNormal:
    nx: float
    ny: float
    nz: float

    def as_array(self) -> np.ndarray:
        return np.stack(np.broadcast_arrays(self.nx, self.ny, self.nz), axis=-1)


@dataclass(frozen=True)
class SpotSample:
    t: float
    x: float
    y: float
    vx: float = 0.0
    vy: float = 0.0


def _out(value):
    return float(value) if np.ndim(value) == 0 else value


def _check_exit(gamma, c: OpticalConstants):
    s = c.n_prime * np.abs(np.sin(gamma))
    if np.any(~(s < 1.0)):
        raise TotalInternalReflection(
            f"n'·sin(gamma) = {np.max(s):.6g} >= 1; ray does not leave the water"
        )
    return s


def refract_displacement(gamma, c: OpticalConstants = OpticalConstants()):
    """Lateral spot displacement on the receiver plane for slope angle ``gamma``.

    d = h * tan(arcsin(n' sin gamma) - gamma)
    """
    gamma = np.asarray(gamma, dtype=float)
    _check_exit(gamma, c)
    beta = np.arcsin(c.n_prime * np.sin(gamma))
    return _out(c.h * np.tan(beta - gamma))


def spot_speed(gamma, gamma_rate, c: OpticalConstants = OpticalConstants()):
    """Time derivative of :func:`refract_displacement` given the slope-angle rate."""
    gamma = np.asarray(gamma, dtype=float)
    gamma_rate = np.asarray(gamma_rate, dtype=float)
    _check_exit(gamma, c)
    ns = c.n_prime * np.sin(gamma)
    beta = np.arcsin(ns)
    gain = c.n_prime * np.cos(gamma) / np.sqrt(1.0 - ns * ns) - 1.0
    return _out(c.h / np.cos(beta - gamma) ** 2 * gain * gamma_rate)


def surface_normal(f_x, f_y) -> SurfaceNormal:
    f_x = np.asarray(f_x, dtype=float)
    f_y = np.asarray(f_y, dtype=float)
    norm = np.sqrt(f_x * f_x + f_y * f_y + 1.0)
    return SurfaceNormal(_out(-f_x / norm), _out(-f_y / norm), _out(1.0 / norm))


def slope_change(n1: SurfaceNormal, n2: SurfaceNormal):
    """Angle between two unit surface normals (rad), in [0, pi].

    Evaluated as 2*arcsin(|n1 - n2| / 2), which equals arccos(n1 . n2) for
    unit vectors but keeps full precision for the tiny angles between
    consecutive frames, where arccos of a dot product near 1 does not.
    """
    dx = np.asarray(n1.nx, dtype=float) - n2.nx
    dy = np.asarray(n1.ny, dtype=float) - n2.ny
    dz = np.asarray(n1.nz, dtype=float) - n2.nz
    chord = np.sqrt(dx * dx + dy * dy + dz * dz)
    return _out(2.0 * np.arcsin(np.clip(0.5 * chord, 0.0, 1.0)))


def gamma_from_offset(d, c: OpticalConstants = OpticalConstants()):
    """Slope angle producing displacement ``d``, by bisection.

    The displacement is strictly increasing in gamma on the open interval
    (-critical, critical), so bisection always brackets the root.
    """
    d = np.asarray(d, dtype=float)
    if np.any(~np.isfinite(d)) or np.any(np.abs(d) >= c.max_offset):
        raise NonInvertibleOffset(
            f"|offset| must be below {c.max_offset:.6g} m for h={c.h}, n'={c.n_prime}"
        )
    gc = c.critical_angle
    lo = np.full(d.shape, -gc)
    hi = np.full(d.shape, gc)
    # keep endpoints strictly inside the exit domain
    lo = np.nextafter(lo, 0.0)
    hi = np.nextafter(hi, 0.0)
    n_iter = int(math.ceil(math.log2(2 * gc / _BISECT_TOL))) + 1
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        beta = np.arcsin(c.n_prime * np.sin(mid))
        above = c.h * np.tan(beta - mid) > d
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    # a flat surface is the exact preimage of a zero offset
    return _out(np.where(d == 0, 0.0, 0.5 * (lo + hi)))


def slopes_from_offset(d_x, d_y, c: OpticalConstants = OpticalConstants()):
    """Invert per-axis spot offsets to surface slopes (f_x, f_y)."""
    f_x = np.tan(gamma_from_offset(d_x, c))
    f_y = np.tan(gamma_from_offset(d_y, c))
    return _out(f_x), _out(f_y)


def beam_to_plane(tilt_x, tilt_y, slope: SlopeState,
                  c: OpticalConstants = OpticalConstants(), lever: float = 1.97):
    """Spot position on the receiver plane for a mirror tilt and surface slope.

    Linear lever model: a mirror tilt deflects the beam by twice the tilt,
    and the folded path of length ``lever`` turns that into a lateral shift.
    Refraction at the surface adds its own displacement per axis.
    """
    x = lever * 2.0 * np.asarray(tilt_x, dtype=float) + np.asarray(
        refract_displacement(slope.gamma_x, c))
    y = lever * 2.0 * np.asarray(tilt_y, dtype=float) + np.asarray(
        refract_displacement(slope.gamma_y, c))
    return _out(x), _out(y)
