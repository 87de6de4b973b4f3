"""Synthetic surface-slope generator and ASCR characterization.

The wave generator stands in for a reciprocating board in a tank: a
periodic slope (optionally with a second harmonic) whose motion is mostly
along y. ASCR is measured exactly as it would be from a high-speed camera
recording of the wandering spot: offsets are inverted to slopes, slopes to
surface normals, and the angle between consecutive normals divided by the
frame interval gives the slope changing rate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .geometry import (
    OpticalConstants,
    SlopeState,
    SpotSample,
    SurfaceNormal,
    refract_displacement,
    slope_change,
    slopes_from_offset,
    spot_speed,
    surface_normal,
)

__all__ = [
    "WaveParams",
    "AscrReport",
    "UnreachableTarget",
    "sample_slope",
    "slope_series",
    "simulate_offsets",
    "ascr_from_offsets",
    "measure_ascr",
    "calibrate_wave",
    "spot_speeds",
    "safe_slope_ceiling",
    "FRAME_RATE",
    "N_FRAMES",
    "DEFAULT_OMEGA",
]

FRAME_RATE = 220.0       # high-speed characterization camera (fps)
N_FRAMES = 10_000
DEFAULT_OMEGA = 4 * math.pi   # 0.5 s board period
SAFE_SLOPE_FRACTION = 0.9     # of tan(critical angle)


class UnreachableTarget(ValueError):
    pass


@dataclass(frozen=True)
class WaveParams:
    amplitude: float = 0.0          # peak slope of the fundamental
    omega: float = DEFAULT_OMEGA    # rad/s
    phase: float = 0.0
    axis_mix: float = 1.0           # 1.0 = all motion on y
    amplitude2: float = 0.0         # second harmonic at 2*omega
    phase2: float = 0.0

    def __post_init__(self):
        if self.amplitude < 0 or self.amplitude2 < 0:
            raise ValueError("wave amplitudes must be non-negative")
        if self.omega < 0:
            raise ValueError("omega must be non-negative")
        if not 0.0 <= self.axis_mix <= 1.0:
            raise ValueError("axis_mix must lie in [0, 1]")

    @property
    def peak_slope(self) -> float:
        return self.amplitude + self.amplitude2

    def check_exits(self, optics: OpticalConstants) -> None:
        """Raise unless every ray leaves the water for these parameters."""
        limit = math.tan(optics.critical_angle)
        if self.peak_slope >= limit:
            raise ValueError(
                f"peak slope {self.peak_slope:.4g} reaches tan(critical) = {limit:.4g}")


@dataclass
class AscrReport:
    ascr: float
    scr_series: np.ndarray
    frac_above_1: float
    frac_above_2: float
    peak_scr: float
    tau: float
    scr_x_signed: np.ndarray = field(repr=False, default=None)
    scr_y_signed: np.ndarray = field(repr=False, default=None)

    def to_dict(self, include_series: bool = True) -> dict:
        out = {
            "ascr": self.ascr,
            "frac_above_1": self.frac_above_1,
            "frac_above_2": self.frac_above_2,
            "peak_scr": self.peak_scr,
            "tau_s": self.tau,
            "n_intervals": int(len(self.scr_series)),
        }
        if include_series:
            out["scr_series"] = [float(v) for v in self.scr_series]
        return out


def _profile(params: WaveParams, t):
    return (params.amplitude * np.sin(params.omega * t + params.phase)
            + params.amplitude2 * np.sin(2.0 * params.omega * t + params.phase2))


def slope_series(params: WaveParams, t):
    """Surface slopes (f_x, f_y) at times ``t`` (scalar or array)."""
    base = _profile(params, np.asarray(t, dtype=float))
    return (1.0 - params.axis_mix) * base, params.axis_mix * base


def sample_slope(params: WaveParams, t: float) -> SlopeState:
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be non-negative")
    f_x, f_y = slope_series(params, t)
    if np.ndim(f_x) == 0:
        f_x, f_y = float(f_x), float(f_y)
    return SlopeState.from_slopes(f_x, f_y)


def simulate_offsets(params: WaveParams, optics: OpticalConstants = OpticalConstants(),
                     fps: float = FRAME_RATE, n_frames: int = N_FRAMES):
    """Receiver-plane offsets a static, vertical beam would draw on a screen."""
    t = np.arange(n_frames) / fps
    f_x, f_y = slope_series(params, t)
    d_x = refract_displacement(np.arctan(f_x), optics)
    d_y = refract_displacement(np.arctan(f_y), optics)
    return t, d_x, d_y


def ascr_from_offsets(d_x, d_y, tau: float,
                      optics: OpticalConstants = OpticalConstants()) -> AscrReport:
    """ASCR of an offset record sampled every ``tau`` seconds."""
    d_x = np.asarray(d_x, dtype=float)
    d_y = np.asarray(d_y, dtype=float)
    if d_x.shape != d_y.shape or d_x.ndim != 1:
        raise ValueError("d_x and d_y must be 1-D arrays of equal length")
    if len(d_x) < 2:
        raise ValueError("need at least two frames")
    if not tau > 0:
        raise ValueError("tau must be positive")
    f_x, f_y = slopes_from_offset(d_x, d_y, optics)
    n = surface_normal(f_x, f_y)
    head = SurfaceNormal(n.nx[:-1], n.ny[:-1], n.nz[:-1])
    tail = SurfaceNormal(n.nx[1:], n.ny[1:], n.nz[1:])
    scr = np.asarray(slope_change(head, tail)) / tau
    return AscrReport(
        ascr=float(np.mean(scr)),
        scr_series=scr,
        frac_above_1=float(np.mean(scr > 1.0)),
        frac_above_2=float(np.mean(scr > 2.0)),
        peak_scr=float(np.max(scr)),
        tau=float(tau),
        scr_x_signed=np.diff(np.arctan(f_x)) / tau,
        scr_y_signed=np.diff(np.arctan(f_y)) / tau,
    )


def measure_ascr(samples: Sequence[SpotSample],
                 optics: OpticalConstants = OpticalConstants(),
                 rtol: float = 1e-6) -> AscrReport:
    """ASCR from a uniformly spaced sequence of spot samples."""
    if len(samples) < 2:
        raise ValueError("need at least two samples")
    t = np.array([s.t for s in samples], dtype=float)
    steps = np.diff(t)
    tau = float(np.mean(steps))
    if not tau > 0 or np.max(np.abs(steps - tau)) > rtol * tau:
        raise ValueError("samples must be uniformly spaced in time")
    return ascr_from_offsets([s.x for s in samples], [s.y for s in samples], tau, optics)


def _measured(params: WaveParams, optics: OpticalConstants) -> float:
    _, d_x, d_y = simulate_offsets(params, optics)
    return ascr_from_offsets(d_x, d_y, 1.0 / FRAME_RATE, optics).ascr


def safe_slope_ceiling(optics: OpticalConstants = OpticalConstants()) -> float:
    return SAFE_SLOPE_FRACTION * math.tan(optics.critical_angle)


def calibrate_wave(target_ascr: float, tol: float = 0.005,
                   optics: OpticalConstants = OpticalConstants(),
                   base: WaveParams | None = None,
                   omega_band: float = 0.1) -> WaveParams:
    """Tune the wave so its measured ASCR lands within ``tol`` of the target.

    The peak slope is searched first at the base angular frequency (ASCR
    grows monotonically with amplitude). If that leaves a residual above
    ``tol``, omega is refined by secant steps inside +/- ``omega_band``.
    The second-harmonic ratio of ``base`` is preserved.
    """
    if target_ascr < 0:
        raise ValueError("target_ascr must be non-negative")
    base = base or WaveParams()
    ratio = base.amplitude2 / base.amplitude if base.amplitude > 0 else 0.0
    if target_ascr == 0:
        return replace(base, amplitude=0.0, amplitude2=0.0)

    a_max = safe_slope_ceiling(optics) / (1.0 + ratio)

    def at(amplitude, omega=base.omega):
        return replace(base, amplitude=amplitude, amplitude2=ratio * amplitude, omega=omega)

    omega_hi = base.omega * (1.0 + omega_band)
    ceiling = _measured(at(a_max, omega_hi), optics)
    if target_ascr > ceiling:
        raise UnreachableTarget(
            f"target ASCR {target_ascr} rad/s exceeds the safe-slope ceiling "
            f"{ceiling:.4g} rad/s")

    top = _measured(at(a_max), optics)
    if target_ascr <= top:
        amp = brentq(lambda a: _measured(at(a), optics) - target_ascr,
                     0.0, a_max, xtol=1e-12, rtol=1e-12)
        params = at(amp)
    else:
        params = at(a_max)

    omega = params.omega
    got = _measured(params, optics)
    lo, hi = base.omega * (1.0 - omega_band), omega_hi
    for _ in range(20):
        if abs(got - target_ascr) <= tol:
            break
        # ASCR is close to proportional to omega at fixed amplitude
        omega = min(max(omega * target_ascr / got, lo), hi)
        params = replace(params, omega=omega)
        got = _measured(params, optics)
    if abs(got - target_ascr) > tol:
        raise UnreachableTarget(
            f"could not reach ASCR {target_ascr} within {tol} (got {got:.6g})")
    return params


def spot_speeds(params: WaveParams, optics: OpticalConstants = OpticalConstants(),
                fps: float = FRAME_RATE, n_frames: int = N_FRAMES) -> np.ndarray:
    """Receiver-plane spot speed magnitudes (m/s) from the closed-form derivative."""
    t = np.arange(n_frames) / fps
    f_x, f_y = slope_series(params, t)
    # d/dt arctan(f) = f' / (1 + f^2)
    dfx, dfy = _slope_rate(params, t)
    gx, gy = np.arctan(f_x), np.arctan(f_y)
    vx = spot_speed(gx, dfx / (1 + f_x ** 2), optics)
    vy = spot_speed(gy, dfy / (1 + f_y ** 2), optics)
    return np.hypot(vx, vy)


def _slope_rate(params: WaveParams, t):
    w = params.omega
    rate = (params.amplitude * w * np.cos(w * t + params.phase)
            + 2.0 * params.amplitude2 * w * np.cos(2.0 * w * t + params.phase2))
    return (1.0 - params.axis_mix) * rate, params.axis_mix * rate
