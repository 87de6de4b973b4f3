"""Adaptive proportional gain, PID steering law and the MEMS mirror model."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

__all__ = [
    "ControlParams",
    "AxisControllerState",
    "MirrorState",
    "TimeRegression",
    "new_axis_state",
    "adapt_gain",
    "pid_command",
    "command_mirror",
    "advance",
    "MIRROR_LIMIT",
    "SETTLE_TIME",
]

MIRROR_LIMIT = math.radians(2.7)
SETTLE_TIME = 0.002
_TIME_EPS = 1e-12


class TimeRegression(ValueError):
    pass


@dataclass(frozen=True)
class ControlParams:
    alpha: float = 0.1
    p1: float = 0.004
    p2: float = 0.005
    q: float = 2.5
    k_i: float = 0.0
    # Negative derivative weight acts as phase lead: with one cycle of
    # delay it widens the stable range of s from (0, 2) to (0, 2 - 2D),
    # D = k_d * 2 * lever / T, which the ramp-tracking scale needs.
    k_d: float = -5.3e-4
    integ_max: float = 0.05
    s0: float = 1.2

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not (self.p1 > 0 and self.p2 > 0):
            raise ValueError("p1 and p2 must be positive")
        if not self.q > 1:
            raise ValueError("q must exceed 1")
        if not 1 <= self.s0 <= self.q:
            raise ValueError("s0 must lie in [1, q]")


@dataclass(frozen=True)
class AxisControllerState:
    k: float                  # base proportional coefficient (rad/m)
    s: float = 1.0
    d_prev: float = 0.0
    alpha: float = 0.1
    p1: float = 0.004
    p2: float = 0.005
    q: float = 2.5
    integ: float = 0.0
    k_i: float = 0.0
    k_d: float = 0.0
    integ_max: float = 0.05
    d_prev_pid: float = 0.0

    @property
    def k_p(self) -> float:
        return self.s * self.k


def new_axis_state(params: ControlParams = ControlParams(), lever: float = 1.97) -> AxisControllerState:
    """Fresh per-axis state.

    The base coefficient is the tilt-per-offset ratio of the lever plant,
    so one unit-scale proportional step cancels an observed offset.
    """
    return AxisControllerState(
        k=1.0 / (2.0 * lever), s=params.s0, alpha=params.alpha, p1=params.p1,
        p2=params.p2, q=params.q, k_i=params.k_i, k_d=params.k_d,
        integ_max=params.integ_max,
    )


def adapt_gain(st: AxisControllerState, x_c: float, x_i: float):
    """One iteration of the low-complexity adaptive gain rule.

    Returns ``(k_p, new_state)``.
    """
    d = x_c - x_i
    d0 = st.d_prev
    s = st.s
    if d * d0 < 0:
        if abs(d) > st.p1 and abs(d0) > st.p1:
            s -= st.alpha
    elif abs(d) > st.p2 and abs(d0) > st.p2:
        s += st.alpha
    if s < 1:
        s = 1.0
    elif s > st.q:
        # undoes the step just taken; the max() only absorbs rounding in (s + a) - a
        s = max(s - st.alpha, 1.0)
    new = replace(st, s=s, d_prev=d)
    return new.k_p, new


def pid_command(st: AxisControllerState, d: float, dt: float):
    """Tilt increment for offset ``d``; returns ``(delta, new_state)``.

    Positive offsets steer negative. The integral is clamped to
    ``integ_max`` in magnitude.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    integ = min(max(st.integ + d * dt, -st.integ_max), st.integ_max)
    deriv = (d - st.d_prev_pid) / dt
    out = -(st.k_p * d + st.k_i * integ + st.k_d * deriv)
    return out, replace(st, integ=integ, d_prev_pid=d)


@dataclass(frozen=True)
class MirrorState:
    tilt_x: float = 0.0
    tilt_y: float = 0.0
    limit: float = MIRROR_LIMIT
    pending: tuple | None = None      # ((tilt_x, tilt_y), apply_at)
    last_t: float = -math.inf

    @property
    def target(self):
        """Most recently commanded tilt (pending or applied)."""
        if self.pending is not None:
            return self.pending[0]
        return self.tilt_x, self.tilt_y


def _clamp(v, limit):
    return min(max(v, -limit), limit)


def command_mirror(m: MirrorState, tilt_target, now: float,
                   settle: float = SETTLE_TIME) -> MirrorState:
    """Queue a tilt; it lands ``settle`` seconds later. Last write wins."""
    tx, ty = tilt_target
    target = (_clamp(tx, m.limit), _clamp(ty, m.limit))
    return replace(m, pending=(target, now + settle))


def advance(m: MirrorState, t: float) -> MirrorState:
    """Apply the pending tilt once its settle time has passed."""
    if t < m.last_t - _TIME_EPS:
        raise TimeRegression(f"time went backwards: {t} < {m.last_t}")
    if m.pending is not None and t >= m.pending[1] - _TIME_EPS:
        (tx, ty), _ = m.pending
        return replace(m, tilt_x=tx, tilt_y=ty, pending=None, last_t=t)
    return replace(m, last_t=t)
