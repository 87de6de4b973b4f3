"""Closed-loop tracking simulation over simulated time.

The plant (wave slope, receiver position) is a function of time only. The
loop runs on a fixed cycle: the camera exposes at the start of each cycle,
the spot is located in the retro-reflected image, the adaptive controller
computes a new mirror tilt and the mirror lands it after the settle delay.
Between those events the plant is sampled on a fine substep grid, and the
offset samples drive the link model.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .control import (
    ControlParams,
    MIRROR_LIMIT,
    MirrorState,
    advance,
    adapt_gain,
    command_mirror,
    new_axis_state,
    pid_command,
)
from .geometry import OpticalConstants, SlopeState, beam_to_plane
from .imaging import PipelineConfig, locate_spot, render_frame
from .link import LinkConfig, OffsetTrace, RunMetrics, ber_ook, packet_bers, summarize_run
from .waves import WaveParams, slope_series

__all__ = [
    "ReceiverState",
    "ScenarioConfig",
    "CycleRecord",
    "LoopTrace",
    "World",
    "SweepResult",
    "receiver_state",
    "new_world",
    "step_substep",
    "run_cycle",
    "run_scenario",
    "sweep",
]


@dataclass(frozen=True)
class ReceiverState:
    x: float
    v: float
    range: float
    direction: int


def _triangle(t, speed: float, span: float):
    half = span / 2.0
    if speed == 0 or half == 0:
        zero = np.zeros_like(np.asarray(t, dtype=float))
        return zero, np.ones_like(zero)
    u = np.mod(speed * np.asarray(t, dtype=float) + half, 4.0 * half)
    forward = u <= 2.0 * half
    x = np.where(forward, u - half, 3.0 * half - u)
    return x, np.where(forward, 1.0, -1.0)


def receiver_state(t: float, speed: float, span: float = 0.20) -> ReceiverState:
    """Receiver on a reciprocating rail: starts at the centre moving +x,
    reverses instantly at +/- span/2."""
    x, direction = _triangle(t, speed, span)
    return ReceiverState(float(x), speed, span, int(direction))


@dataclass(frozen=True)
class ScenarioConfig:
    data_rate: float
    duration: float = 10.0
    wave: WaveParams | None = None
    rx_speed: float = 0.0
    tracking: bool = True
    cycle_period: float = 0.007
    substep: float = 1e-4
    seed: int = 0
    name: str = "scenario"
    rail_range: float = 0.20
    lever: float = 1.97               # folded water + air path (m)
    exposure_mid: float = 0.0005      # 1 ms exposure, sampled at its midpoint
    settle: float = 0.002
    mirror_limit: float = MIRROR_LIMIT
    camera_spot_sigma: float = 0.004
    camera_peak: float = 200.0
    camera_scale: float = 1.0
    optics: OpticalConstants = field(default_factory=OpticalConstants)
    link: LinkConfig = field(default_factory=LinkConfig)
    control: ControlParams = field(default_factory=ControlParams)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)

    def __post_init__(self):
        if not self.data_rate > 0:
            raise ValueError("data_rate must be positive")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if self.rx_speed < 0:
            raise ValueError("rx_speed must be non-negative")
        if not 0 < self.substep < self.cycle_period:
            raise ValueError("substep must be positive and shorter than cycle_period")
        for name in ("cycle_period", "exposure_mid", "settle"):
            ratio = getattr(self, name) / self.substep
            if abs(ratio - round(ratio)) > 1e-6:
                raise ValueError(f"{name} must be a whole number of substeps")
        if not self.exposure_mid < self.settle < self.cycle_period:
            raise ValueError("need exposure_mid < settle < cycle_period")
        if not self.camera_scale > 0 or not self.camera_spot_sigma > 0:
            raise ValueError("camera_scale and camera_spot_sigma must be positive")
        if self.wave is not None:
            self.wave.check_exits(self.optics)
        link = self.link_config
        need = link.packets_per_run * link.packet_duration
        if self.duration < need * (1 - 1e-12):
            raise ValueError(
                f"duration {self.duration} s holds fewer than {link.packets_per_run} packets")

    @property
    def link_config(self) -> LinkConfig:
        return replace(self.link, data_rate=self.data_rate)

    def steps(self, seconds: float) -> int:
        return int(round(seconds / self.substep))


@dataclass(frozen=True)
class CycleRecord:
    t: float
    offset_x: float           # true spot-minus-receiver offset at exposure
    offset_y: float
    measured_x: float         # nan when no blob was found
    measured_y: float
    blob_found: bool
    tilt_x: float             # commanded (target) tilt after this cycle
    tilt_y: float
    s_x: float
    s_y: float


@dataclass
class LoopTrace:
    cycles: list[CycleRecord]
    offsets: OffsetTrace

    def rows(self):
        for c in self.cycles:
            yield (c.t, c.offset_x, c.offset_y, c.tilt_x, c.tilt_y, int(c.blob_found))


@dataclass
class World:
    cfg: ScenarioConfig
    n: int = 0                        # index of the next substep sample
    cycle: int = 0
    mirror: MirrorState = None
    ctrl_x: object = None
    ctrl_y: object = None
    t_chunks: list = field(default_factory=list)
    x_chunks: list = field(default_factory=list)
    y_chunks: list = field(default_factory=list)
    cycles: list = field(default_factory=list)
    frame_sink: Callable | None = None

    @property
    def t(self) -> float:
        return self.n * self.cfg.substep

    def last_offset(self):
        return float(self.x_chunks[-1][-1]), float(self.y_chunks[-1][-1])

    def offset_trace(self, t_end: float | None = None) -> OffsetTrace:
        t = np.concatenate(self.t_chunks) if self.t_chunks else np.empty(0)
        x = np.concatenate(self.x_chunks) if self.x_chunks else np.empty(0)
        y = np.concatenate(self.y_chunks) if self.y_chunks else np.empty(0)
        if t_end is not None:
            keep = t < t_end - 1e-12
            t, x, y = t[keep], x[keep], y[keep]
        return OffsetTrace(t, x, y)


def new_world(cfg: ScenarioConfig, frame_sink: Callable | None = None) -> World:
    return World(
        cfg=cfg,
        mirror=MirrorState(limit=cfg.mirror_limit),
        ctrl_x=new_axis_state(cfg.control, cfg.lever),
        ctrl_y=new_axis_state(cfg.control, cfg.lever),
        frame_sink=frame_sink,
    )


def _spot(cfg: ScenarioConfig, tilt_x, tilt_y, t):
    if cfg.wave is None:
        slope = SlopeState(0.0, 0.0, np.zeros_like(t), np.zeros_like(t))
    else:
        f_x, f_y = slope_series(cfg.wave, t)
        slope = SlopeState.from_slopes(f_x, f_y)
        # outage where a ray would be trapped by total internal reflection
        trapped = (cfg.optics.n_prime * np.abs(np.sin(slope.gamma_x)) >= 1) | (
            cfg.optics.n_prime * np.abs(np.sin(slope.gamma_y)) >= 1)
        if trapped.any():
            gx = np.where(trapped, 0.0, slope.gamma_x)
            gy = np.where(trapped, 0.0, slope.gamma_y)
            x, y = beam_to_plane(tilt_x, tilt_y, SlopeState(f_x, f_y, gx, gy),
                                 cfg.optics, cfg.lever)
            return np.where(trapped, np.nan, x), np.where(trapped, np.nan, y)
    x, y = beam_to_plane(tilt_x, tilt_y, slope, cfg.optics, cfg.lever)
    return np.asarray(x, dtype=float), np.asarray(y, dtype=float)


def _advance(world: World, count: int) -> World:
    if count <= 0:
        return world
    cfg = world.cfg
    t = (world.n + np.arange(count)) * cfg.substep
    m = world.mirror
    old_x, old_y = m.tilt_x, m.tilt_y
    if m.pending is not None:
        (new_x, new_y), at = m.pending
        landed = t >= at - 1e-12
        tilt_x = np.where(landed, new_x, old_x)
        tilt_y = np.where(landed, new_y, old_y)
    else:
        tilt_x = np.full(count, old_x)
        tilt_y = np.full(count, old_y)
    world.mirror = advance(m, float(t[-1]))
    spot_x, spot_y = _spot(cfg, tilt_x, tilt_y, t)
    rx_x, _ = _triangle(t, cfg.rx_speed, cfg.rail_range)
    world.t_chunks.append(t)
    world.x_chunks.append(spot_x - rx_x)
    world.y_chunks.append(spot_y)
    world.n += count
    return world


def step_substep(world: World, dt: float | None = None) -> World:
    """Advance the plant by one substep and append its offset sample."""
    if dt is not None and abs(dt - world.cfg.substep) > 1e-15:
        raise ValueError("dt must equal the configured substep")
    return _advance(world, 1)


def run_cycle(world: World) -> World:
    """One capture -> locate -> control -> actuate cycle.

    The exposure midpoint sample is imaged; the resulting tilt command is
    stamped at the cycle start and lands ``settle`` seconds after it. A
    frame without a usable blob leaves the mirror and controller untouched.
    """
    cfg = world.cfg
    per_cycle = cfg.steps(cfg.cycle_period)
    if world.n % per_cycle:
        raise RuntimeError("run_cycle must start on a cycle boundary")
    t_k = world.t
    exp = cfg.steps(cfg.exposure_mid)
    _advance(world, exp + 1)
    off_x, off_y = world.last_offset()

    scale = cfg.camera_scale
    frame = render_frame((scale * off_x, scale * off_y), cfg.camera_spot_sigma,
                         cfg.camera_peak, cfg.pipeline, rng_seed=(cfg.seed, world.cycle))
    if world.frame_sink is not None:
        world.frame_sink(world.cycle, frame)
    located = locate_spot(frame, cfg.pipeline)
    meas_x = meas_y = math.nan
    if located is not None:
        meas_x, meas_y = located[0] / scale, located[1] / scale
        if cfg.tracking:
            # target is the frame centre: zero spot-to-receiver offset
            _, cx = adapt_gain(world.ctrl_x, meas_x, 0.0)
            _, cy = adapt_gain(world.ctrl_y, meas_y, 0.0)
            dx, cx = pid_command(cx, meas_x, cfg.cycle_period)
            dy, cy = pid_command(cy, meas_y, cfg.cycle_period)
            world.ctrl_x, world.ctrl_y = cx, cy
            tx, ty = world.mirror.target
            world.mirror = command_mirror(world.mirror, (tx + dx, ty + dy), t_k, cfg.settle)

    tx, ty = world.mirror.target
    world.cycles.append(CycleRecord(
        t=t_k, offset_x=off_x, offset_y=off_y, measured_x=meas_x, measured_y=meas_y,
        blob_found=located is not None, tilt_x=tx, tilt_y=ty,
        s_x=world.ctrl_x.s, s_y=world.ctrl_y.s,
    ))
    _advance(world, per_cycle - exp - 1)
    world.cycle += 1
    return world


def run_scenario(cfg: ScenarioConfig, frame_sink: Callable | None = None):
    """Simulate ``cfg.duration`` seconds; returns ``(RunMetrics, LoopTrace)``."""
    world = new_world(cfg, frame_sink)
    n_cycles = int(math.ceil(cfg.duration / cfg.cycle_period - 1e-9))
    for _ in range(n_cycles):
        run_cycle(world)
    trace = world.offset_trace(cfg.duration)
    link = cfg.link_config
    ber = ber_ook(trace.radial, link)
    bers = np.clip(packet_bers(trace.t, ber, cfg.duration, link), 0.0, 0.5)
    metrics = summarize_run(bers, trace, link)
    return metrics, LoopTrace(world.cycles, trace)


@dataclass
class SweepResult:
    config: ScenarioConfig
    metrics: RunMetrics | None
    error: str | None = None


def _run_row(cfg: ScenarioConfig) -> SweepResult:
    try:
        metrics, _ = run_scenario(cfg)
    except Exception as exc:     # one bad row must not sink the sweep
        return SweepResult(cfg, None, f"{type(exc).__name__}: {exc}")
    metrics.offset_trace = None
    return SweepResult(cfg, metrics)


def sweep(cfgs: Sequence[ScenarioConfig], workers: int = 1) -> list[SweepResult]:
    """Run independent scenarios; results keep the input order."""
    cfgs = list(cfgs)
    if workers > 1 and len(cfgs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_row, cfgs))
    return [_run_row(c) for c in cfgs]
