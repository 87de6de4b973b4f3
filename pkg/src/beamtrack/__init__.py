"""Closed-loop beam tracking simulator for water-air optical wireless links.

Submodules:

- ``geometry``: refraction offset, spot speed, surface normals, beam map
- ``waves``: synthetic slope generator, ASCR measurement and calibration
- ``imaging``: synthetic camera frames and the spot-locating pipeline
- ``control``: adaptive gain rule, PID steering law, mirror model
- ``link``: beam coupling, OOK bit error rate, packet loss, throughput
- ``engine``: time-stepped loop simulation and sweeps
- ``config`` / ``results`` / ``cli``: experiment files, output formats, front end
"""
__version__ = "0.1.0"

from .geometry import (
    NonInvertibleOffset,
    OpticalConstants,
    SlopeState,
    SpotSample,
    SurfaceNormal,
    TotalInternalReflection,
    beam_to_plane,
    refract_displacement,
    slope_change,
    slopes_from_offset,
    spot_speed,
    surface_normal,
)
from .waves import (
    AscrReport,
    UnreachableTarget,
    WaveParams,
    calibrate_wave,
    measure_ascr,
    sample_slope,
)
from .imaging import Blob, Frame, PipelineConfig, locate_spot, render_frame
from .control import (
    AxisControllerState,
    ControlParams,
    MirrorState,
    adapt_gain,
    advance,
    command_mirror,
    pid_command,
)
from .link import LinkConfig, RunMetrics, ber_ook, coupled_fraction, eval_packet, summarize_run
from .engine import LoopTrace, ScenarioConfig, run_cycle, run_scenario, step_substep, sweep
