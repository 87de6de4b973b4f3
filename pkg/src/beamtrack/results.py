"""File formats: metrics CSV, per-cycle trace CSV, ASCR JSON, wave TOML and
offset-record ingestion.

Floats are written with ``repr`` so a parsed file reproduces the in-memory
values exactly.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .link import RunMetrics
from .waves import AscrReport, WaveParams

__all__ = [
    "MetricsRow",
    "METRICS_HEADER",
    "TRACE_HEADER",
    "metrics_csv",
    "read_metrics",
    "trace_csv",
    "report_json",
    "wave_toml",
    "read_offsets",
]


@dataclass(frozen=True)
class MetricsRow:
    scenario: str
    ascr: float
    rx_speed: float
    data_rate: float
    tracking: bool
    plr: float
    mean_ber: float
    throughput: float
    offset_std_x: float
    offset_std_y: float

    @classmethod
    def from_run(cls, scenario: str, ascr: float, rx_speed: float, tracking: bool,
                 m: RunMetrics, data_rate: float) -> "MetricsRow":
        return cls(scenario, float(ascr), float(rx_speed), float(data_rate), bool(tracking),
                   m.plr, m.mean_ber, m.throughput, m.offset_std_x, m.offset_std_y)


METRICS_HEADER = tuple(f.name for f in fields(MetricsRow))
TRACE_HEADER = ("t", "offset_x", "offset_y", "tilt_x", "tilt_y", "blob_found")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def metrics_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_HEADER)
    for r in rows:
        w.writerow([_fmt(v) for v in asdict(r).values()])
    return buf.getvalue()


def read_metrics(path_or_text) -> list[MetricsRow]:
    text = path_or_text
    if isinstance(path_or_text, Path) or (
            isinstance(path_or_text, str) and "\n" not in path_or_text):
        text = Path(path_or_text).read_text()
    reader = csv.reader(io.StringIO(text))
    header = tuple(next(reader))
    if header != METRICS_HEADER:
        raise ValueError(f"unexpected metrics header {header}")
    out = []
    for rec in reader:
        vals = dict(zip(header, rec))
        out.append(MetricsRow(
            scenario=vals["scenario"],
            tracking=vals["tracking"] == "1",
            **{k: float(vals[k]) for k in header if k not in ("scenario", "tracking")},
        ))
    return out


def trace_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def report_json(report: AscrReport, include_series: bool = False) -> str:
    d = {k: _json_safe(v) for k, v in report.to_dict(include_series).items()}
    return json.dumps(d, indent=2) + "\n"


def wave_toml(params: WaveParams, achieved_ascr: float | None = None) -> str:
    lines = ["[wave]"]
    for f in fields(WaveParams):
        lines.append(f"{f.name} = {repr(float(getattr(params, f.name)))}")
    if achieved_ascr is not None:
        lines += ["", "[calibration]", f"achieved_ascr = {repr(float(achieved_ascr))}"]
    return "\n".join(lines) + "\n"


def read_offsets(path):
    """Parse an offset record: a ``tau_s=<value>`` line, then ``dx_m,dy_m`` rows.

    A literal ``dx_m,dy_m`` header row after the tau line is optional.
    Returns ``(tau, d_x, d_y)``.
    """
    lines = [ln.strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or not lines[0].startswith("tau_s="):
        raise ValueError("offset record must start with a tau_s=<value> line")
    tau = float(lines[0].split("=", 1)[1])
    body = lines[1:]
    if body and body[0].replace(" ", "") == "dx_m,dy_m":
        body = body[1:]
    if len(body) < 2:
        raise ValueError("offset record needs at least two rows")
    data = np.array([[float(v) for v in ln.split(",")] for ln in body])
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError("offset rows must hold exactly two columns")
    return tau, data[:, 0], data[:, 1]
