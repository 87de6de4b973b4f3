"""Command-line front end.

    beamtrack run --config scenario.toml [--out metrics.csv] [--trace] [--frames DIR]
    beamtrack sweep --config sweep.toml [--out table.csv] [--workers N]
    beamtrack characterize (--config wave.toml | --offsets record.csv) [--out report.json]
    beamtrack calibrate --target 0.0963 [--out wave.toml]

Exit status: 0 success, 1 runtime failure, 2 bad configuration or arguments.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import __version__
from .config import (
    MAX_SEED,
    ConfigError,
    ExperimentSpec,
    _build,
    load_spec,
    tomllib,
)
from .engine import run_scenario, sweep
from .geometry import OpticalConstants
from .imaging import write_pgm
from .results import (
    MetricsRow,
    metrics_csv,
    read_offsets,
    report_json,
    trace_csv,
    wave_toml,
)
from .waves import (
    FRAME_RATE,
    UnreachableTarget,
    WaveParams,
    ascr_from_offsets,
    calibrate_wave,
    simulate_offsets,
)

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v <= MAX_SEED:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="beamtrack", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="TOML experiment file")
        sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("--seed", type=_seed, help="override the base seed")

    run = sub.add_parser("run", help="run every [scenario.*] in a file")
    common(run)
    run.add_argument("--trace", action="store_true",
                     help="write a per-cycle trace CSV next to the metrics")
    run.add_argument("--frames", metavar="DIR", help="dump every camera frame as PGM")
    run.add_argument("--frame-format", choices=("P5", "P2"), default="P5")

    sw = sub.add_parser("sweep", help="run the cross product of a [sweep] table")
    common(sw)
    sw.add_argument("--workers", type=int, help="parallel processes")
    sw.add_argument("--trace", action="store_true")

    ch = sub.add_parser("characterize", help="ASCR report of a wave or offset record")
    ch.add_argument("--config", help="TOML file with a [wave] table")
    ch.add_argument("--offsets", help="offset record: tau_s=<value> line then dx_m,dy_m rows")
    ch.add_argument("--out")
    ch.add_argument("--series", action="store_true", help="include per-interval SCR values")

    cal = sub.add_parser("calibrate", help="wave parameters for a target ASCR")
    cal.add_argument("--target", type=float, required=True, help="ASCR in rad/s")
    cal.add_argument("--tol", type=float, default=0.005)
    cal.add_argument("--out")
    return p


def _emit(text: str, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)


def _trace_path(out: str | None, name: str) -> Path:
    base = Path(out) if out not in (None, "-") else Path("metrics.csv")
    return base.with_name(f"{base.stem}.{name}.trace.csv")


def _apply_seeds(spec: ExperimentSpec, seed: int | None) -> list:
    out = []
    for i, e in enumerate(spec.scenarios):
        base = e.config.seed if seed is None else seed
        s = base if spec.seed_policy == "fixed" else (base + i) % (MAX_SEED + 1)
        out.append(dataclasses.replace(e, config=dataclasses.replace(e.config, seed=s)))
    return out


def _frame_sink(root: Path, fmt: str):
    root.mkdir(parents=True, exist_ok=True)

    def sink(cycle, frame):
        write_pgm(frame, root / f"frame_{cycle:06d}.pgm", binary=fmt == "P5")
    return sink


def cmd_run(args) -> int:
    spec = load_spec(args.config)
    out = args.out or spec.metrics_path
    frames = args.frames or spec.frames_dir
    rows, traces = [], []
    for e in _apply_seeds(spec, args.seed):
        sink = _frame_sink(Path(frames) / e.name, args.frame_format) if frames else None
        m, trace = run_scenario(e.config, frame_sink=sink)
        rows.append(MetricsRow.from_run(e.name, e.ascr, e.config.rx_speed, e.config.tracking,
                                        m, e.config.data_rate))
        traces.append((e.name, trace))
    _emit(metrics_csv(rows), out)
    if args.trace or spec.trace:
        for name, trace in traces:
            _emit(trace_csv(trace.rows()), str(_trace_path(out, name)))
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec = load_spec(args.config)
    out = args.out or spec.metrics_path
    entries = _apply_seeds(spec, args.seed)
    workers = args.workers or spec.workers
    if args.trace or spec.trace:
        # traces need the full run objects, so run in-process
        results = []
        for e in entries:
            try:
                m, trace = run_scenario(e.config)
            except Exception as exc:
                results.append((e, None, f"{type(exc).__name__}: {exc}"))
                continue
            _emit(trace_csv(trace.rows()), str(_trace_path(out, e.name)))
            results.append((e, m, None))
    else:
        results = [(e, r.metrics, r.error)
                   for e, r in zip(entries, sweep([e.config for e in entries], workers))]
    rows, failed = [], []
    for e, m, err in results:
        if err is not None:
            failed.append(f"{e.name}: {err}")
            continue
        rows.append(MetricsRow.from_run(e.name, e.ascr, e.config.rx_speed, e.config.tracking,
                                        m, e.config.data_rate))
    _emit(metrics_csv(rows), out)
    for msg in failed:
        print(f"beamtrack: row failed: {msg}", file=sys.stderr)
    return EXIT_RUNTIME if failed else EXIT_OK


def _load_wave(path) -> tuple[WaveParams, OpticalConstants]:
    try:
        doc = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(path), str(exc)) from None
    for key in doc:
        if key not in ("wave", "optics", "calibration"):
            raise ConfigError(key, "unknown key")
    if "wave" not in doc:
        raise ConfigError("wave", "missing required table")
    wave = _build(WaveParams, doc["wave"], "wave")
    optics = _build(OpticalConstants, doc.get("optics", {}), "optics")
    try:
        wave.check_exits(optics)
    except ValueError as exc:
        raise ConfigError("wave", str(exc)) from None
    return wave, optics


def cmd_characterize(args) -> int:
    if (args.config is None) == (args.offsets is None):
        raise ConfigError("", "give exactly one of --config or --offsets")
    if args.config is not None:
        wave, optics = _load_wave(args.config)
        _, d_x, d_y = simulate_offsets(wave, optics)
        tau = 1.0 / FRAME_RATE
    else:
        optics = OpticalConstants()
        try:
            tau, d_x, d_y = read_offsets(args.offsets)
        except OSError as exc:
            raise ConfigError(args.offsets, f"cannot read: {exc.strerror}") from None
        except ValueError as exc:
            raise ConfigError(args.offsets, str(exc)) from None
    report = ascr_from_offsets(d_x, d_y, tau, optics)
    _emit(report_json(report, include_series=args.series), args.out)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    try:
        params = calibrate_wave(args.target, tol=args.tol)
    except UnreachableTarget as exc:
        raise ConfigError("target", str(exc)) from None
    except ValueError as exc:
        raise ConfigError("target", str(exc)) from None
    _, d_x, d_y = simulate_offsets(params)
    achieved = ascr_from_offsets(d_x, d_y, 1.0 / FRAME_RATE).ascr
    _emit(wave_toml(params, achieved), args.out)
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "characterize": cmd_characterize,
    "calibrate": cmd_calibrate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"beamtrack: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"beamtrack: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
