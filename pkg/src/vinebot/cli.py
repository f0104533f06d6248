"""Command-line front end: ``vinebot <subcommand> ...``.

Exit codes: 0 success, 1 unexpected failure, 2 invalid input (bad file,
unknown key, marker parse error), 3 calibration data that cannot identify
the model.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import constants, io
from .core import CalibrationError, VineBodySpec, fit_calibration
from .mapping import MarkerParseError, heading_and_depression, path_metrics, reconstruct_path, segment_path
from .pipesim import (
    DEFAULT_MU_TIP,
    DEFAULT_TAIL,
    DEFAULT_TETHER,
    NoiseSpec,
    PipeSpec,
    TetherSpec,
    simulate_growth,
    synth_logs,
)
from .tipmount import (
    AdaptiveMount,
    ConstantForceMount,
    InteractionModel,
    mount_from_dict,
    mount_to_dict,
    pressure_sweep,
)

log = logging.getLogger("vinebot")

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_DEGENERATE = 0, 1, 2, 3


class InputError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    inputs: dict = field(default_factory=dict)
    out_dir: Path = Path(".")
    params: dict = field(default_factory=dict)
    seed: int = 0

    def validate(self):
        for name, path in self.inputs.items():
            if path is not None and not Path(path).is_file():
                raise InputError(f"{name}: file not found: {path}")
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise InputError(f"--out {self.out_dir}: {exc}") from None
        probe = self.out_dir / ".vinebot-write-test"
        try:
            probe.write_text("")
            probe.unlink()
        except OSError as exc:
            raise InputError(f"--out {self.out_dir} is not writable: {exc}") from None
        return self


# --- robot configuration -----------------------------------------------------

ROBOT_KEYS = {"body", "mount", "interaction", "tail", "tether", "payload_mass_kg", "mu_tip"}
BODY_KEYS = {"diameter_m", "C", "f_eversion_N", "f_inversion_N"}
LINE_KEYS = {"mass_per_length_kg_m", "mu_pipe", "base_tension_N"}


def default_robot() -> dict:
    """Calibrated 88 mm body with a 12 N adaptive mount; 600 g at the tip in total."""
    return {
        "body": {"diameter_m": constants.BODY_DIAMETER_M, "C": constants.CALIBRATED_C,
                 "f_eversion_N": constants.CALIBRATED_F_EVERSION_N, "f_inversion_N": 0.0},
        "mount": mount_to_dict(AdaptiveMount.tuned_to(12.0, mass=0.1)),
        "interaction": {"gain": 1.0, "offset": 0.0},
        "tail": _line_to_dict(DEFAULT_TAIL),
        "tether": _line_to_dict(DEFAULT_TETHER),
        "payload_mass_kg": 0.5,
        "mu_tip": DEFAULT_MU_TIP,
    }


def _line_to_dict(t: TetherSpec) -> dict:
    return {"mass_per_length_kg_m": t.mass_per_length, "mu_pipe": t.mu_pipe, "base_tension_N": t.base_tension}


def _check_keys(data, allowed, where):
    if not isinstance(data, dict):
        raise InputError(f"{where}: expected an object")
    unknown = set(data) - allowed
    if unknown:
        raise InputError(f"{where}: unknown keys {sorted(unknown)}")


def body_from_dict(d: dict, where="body") -> VineBodySpec:
    _check_keys(d, BODY_KEYS, where)
    try:
        return VineBodySpec(d.get("diameter_m", constants.BODY_DIAMETER_M), d.get("C", constants.DEFAULT_C),
                            d.get("f_eversion_N", 0.0), d.get("f_inversion_N", 0.0))
    except ValueError as exc:
        raise InputError(f"{where}: {exc}") from None


def line_from_dict(d: dict, where) -> TetherSpec:
    _check_keys(d, LINE_KEYS, where)
    try:
        return TetherSpec(d.get("mass_per_length_kg_m", 0.0), d.get("mu_pipe", 0.0), d.get("base_tension_N", 0.0))
    except ValueError as exc:
        raise InputError(f"{where}: {exc}") from None


def robot_from_dict(d: dict):
    _check_keys(d, ROBOT_KEYS, "robot")
    merged = default_robot()
    merged.update(d)
    body = body_from_dict(merged["body"])
    try:
        mount = None if merged["mount"] is None else mount_from_dict(merged["mount"])
    except (ValueError, TypeError) as exc:
        raise InputError(f"robot.mount: {exc}") from None
    _check_keys(merged["interaction"], {"gain", "offset"}, "robot.interaction")
    try:
        model = InteractionModel(**merged["interaction"])
    except ValueError as exc:
        raise InputError(f"robot.interaction: {exc}") from None
    tail = line_from_dict(merged["tail"], "robot.tail")
    tether = None if merged["tether"] is None else line_from_dict(merged["tether"], "robot.tether")
    return body, mount, model, tail, tether, float(merged["payload_mass_kg"]), float(merged["mu_tip"])


def _load_pipe(path) -> PipeSpec:
    try:
        return PipeSpec.from_dict(io.read_json(path))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, io.FormatError):
            raise
        raise InputError(f"{path}: {exc}") from None


def _noise(args, seed) -> NoiseSpec:
    if args.noise == "none":
        return NoiseSpec(seed=seed)
    base = NoiseSpec.default(seed)
    return NoiseSpec(
        base.accel_sigma if args.accel_sigma is None else args.accel_sigma,
        base.mag_sigma if args.mag_sigma is None else args.mag_sigma,
        base.marker_sigma if args.marker_sigma is None else args.marker_sigma,
        seed,
    )


# --- subcommands -------------------------------------------------------------


def cmd_calibrate(cfg: RunConfig) -> int:
    trials = io.read_trials(cfg.inputs["trials"])
    area = cfg.params["area"]
    if area is None:
        area = math.pi * (cfg.params["diameter"] / 2) ** 2
    result = fit_calibration(trials, area)
    io.write_calibration(cfg.out_dir / "calibration.json", result)
    print(f"C = {result.geometric_factor_C:.6g}")
    print(f"F_eversion = {result.f_eversion:.6g} N")
    print(f"rms residual = {result.rms_residual:.6g} Pa")
    return EXIT_OK


SWEEP_KEYS = {"body", "mounts", "interaction", "loads_N", "t_tail_N", "w_axial_N", "f_mount_N", "tuned_N"}


def cmd_sweep_mounts(cfg: RunConfig) -> int:
    p = {}
    if cfg.inputs.get("config"):
        p = io.read_json(cfg.inputs["config"])
        _check_keys(p, SWEEP_KEYS, "sweep config")
    p.update(cfg.params)  # command-line flags win over the file
    tuned = float(p.get("tuned_N", 12.0))
    body = body_from_dict(p.get("body") or {"diameter_m": constants.BODY_DIAMETER_M, "C": constants.CALIBRATED_C,
                                            "f_eversion_N": constants.CALIBRATED_F_EVERSION_N})
    mounts_raw = p.get("mounts") or {
        "constant": {"kind": "constant", "f_coupling_max": tuned},
        "adaptive": {"kind": "adaptive", "tuned_to_N": tuned},
    }
    _check_keys(mounts_raw, {"constant", "adaptive"}, "sweep config mounts")
    mounts = {}
    for name, spec in mounts_raw.items():
        try:
            mounts[name] = mount_from_dict(spec)
        except (ValueError, TypeError) as exc:
            raise InputError(f"mounts.{name}: {exc}") from None
    inter = p.get("interaction") or {"gain": 1.0, "offset": 0.0}
    _check_keys(inter, {"gain", "offset"}, "interaction")
    model = InteractionModel(**inter)
    loads = p.get("loads_N")
    if loads is None:
        loads = [float(x) for x in np.arange(0.0, tuned + 1e-9, 1.0)]
    rows = pressure_sweep(body, mounts, model, loads, float(p.get("t_tail_N", 0.0)),
                          float(p.get("w_axial_N", 0.0)), float(p.get("f_mount_N", 0.0)))
    io.write_sweep(cfg.out_dir / "sweep.csv", rows)
    print(f"wrote {len(rows)} rows to {cfg.out_dir / 'sweep.csv'}")
    return EXIT_OK


def _write_synth(pipe, noise, sample_per_m, out_dir):
    slog, markers = synth_logs(pipe, noise, sample_per_m)
    io.write_log(out_dir / "log.csv", slog)
    io.write_markers(out_dir / "markers.csv", markers)
    io.write_polyline(out_dir / "truth.csv", pipe.centerline(0.01))
    return slog, markers


def cmd_simulate(cfg: RunConfig) -> int:
    pipe = _load_pipe(cfg.inputs["pipe"])
    robot = io.read_json(cfg.inputs["robot"]) if cfg.inputs.get("robot") else {}
    body, mount, model, tail, tether, payload, mu_tip = robot_from_dict(robot)
    trace = simulate_growth(pipe, body, mount, model, tether, cfg.params["p_max"], cfg.params["step"],
                            tail=tail, payload_mass=payload, mu_tip=mu_tip)
    io.write_trace(cfg.out_dir / "trace.csv", trace)
    summary = {
        "status": trace.status,
        "max_reachable_length_m": trace.max_reachable_length,
        "pipe_length_m": pipe.total_length,
        "initial_pressure_Pa": None if not len(trace) else trace.initial_pressure,
        "p_max_Pa": cfg.params["p_max"],
        "mount_kind": None if mount is None else mount.kind,
    }
    io.write_json(cfg.out_dir / "trace_summary.json", summary)
    print(f"status {trace.status}; reached {trace.max_reachable_length:.3f} of {pipe.total_length:.3f} m")
    if cfg.params.get("synth_logs"):
        _write_synth(pipe, cfg.params["noise"], cfg.params["sample_per_m"], cfg.out_dir)
    return EXIT_OK


def cmd_synth_logs(cfg: RunConfig) -> int:
    pipe = _load_pipe(cfg.inputs["pipe"])
    slog, markers = _write_synth(pipe, cfg.params["noise"], cfg.params["sample_per_m"], cfg.out_dir)
    print(f"wrote {len(slog)} log rows and {len(markers)} markers to {cfg.out_dir}")
    return EXIT_OK


def _ground_truth(path, spacing):
    if str(path).endswith(".json"):
        return _load_pipe(path).centerline(spacing)
    return io.read_polyline(path)


def cmd_reconstruct(cfg: RunConfig) -> int:
    slog = io.read_log(cfg.inputs["log"])
    markers = io.read_markers(cfg.inputs["markers"])
    segments = segment_path(slog, markers)
    spacing = cfg.params["spacing"]
    poly = reconstruct_path(segments, (0.0, 0.0, 0.0), spacing)
    io.write_polyline(cfg.out_dir / "polyline.csv", poly)
    listing = []
    for seg in segments:
        if seg.kind == "straight":
            h = heading_and_depression(seg.orientation)
            entry = {"kind": "straight", "length_m": seg.length, "azimuth_deg": math.degrees(h.azimuth),
                     "depression_deg": math.degrees(h.depression), "vertical": h.vertical}
        else:
            entry = {"kind": "elbow", "length_m": seg.length, "bend_angle_deg": math.degrees(seg.bend_angle)}
        listing.append(entry)
        print("  ".join(f"{k}={v:.4f}" if isinstance(v, float) else f"{k}={v}" for k, v in entry.items()))
    io.write_json(cfg.out_dir / "segments.json", listing)
    if cfg.inputs.get("ground_truth"):
        gt = _ground_truth(cfg.inputs["ground_truth"], spacing)
        _write_metrics(cfg.out_dir, path_metrics(poly, gt))
    return EXIT_OK


def _write_metrics(out_dir, m):
    data = {"max_orientation_dev_deg": math.degrees(m.max_orientation_dev),
            "max_orientation_dev_rad": m.max_orientation_dev, "length_dev_m": m.length_dev}
    io.write_json(out_dir / "metrics.json", data)
    print(f"orientation deviation {data['max_orientation_dev_deg']:.4f} deg, length deviation {m.length_dev:.4f} m")


def cmd_score(cfg: RunConfig) -> int:
    rec = io.read_polyline(cfg.inputs["reconstructed"])
    gt = _ground_truth(cfg.inputs["ground_truth"], cfg.params["spacing"])
    _write_metrics(cfg.out_dir, path_metrics(rec, gt))
    return EXIT_OK


def show_defaults() -> dict:
    d = constants.defaults_dump()
    d["default_robot"] = default_robot()
    d["default_noise"] = asdict(NoiseSpec.default())
    d["sweep_default_mounts"] = {
        "constant": mount_to_dict(ConstantForceMount(12.0)),
        "adaptive": mount_to_dict(AdaptiveMount.tuned_to(12.0)),
    }
    return d


# --- argument parsing --------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed (default 0)")
    common.add_argument("--out", type=Path, default=argparse.SUPPRESS, help="output directory (default .)")

    parser = argparse.ArgumentParser(prog="vinebot", description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=Path, default=Path("."))
    parser.add_argument("--show-defaults", action="store_true", help="print every physical default as JSON")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("calibrate", parents=[common], help="fit C and F_eversion to load/pressure trials")
    p.add_argument("trials", help="CSV with header load_N,pressure_Pa")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--diameter", type=float, default=constants.BODY_DIAMETER_M, help="body diameter in m")
    g.add_argument("--area", type=float, default=None, help="cross-section area in m^2")

    p = sub.add_parser("sweep-mounts", parents=[common], help="pressure vs load for no mount, constant and adaptive")
    p.add_argument("--config", help="JSON with body, mounts, interaction, loads_N, t_tail_N, w_axial_N, f_mount_N")
    p.add_argument("--tuned", type=float, default=None, help="zero-contact coupling for both mounts (N)")
    p.add_argument("--loads", default=None, help="comma-separated payload loads in N ('' for none)")
    p.add_argument("--w-axial", type=float, default=None, help="axial mount weight in N")
    p.add_argument("--gain", type=float, default=None, help="interaction loss gain")

    def noise_args(q):
        q.add_argument("--noise", choices=["default", "none"], default="default")
        q.add_argument("--accel-sigma", type=float, default=None)
        q.add_argument("--mag-sigma", type=float, default=None)
        q.add_argument("--marker-sigma", type=float, default=None)
        q.add_argument("--sample-per-m", type=float, default=20.0)

    p = sub.add_parser("simulate", parents=[common], help="march growth through a pipe")
    p.add_argument("pipe", help="pipe JSON")
    p.add_argument("--robot", help="robot JSON (body, mount, interaction, tail, tether, payload_mass_kg, mu_tip)")
    p.add_argument("--p-max", type=float, default=10_000.0, help="maximum pressure in Pa")
    p.add_argument("--step", type=float, default=0.05, help="length step in m")
    p.add_argument("--synth-logs", action="store_true", help="also write synthetic IMU logs and markers")
    noise_args(p)

    p = sub.add_parser("synth-logs", parents=[common], help="synthetic IMU log and marker table for a pipe")
    p.add_argument("pipe", help="pipe JSON")
    noise_args(p)

    p = sub.add_parser("reconstruct", parents=[common], help="rebuild the centerline from log and markers")
    p.add_argument("log", help="log CSV t_s,ax,ay,az,mx,my,mz,marker_id")
    p.add_argument("markers", help="marker CSV marker_id,odometry_m,label")
    p.add_argument("--ground-truth", help="pipe JSON or polyline CSV to score against")
    p.add_argument("--spacing", type=float, default=0.01)

    p = sub.add_parser("score", parents=[common], help="deviation metrics between two paths")
    p.add_argument("reconstructed", help="polyline CSV")
    p.add_argument("ground_truth", help="pipe JSON or polyline CSV")
    p.add_argument("--spacing", type=float, default=0.01)
    return parser


def config_from_args(args) -> RunConfig:
    cmd = args.command
    cfg = RunConfig(cmd, out_dir=args.out, seed=args.seed)
    if cmd == "calibrate":
        cfg.inputs = {"trials": args.trials}
        cfg.params = {"diameter": args.diameter, "area": args.area}
    elif cmd == "sweep-mounts":
        cfg.inputs = {"config": args.config}
        params = {}
        if args.tuned is not None:
            params["tuned_N"] = args.tuned
        if args.loads is not None:
            try:
                params["loads_N"] = [float(x) for x in args.loads.split(",") if x.strip()]
            except ValueError:
                raise InputError(f"--loads: not a comma-separated list of numbers: {args.loads!r}") from None
        if args.w_axial is not None:
            params["w_axial_N"] = args.w_axial
        if args.gain is not None:
            params["interaction"] = {"gain": args.gain, "offset": 0.0}
        cfg.params = params
    elif cmd in ("simulate", "synth-logs"):
        cfg.inputs = {"pipe": args.pipe}
        if cmd == "simulate":
            cfg.inputs["robot"] = args.robot
            cfg.params = {"p_max": args.p_max, "step": args.step, "synth_logs": args.synth_logs}
        cfg.params.update(noise=_noise(args, args.seed), sample_per_m=args.sample_per_m)
    elif cmd == "reconstruct":
        cfg.inputs = {"log": args.log, "markers": args.markers, "ground_truth": args.ground_truth}
        cfg.params = {"spacing": args.spacing}
    elif cmd == "score":
        cfg.inputs = {"reconstructed": args.reconstructed, "ground_truth": args.ground_truth}
        cfg.params = {"spacing": args.spacing}
    return cfg.validate()


COMMANDS = {
    "calibrate": cmd_calibrate,
    "sweep-mounts": cmd_sweep_mounts,
    "simulate": cmd_simulate,
    "synth-logs": cmd_synth_logs,
    "reconstruct": cmd_reconstruct,
    "score": cmd_score,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.show_defaults:
        print(json.dumps(show_defaults(), indent=2, sort_keys=True))
        if args.command is None:
            return EXIT_OK
    if args.command is None:
        parser.print_help()
        return EXIT_INPUT
    try:
        cfg = config_from_args(args)
        return COMMANDS[args.command](cfg)
    except CalibrationError as exc:
        print(f"error: degenerate calibration: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (InputError, io.FormatError, MarkerParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        log.debug("unexpected failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
