"""Command-line front end.

Exit codes: 0 success with every runtime invariant held, 1 invariant
violation or failed validation, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2
SCENARIOS = Path(__file__).resolve().parent / "data" / "scenarios"

# preset -> (plant or "bench", [(output column, source column or bench kind)])
PRESETS = {
    "fig7": ("pendulum", [("time_s", "time_s"), ("mode", "mode"), ("theta_p", "theta_p"), ("alpha_a", "alpha_a"),
                          ("index", "index_or_zone"), ("hp_u", "hp_u"), ("applied_u", "applied_u")]),
    "fig8": ("rover", [("time", "time_s"), ("front_distance", "d_front"), ("commanded_v", "requested_v"),
                       ("actual_v", "v"), ("applied_v", "applied_v"), ("zone", "index_or_zone")]),
    "fig9": ("rover", [("time", "time_s"), ("commanded_v", "hp_v"), ("commanded_omega", "hp_omega"),
                       ("x", "x"), ("y", "y"), ("goal", "goal")]),
    "fig10": ("rover", [("time", "time_s"), ("commanded_v", "hp_v"), ("applied_v", "applied_v"),
                        ("front_distance", "d_front"), ("x", "x"), ("y", "y"), ("mode", "mode"),
                        ("zone", "index_or_zone")]),
    "fig11a": ("bench", "roundtrip"),
    "fig11b": ("bench", "safe_step"),
}


class UsageError(Exception):
    pass


def _timed(spec: str, what: str):
    t, sep, rest = spec.partition(":")
    if not sep:
        raise UsageError(f"{what}: expected T:VALUE, got {spec!r}")
    try:
        return float(t), rest
    except ValueError:
        raise UsageError(f"{what}: bad time in {spec!r}") from None


def _floats(text: str, what: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{what}: bad number list {text!r}") from None


def _note(overrides: list, msg: str) -> None:
    overrides.append(msg)
    print(f"override: {msg}", file=sys.stderr)


def _load_scenario(path, plant: str):
    from .sim.scenario import load_scenario

    sc = load_scenario(path or SCENARIOS / f"{plant}_nominal.yaml")
    if sc.plant != plant:
        raise UsageError(f"scenario is for the {sc.plant} plant")
    return sc


def _apply_common(sc, args, overrides):
    if args.seed is not None:
        sc.seed = args.seed
        _note(overrides, f"seed={args.seed}")
    if args.duration is not None:
        sc.duration = args.duration
        _note(overrides, f"duration={args.duration}")
    for key in ("weights", "cert", "map", "params"):
        val = getattr(args, key, None)
        if val is not None:
            if not Path(val).exists():
                raise UsageError(f"{key} file not found: {val}")
            sc.plant_config[key] = val
            _note(overrides, f"{key}={val}")


def _add_events(sc, extra: list):
    from .sim.scenario import Event, EventScript

    evs = list(sc.events.events) + [Event(float(t), kind, args) for t, kind, args in extra]
    sc.events = EventScript(evs)


def _stall_events(specs, period_s: float, overrides):
    out = []
    for spec in specs or []:
        t, n = _timed(spec, "--stall-rich")
        try:
            periods = int(n)
        except ValueError:
            raise UsageError(f"--stall-rich: bad period count in {spec!r}") from None
        out.append((t, "stall_rich_domain", {"duration": round(periods * period_s, 6)}))
        _note(overrides, f"stall rich domain at {t} s for {periods} Control periods")
    return out


def _finish_run(sc, log, args, overrides) -> int:
    from .runner import run_dir, write_run

    log.meta["overrides"] = overrides
    out = run_dir(sc, args.out)
    rep = write_run(log, out)
    print(f"run directory: {out}")
    print(f"seed={rep.seed} scenario={rep.scenario_hash[:12]} records={rep.records} switches={rep.mode_switches} "
          f"safety_stops={rep.safety_stops} collisions={rep.collisions} deadline_misses={rep.deadline_misses}")
    for s in rep.switches:
        print(f"  t={s[0]:.3f}s {s[1]} -> {s[2]} ({s[3]})")
    if rep.plant == "rover":
        print(f"goal_reached={rep.goal_reached} min_clearance={rep.min_clearance}")
    for v in rep.violations[:20]:
        print(f"VIOLATION {v}")
    return EXIT_OK if rep.ok else EXIT_VIOLATION


# --- commands -----------------------------------------------------------------


def cmd_run_pendulum(args) -> int:
    from .pendulum.runtime import load_setup, run_pendulum

    sc = _load_scenario(args.scenario, "pendulum")
    overrides = []
    _apply_common(sc, args, overrides)
    extra = []
    for spec in args.disturb or []:
        t, mag = _timed(spec, "--disturb")
        vals = _floats(mag, "--disturb")
        value = [0.0, 0.0, vals[0], 0.0] if len(vals) == 1 else vals
        if len(value) != 4:
            raise UsageError("--disturb takes one value (pendulum rate kick) or four state offsets")
        extra.append((t, "disturbance", {"value": value}))
        _note(overrides, f"disturbance at {t} s: {value}")
    extra += _stall_events(args.stall_rich, 0.004, overrides)
    _add_events(sc, extra)
    if args.predict is not None:
        sc.policy["predict"] = args.predict == "on"
        _note(overrides, f"predict={args.predict}")
    setup = load_setup(sc.plant_config)
    if setup.policy is None:
        raise UsageError("no high-performance weights configured")
    return _finish_run(sc, run_pendulum(sc, setup), args, overrides)


def _tty_ack(t: float) -> bool:
    import termios
    import tty

    print(f"\n[t={t:.1f} s] safety stop latched; press any key to acknowledge", file=sys.stderr, flush=True)
    fd = sys.stdin.fileno()
    old = termios.tcgetattr(fd)
    try:
        tty.setcbreak(fd)
        sys.stdin.read(1)
    finally:
        termios.tcsetattr(fd, termios.TCSADRAIN, old)
    return True


def cmd_run_rover(args) -> int:
    from .rover.runtime import load_setup, run_rover

    sc = _load_scenario(args.scenario, "rover")
    overrides = []
    _apply_common(sc, args, overrides)
    if args.eta is not None:
        if not args.eta > 0:
            raise UsageError("--eta must be > 0")
        sc.plant_config["eta"] = args.eta
        _note(overrides, f"eta={args.eta}")
    extra = []
    for spec in args.obstacle or []:
        t, pose = _timed(spec, "--obstacle")
        p = _floats(pose, "--obstacle")
        if len(p) not in (2, 3):
            raise UsageError("--obstacle pose is X,Y or X,Y,THETA")
        extra.append((t, "spawn_obstacle", {"pose": p, "size": args.obstacle_size, "frame": args.obstacle_frame}))
        _note(overrides, f"obstacle at {t} s pose={p} frame={args.obstacle_frame}")
    for t in args.ack or []:
        extra.append((t, "operator_ack", {}))
        _note(overrides, f"operator ack at {t} s")
    extra += _stall_events(args.stall_rich, 0.1, overrides)
    _add_events(sc, extra)
    setup = load_setup(sc.plant_config)
    if setup.policy is None:
        raise UsageError("no high-performance weights configured")
    if args.interactive_ack and sys.stdin.isatty():
        setup.ack_prompt = _tty_ack
    return _finish_run(sc, run_rover(sc, setup), args, overrides)


def cmd_validate_zones(args) -> int:
    from .rover.plant import DriveParams
    from .rover.safety import SafetyZones
    from .rover.validate import validate_zones
    from .rover.world import load_map

    speeds = args.speed or [3.0]
    vmax = DriveParams().v_max
    if any(not 0 < v <= vmax for v in speeds):
        raise UsageError(f"--speed must be in (0, {vmax}] m/s")
    zones = SafetyZones()
    if args.halve:
        zones = zones.scaled(0.5)
    course = load_map(args.map) if args.map else None
    checks = validate_zones(zones, speeds, args.phases, course)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = []
    for c in checks:
        print(c.line("halved" if args.halve else "shipped"))
        name = out / f"fig8_v{c.speed:g}"
        c.log.write(name)
        summary.append({"speed": c.speed, "passed": c.safe, "final_clearance": c.worst,
                        "collisions": int(sum(c.collisions)), "zone_entry_s": c.zone_entry,
                        "zones": {"front": list(zones.front), "lateral": list(zones.lateral)},
                        "telemetry": name.with_suffix(".jsonl").name})
    (out / "zones_report.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    ok = all(c.safe for c in checks)
    print("validation PASSED" if ok else "validation FAILED")
    return EXIT_OK if ok else EXIT_VIOLATION


def _roa_inputs(args):
    from .pendulum.control import linearize, pole_place
    from .pendulum.params import default_params_path, load_params

    p = load_params(args.params or default_params_path())
    A, B = linearize(p)
    poles = _floats(args.poles, "--poles") if args.poles else (-6.0, -7.0, -8.0, -9.0)
    return p, pole_place(A, B, tuple(poles))


def cmd_estimate_roa(args) -> int:
    from .pendulum.roa import RoaError, RoaOptions, estimate_roa

    p, g = _roa_inputs(args)
    opts = RoaOptions(grid=args.grid, robust_perturb=args.perturb, margin=args.margin)
    try:
        cert = estimate_roa(p, g, opts)
    except RoaError as e:
        print(f"estimation failed: {e}", file=sys.stderr)
        return EXIT_VIOLATION
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    cert.save(args.out)
    print(f"certificate written to {args.out} (level {cert.meta['level']})")
    return EXIT_OK


def cmd_validate_roa(args) -> int:
    from .pendulum.roa import EllipsoidCert, validate_roa
    from .pendulum.runtime import DEFAULT_CERT

    p, g = _roa_inputs(args)
    cert = EllipsoidCert.load(args.cert or DEFAULT_CERT)
    if args.inflate != 1.0:
        cert = cert.scaled(1.0 / args.inflate**2)
    rep = validate_roa(cert, p, g, args.perturb, args.grid)
    print(f"boundary_points={rep.boundary_points} parameter_sets={rep.parameter_sets} "
          f"samples={rep.samples_tested} false_positive_count={rep.false_positive_count}")
    print(f"failures_per_set={rep.failures_per_set}")
    return EXIT_OK if rep.passed else EXIT_VIOLATION


def _train_cfg(args, base):
    import dataclasses

    return dataclasses.replace(base, **{k: v for k, v in (("population", args.population),
                                                          ("generations", args.generations),
                                                          ("seed", args.seed), ("sigma0", args.sigma0))
                                        if v is not None})


def cmd_train_pendulum(args) -> int:
    from .neural.mlp import PENDULUM_SPEC
    from .neural.train import DESK_PENDULUM, FULL_PENDULUM, train_pendulum, write_outputs

    cfg = _train_cfg(args, FULL_PENDULUM if args.full_scale else DESK_PENDULUM)
    res = train_pendulum(cfg, args.env_seed, args.episodes, verbose=not args.quiet)
    path = write_outputs(args.out, "pendulum", PENDULUM_SPEC, res, cfg,
                         {"env_seed": args.env_seed, "episodes": args.episodes, "init": "handover"})
    print(f"best fitness {res.best_fitness:.2f}; weights written to {path}")
    return EXIT_OK


def cmd_train_rover(args) -> int:
    from .neural.mlp import ROVER_SPEC
    from .neural.train import DESK_ROVER, train_rover, write_outputs

    cfg = _train_cfg(args, DESK_ROVER)
    res = train_rover(cfg, args.env_seed, args.courses, verbose=not args.quiet, zones=not args.no_zones)
    path = write_outputs(args.out, "rover", ROVER_SPEC, res, cfg,
                         {"env_seed": args.env_seed, "n_courses": args.courses, "zones": not args.no_zones})
    print(f"best fitness {res.best_fitness:.2f}; weights written to {path}")
    return EXIT_OK


def cmd_bench_ipc(args) -> int:
    from .ipc.bench import bench_roundtrip

    if args.n < 1 or args.size < 1:
        raise UsageError("-n and --size must be >= 1")
    stats = bench_roundtrip(args.n, args.size, args.bin_width)
    print(f"roundtrip n={args.n} size={args.size} min={stats.min:.2f}us p50={stats.p50:.2f}us "
          f"p99={stats.p99:.2f}us max={stats.max:.2f}us", file=sys.stderr)
    samples = [{"bench": "roundtrip", "size": args.size, "samples_us": stats.samples_us.tolist()}]
    if args.safe_node:
        from .rover.runtime import bench_safe_step

        s2 = bench_safe_step(args.safe_node)
        print(f"safe_step n={args.safe_node} min={s2.min:.2f}us p50={s2.p50:.2f}us max={s2.max:.2f}us",
              file=sys.stderr)
        samples.append({"bench": "safe_step", "samples_us": s2.samples_us.tolist()})
    if args.out is None:
        sys.stdout.write(stats.histogram_csv())
        return EXIT_OK
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "ipc_roundtrip.csv").write_text(stats.histogram_csv())
    (out / "bench_samples.jsonl").write_text("".join(json.dumps(s) + "\n" for s in samples))
    print(f"histogram written to {out / 'ipc_roundtrip.csv'}")
    return EXIT_OK


def _export_bench(path, kind: str, bin_width: float) -> str:
    from .ipc.bench import latency_stats

    for line in Path(path).read_text().splitlines():
        obj = json.loads(line)
        if obj.get("bench") == kind:
            return latency_stats(obj["samples_us"], bin_width).histogram_csv()
    raise UsageError(f"{path} holds no {kind} samples (run bench-ipc with --out{' and --safe-node' * (kind == 'safe_step')})")


def export_table(log, columns: list, fmt: str, names: list | None = None) -> str:
    """Selected telemetry columns as CSV or JSON lines (header-only / empty for an empty log)."""
    cols = log.columns()
    missing = [c for c in columns if c not in cols]
    if missing:
        raise UsageError(f"unknown columns {missing}; available: {cols}")
    idx = [cols.index(c) for c in columns]
    names = names or columns
    rows = [[row[i] for i in idx] for row in log.rows()]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(names)
        w.writerows(rows)
        return buf.getvalue()
    return "".join(json.dumps(dict(zip(names, r))) + "\n" for r in rows)


def cmd_export(args) -> int:
    from .sim.telemetry import read_jsonl

    if args.preset is not None and args.preset not in PRESETS:
        raise UsageError(f"unknown preset {args.preset!r}; choose from {sorted(PRESETS)}")
    if not Path(args.telemetry).exists():
        raise UsageError(f"no such file: {args.telemetry}")
    if args.preset and PRESETS[args.preset][0] == "bench":
        text = _export_bench(args.telemetry, PRESETS[args.preset][1], args.bin_width)
    else:
        log = read_jsonl(args.telemetry)
        if args.preset:
            plant, spec = PRESETS[args.preset]
            if log.plant != plant:
                raise UsageError(f"preset {args.preset} needs a {plant} log, got {log.plant}")
            names, columns = [s[0] for s in spec], [s[1] for s in spec]
        else:
            columns = args.columns.split(",") if args.columns else log.columns()
            names = None
        text = export_table(log, columns, args.format, names)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dualsimplex", description="Dual-domain Simplex simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    def run_common(p, plant):
        p.add_argument("scenario", nargs="?", help=f"scenario YAML (default: packaged {plant}_nominal.yaml)")
        p.add_argument("--seed", type=int)
        p.add_argument("--duration", type=float, help="seconds")
        p.add_argument("--weights")
        p.add_argument("--stall-rich", action="append", metavar="T:N", help="stall the rich domain N Control periods")
        p.add_argument("--out", default="runs", help="root of the run directories")

    p = sub.add_parser("run-pendulum", help="closed-loop pendulum run")
    run_common(p, "pendulum")
    p.add_argument("--cert")
    p.add_argument("--params")
    p.add_argument("--disturb", action="append", metavar="T:MAG", help="kick dtheta_p by MAG rad/s at T s")
    p.add_argument("--predict", choices=("on", "off"))
    p.set_defaults(fn=cmd_run_pendulum)

    p = sub.add_parser("run-rover", help="closed-loop rover run")
    run_common(p, "rover")
    p.add_argument("--map")
    p.add_argument("--eta", type=float, help="attack factor on the network output")
    p.add_argument("--obstacle", action="append", metavar="T:X,Y[,TH]")
    p.add_argument("--obstacle-size", type=float, default=0.4)
    p.add_argument("--obstacle-frame", choices=("world", "rover"), default="world")
    p.add_argument("--ack", action="append", type=float, metavar="T")
    p.add_argument("--interactive-ack", action="store_true", help="prompt for a keypress on each safety stop")
    p.set_defaults(fn=cmd_run_rover)

    p = sub.add_parser("validate-zones", help="constant-speed stopping test")
    p.add_argument("--map", help="drive straight from this map's start pose (default: straight corridor)")
    p.add_argument("--speed", type=float, action="append")
    p.add_argument("--halve", action="store_true", help="halve every zone threshold")
    p.add_argument("--phases", type=int, default=21)
    p.add_argument("--out", default="runs/validate-zones")
    p.set_defaults(fn=cmd_validate_zones)

    for name, fn in (("estimate-roa", cmd_estimate_roa), ("validate-roa", cmd_validate_roa)):
        p = sub.add_parser(name)
        p.add_argument("--params")
        p.add_argument("--poles", help="comma separated closed-loop poles")
        p.add_argument("--perturb", type=float, default=0.05)
        p.set_defaults(fn=fn)
    est, val = sub.choices["estimate-roa"], sub.choices["validate-roa"]
    est.add_argument("--grid", type=float, default=0.2)
    est.add_argument("--margin", type=float, default=0.02)
    est.add_argument("--out", default="runs/pendulum_cert.txt")
    val.add_argument("--grid", type=float, default=0.05)
    val.add_argument("--cert")
    val.add_argument("--inflate", type=float, default=1.0, help="scale the certified radius (testing)")

    for name, fn in (("train-pendulum", cmd_train_pendulum), ("train-rover", cmd_train_rover)):
        p = sub.add_parser(name)
        p.add_argument("--population", type=int)
        p.add_argument("--generations", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--sigma0", type=float)
        p.add_argument("--env-seed", type=int, default=0)
        p.add_argument("--out", default=f"runs/{name}")
        p.add_argument("--quiet", action="store_true")
        p.set_defaults(fn=fn)
    sub.choices["train-pendulum"].add_argument("--episodes", type=int, default=8)
    sub.choices["train-pendulum"].add_argument("--full-scale", action="store_true", help="population 50, 250 generations")
    sub.choices["train-rover"].add_argument("--courses", type=int, default=8)
    sub.choices["train-rover"].add_argument("--no-zones", action="store_true")

    p = sub.add_parser("bench-ipc", help="inter-domain round-trip latency")
    p.add_argument("-n", type=int, default=10000)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--bin-width", type=float, default=1.0)
    p.add_argument("--safe-node", type=int, default=0, metavar="N", help="also time N safe Control steps")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_bench_ipc)

    p = sub.add_parser("export", help="plot-ready data from telemetry or benchmark samples")
    p.add_argument("telemetry")
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--columns")
    p.add_argument("--preset")
    p.add_argument("--bin-width", type=float, default=1.0)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_export)
    return ap


def main(argv=None) -> int:
    from .neural.weights import WeightFileError
    from .sim.scenario import ScenarioError

    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    try:
        return args.fn(args)
    except (UsageError, ScenarioError, WeightFileError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
