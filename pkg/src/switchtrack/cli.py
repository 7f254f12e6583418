"""Command-line entry point.

Subcommands: ``simulate`` (run a scenario and write CSV/JSON outputs),
``dwell`` (stand-alone dwell-time calculator), ``trajectory`` (sample the
switching reference from a run), ``metrics`` (recompute the summary tables
from a run directory). All outputs are plain CSV/JSON; plotting is left to
external tools.

Exit codes: 0 ok, 2 configuration error, 3 numeric fault, 4 monitor or
re-entry failure.
"""

import argparse
import json
import sys
from pathlib import Path

from . import engine, scenario as scen, supervisor
from .errors import ConfigurationError, NumericFaultError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_MONITOR = 4


def _parse_seeds(expr: str) -> list[int]:
    if ":" in expr:
        lo, hi = expr.split(":", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(s) for s in expr.split(",") if s]


def _write_outputs(log, outdir: Path, decimate: int) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    engine.write_sim_csv(log, outdir / "sim.csv", decimate=decimate)
    engine.write_events_csv(log, outdir / "events.csv")
    engine.write_cycles_csv(log, outdir / "cycles.csv")
    metrics = engine.log_metrics(log)
    payload = metrics.to_dict()
    payload["derived"] = log.scenario.derived()
    payload["seed"] = log.seed
    payload["monitor_violations"] = len(log.monitor.violations)
    payload["clamp_count"] = log.clamp_count
    payload["graze_count"] = log.graze_count
    payload["failed"] = log.failed
    with open(outdir / "metrics.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    echo = scen.to_dict(log.scenario)
    echo["seed"] = log.seed  # the echo reproduces this exact run
    with open(outdir / "scenario.json", "w", encoding="utf-8") as fh:
        json.dump(echo, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _cmd_simulate(args) -> int:
    sc = scen.load_scenario(preset=args.preset, config_path=args.config)
    if args.duration is not None:
        sc.duration = float(args.duration)
    for line in sc.echo_lines():
        print(line)
    seeds = _parse_seeds(args.seeds) if args.seeds else [args.seed if args.seed is not None else sc.seed]
    out_root = Path(args.out)
    worst = EXIT_OK
    for seed in seeds:
        outdir = out_root / f"seed-{seed}" if len(seeds) > 1 else out_root
        log = engine.run(sc, seed=seed)
        _write_outputs(log, outdir, args.decimate)
        metrics = engine.log_metrics(log)
        status = "ok"
        if log.fault_step is not None:
            status = f"numeric fault at step {log.fault_step}"
            worst = max(worst, EXIT_NUMERIC)
        elif log.failed:
            status = f"failed: {log.failed}"
            worst = max(worst, EXIT_MONITOR)
        elif log.monitor.violations:
            status = f"{len(log.monitor.violations)} monitor violation(s)"
            worst = max(worst, EXIT_MONITOR)
        ratio = f"{metrics.dwell_ratio:.3g}" if metrics.dwell_ratio else "-"
        print(
            f"seed {seed}: {log.t.shape[0] - 1} steps, "
            f"{metrics.n_complete_cycles} complete cycle(s), dwell ratio {ratio}, "
            f"{status} -> {outdir}"
        )
    return worst


def _cmd_dwell(args) -> int:
    lam_s = args.lambda_s
    lam_u = args.lambda_u
    if args.k1 is not None and args.k2 is not None and args.c is not None:
        rates = supervisor.compute_rates(
            args.k1 * _eye1(), args.k2 * _eye1(), args.c
        )
        lam_s = rates.lambda_s if lam_s is None else lam_s
        lam_u = rates.lambda_u if lam_u is None else lam_u
        print(f"lambda_s = {rates.lambda_s!r} 1/s")
        print(f"lambda_u = {rates.lambda_u!r} 1/s")
    v_t = args.V_T if args.V_T is not None else (args.z_threshold / 2.0) ** 2 if args.z_threshold else None
    v_m = args.V_M if args.V_M is not None else (args.z_max / 2.0) ** 2 if args.z_max else None
    if args.V_entry is not None:
        if v_t is None or lam_s is None:
            raise ConfigurationError("minimum dwell needs --V-T (or --z-threshold) and --lambda-s (or gains)")
        budget = supervisor.LyapunovBudget.from_z(
            2.0 * (v_m or max(args.V_entry, v_t * 4.0)) ** 0.5, 2.0 * v_t**0.5
        )
        rates = supervisor.Rates(lam_s, lam_u or 1.0, args.c or 0.0, 0.0, 0.0)
        value = supervisor.min_dwell(args.V_entry, budget, rates, args.alpha)
        print(f"min_dwell = {value!r} s")
    if args.V_exit is not None and args.e2_norm is None:
        if v_m is None or lam_u is None or args.d_bar is None:
            raise ConfigurationError("maximum dwell needs --V-M (or --z-max), --lambda-u (or gains), --d-bar")
        budget = supervisor.LyapunovBudget.from_z(2.0 * v_m**0.5, v_m**0.5)
        rates = supervisor.Rates(lam_s or 1.0, lam_u, args.c or 0.0, 0.0, 0.0)
        value = supervisor.max_dwell(args.V_exit, budget, rates, args.d_bar)
        print(f"max_dwell = {value!r} s")
    if args.V_exit is not None and args.e2_norm is not None:
        if v_m is None or args.d_bar is None:
            raise ConfigurationError("integrator maximum dwell needs --V-M (or --z-max) and --d-bar")
        value = supervisor.max_dwell_single_integrator(args.V_exit, args.e2_norm, v_m, args.d_bar)
        print(f"max_dwell_integrator = {value!r} s")
    return EXIT_OK


def _eye1():
    import numpy as np

    return np.eye(1)


def _cmd_trajectory(args) -> int:
    sc = scen.load_scenario(preset=args.preset, config_path=args.config)
    if args.duration is not None:
        sc.duration = float(args.duration)
    log = engine.run(sc, seed=args.seed if args.seed is not None else sc.seed)
    n = log.xbar.shape[1]
    out = sys.stdout if args.out == "-" else open(args.out, "w", encoding="utf-8", newline="\n")
    try:
        cols = ["t"] + [f"xbar{i + 1}" for i in range(n)] + [f"xbardot{i + 1}" for i in range(n)]
        out.write(",".join(cols) + "\n")
        for k in range(0, log.t.shape[0], max(1, args.decimate)):
            parts = [repr(float(log.t[k]))]
            parts += [repr(float(v)) for v in log.xbar[k]]
            parts += [repr(float(v)) for v in log.xbar_dot[k]]
            out.write(",".join(parts) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def _cmd_metrics(args) -> int:
    run_dir = Path(args.run)
    cycles_path = run_dir / "cycles.csv"
    if not cycles_path.exists():
        raise ConfigurationError(f"no cycles.csv under {run_dir}")
    from .trajectory import CyclePlan

    cycles = []
    with open(cycles_path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("i,t_entry"):
            raise ConfigurationError(f"unrecognized cycles.csv header in {cycles_path}")
        for line in fh:
            cells = line.rstrip("\n").split(",")
            plan = CyclePlan(
                index=int(cells[0]),
                t_entry=float(cells[1]),
                v_entry=float(cells[2]),
                dt_available=float(cells[3]),
                intermediate_scale=1.0,
            )
            if cells[4]:
                plan.t_depart = float(cells[4])
                plan.v_depart = float(cells[5])
                plan.dt_denied = float(cells[6])
                plan.t_part1 = float(cells[7])
                plan.t_part2 = float(cells[8])
                plan.t_part3 = float(cells[9])
            cycles.append(plan)
    sim_path = run_dir / "sim.csv"
    total = 0.0
    if sim_path.exists():
        with open(sim_path, "r", encoding="utf-8") as fh:
            fh.readline()
            first = last = None
            for line in fh:
                if first is None:
                    first = line
                last = line
        if first and last:
            total = float(last.split(",", 1)[0]) - float(first.split(",", 1)[0])
    metrics = engine.compute_metrics(cycles, total)
    print(json.dumps(metrics.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="switchtrack",
        description="Path following with intermittent state feedback: simulator and dwell-time tools",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a closed-loop scenario and write outputs")
    sim.add_argument("--preset", choices=sorted(scen.PRESETS), help="embedded scenario preset")
    sim.add_argument("--config", help="JSON scenario file (overrides preset keys)")
    sim.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    sim.add_argument("--seeds", help="run several seeds: 'a:b' inclusive or comma list")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--decimate", type=int, default=1, help="write every k-th sample row")
    sim.add_argument("--duration", type=float, default=None, help="override run length (s)")
    sim.set_defaults(func=_cmd_simulate)

    dwell = sub.add_parser("dwell", help="dwell-time calculator")
    dwell.add_argument("--V-entry", dest="V_entry", type=float)
    dwell.add_argument("--V-exit", dest="V_exit", type=float)
    dwell.add_argument("--e2-norm", dest="e2_norm", type=float)
    dwell.add_argument("--V-T", dest="V_T", type=float)
    dwell.add_argument("--V-M", dest="V_M", type=float)
    dwell.add_argument("--z-threshold", dest="z_threshold", type=float)
    dwell.add_argument("--z-max", dest="z_max", type=float)
    dwell.add_argument("--lambda-s", dest="lambda_s", type=float)
    dwell.add_argument("--lambda-u", dest="lambda_u", type=float)
    dwell.add_argument("--k1", type=float)
    dwell.add_argument("--k2", type=float)
    dwell.add_argument("--c", type=float)
    dwell.add_argument("--d-bar", dest="d_bar", type=float)
    dwell.add_argument("--alpha", type=float, default=0.0)
    dwell.set_defaults(func=_cmd_dwell)

    traj = sub.add_parser("trajectory", help="emit sampled reference (t, xbar, xbardot) as CSV")
    traj.add_argument("--preset", choices=sorted(scen.PRESETS))
    traj.add_argument("--config")
    traj.add_argument("--seed", type=int, default=None)
    traj.add_argument("--out", default="-", help="output file, '-' for stdout")
    traj.add_argument("--decimate", type=int, default=1)
    traj.add_argument("--duration", type=float, default=None)
    traj.set_defaults(func=_cmd_trajectory)

    met = sub.add_parser("metrics", help="recompute summary tables from a run directory")
    met.add_argument("--run", required=True, help="directory written by simulate")
    met.set_defaults(func=_cmd_metrics)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericFaultError as exc:
        print(f"numeric fault: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
