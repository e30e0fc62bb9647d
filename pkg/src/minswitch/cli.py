"""Command-line front end: ``minswitch {run,compare,solvability,vdcbound}``.

Exit codes: 0 success, 1 configuration error, 2 simulation abort.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from .core import check_sign_coverage, solvability_scan
from .motor import load_params, min_vdc_for_sign_coverage, motor_system, region_states, vdc_lower_bound
from .sim import ConfigError, SimConfig, SimulationAbort, export_csv, load_config, run_simulation

EXIT_OK, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2


def _config(args) -> SimConfig:
    params = getattr(args, "params", None)
    if args.config is None:
        config = SimConfig()
        if params is not None:
            config = replace(config, params=load_params(params))
        return config
    return load_config(args.config, params_path=params)


def _print_summary(name: str, summary: dict) -> None:
    fields = ", ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in summary.items())
    print(f"{name}: {fields}")


def cmd_run(args) -> int:
    config = _config(args)
    if args.controller:
        config = replace(config, controller=args.controller)
    trace = run_simulation(config)
    export_csv(trace, args.out)
    _print_summary(config.controller, trace.summary())
    return EXIT_OK


def cmd_compare(args) -> int:
    config = _config(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    # both runs share params and the resolved initial state
    config = replace(config, initial=config.initial_state())
    configs = {name: replace(config, controller=name) for name in ("minswitch", "dtc")}
    with ThreadPoolExecutor(max_workers=2) as pool:
        traces = dict(zip(configs, pool.map(run_simulation, configs.values())))
    for name, trace in traces.items():
        export_csv(trace, out / f"{name}.csv")
        _print_summary(name, trace.summary())
    a, b = traces["minswitch"].switch_count, traces["dtc"].switch_count
    ratio = a / b if b else float("inf")
    print(f"switches minswitch={a} dtc={b} ratio={ratio:.4f}")
    return EXIT_OK


def cmd_solvability(args) -> int:
    config = _config(args)
    system = motor_system(config.params)
    states = region_states(args.samples, args.omega_max, args.flux_max, band=args.band, seed=args.seed)
    coverage = solvability_scan(system, None, states)
    tracking = solvability_scan(system, config.spec, states)
    worst = max(min_vdc_for_sign_coverage(config.params, s) for s in states)
    report = {
        "V_DC": config.params.V_DC,
        "sign_coverage": coverage.to_dict(),
        "admissible_nonempty": tracking.to_dict(),
        "min_vdc_for_sign_coverage": worst,
    }
    if args.json:
        print(json.dumps(report, indent=2))
    else:
        for r in (coverage, tracking):
            print(f"{r.condition}: {r.n_pass}/{r.n_samples} pass, {r.n_fail} fail")
        print(f"smallest V_DC covering all sampled states: {worst:.2f} V")
    return EXIT_OK


def cmd_vdcbound(args) -> int:
    config = _config(args)
    bound = vdc_lower_bound(
        config.params, args.omega_max, args.flux_max, n_omega=args.n_omega, n_flux=args.n_flux, band=args.band
    )
    print(f"V_DC lower bound: {bound:.2f} V")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="minswitch", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="INI config file (defaults built in)")
        p.add_argument("--params", type=Path, help="motor parameter file replacing [motor]")

    p = sub.add_parser("run", help="simulate one controller and export the trace")
    common(p)
    p.add_argument("--controller", choices=("minswitch", "dtc"))
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run both controllers from the same initial state")
    common(p)
    p.add_argument("--out-dir", type=Path, required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("solvability", help="sampled solvability check over a state region")
    common(p)
    p.add_argument("--omega-max", type=float, default=50.0)
    p.add_argument("--flux-max", type=float, default=5.0)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--band", type=float, default=0.05, help="rotor/stator flux misalignment band")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_solvability)

    p = sub.add_parser("vdcbound", help="worst-case DC-link voltage bound")
    common(p)
    p.add_argument("--omega-max", type=float, default=50.0)
    p.add_argument("--flux-max", type=float, default=5.0)
    p.add_argument("--n-omega", type=int, default=50)
    p.add_argument("--n-flux", type=int, default=10_000)
    p.add_argument("--band", type=float, default=0.0)
    p.set_defaults(func=cmd_vdcbound)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SimulationAbort as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
