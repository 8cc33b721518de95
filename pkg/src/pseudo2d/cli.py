"""Command-line front end.

Exit codes: 0 success, 2 invalid input, 3 infeasible frequency plan,
4 numerical failure (integrator, eigen-branch identification, fit).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import czgate, freqalloc, layout as lay, resonator, svg

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_NUMERICAL = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INVALID):
        super().__init__(message)
        self.code = code


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _write(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(path).write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")


def _load_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from exc


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_layout(args: argparse.Namespace) -> int:
    spec = lay.SurfaceCodeSpec(d=args.d, N=args.n, encoding=args.encoding)
    grid = lay.build_grid(spec)
    out = grid if args.no_fold else lay.fold(grid)
    summary = lay.resource_estimate(spec)
    rows = [
        ("d", spec.d), ("N", spec.N), ("encoding", spec.encoding.value),
        ("M", summary.M), ("columns", summary.columns),
        ("total_qubits", summary.total_qubits),
        ("qubits_per_logical_block", summary.qubits_per_logical_block),
        ("max_airbridges_per_resonator", summary.max_airbridges_per_resonator),
        ("resonators", len(out.resonators)),
    ]
    width = max(len(k) for k, _ in rows)
    print("\n".join(f"{k:<{width}}  {v}" for k, v in rows))
    if args.out:
        _write(out.to_json(), args.out)
    if args.svg:
        _write(svg.emit_svg(out), args.svg)
    return EXIT_OK


def cmd_freqalloc(args: argparse.Namespace) -> int:
    layout = lay.PhysicalLayout.from_dict(_load_json(args.layout))
    graph = freqalloc.crossing_graph(layout)
    if args.check:
        plan = freqalloc.FrequencyPlan.from_dict(_load_json(args.check))
        violations = freqalloc.verify(plan, graph)
        print(f"{len(violations)} violations")
        for i, j, gap in violations:
            print(f"  resonators {i} and {j} cross with only {gap / 1e6:.4f} MHz separation")
        return EXIT_OK if not violations else EXIT_INFEASIBLE
    plan = freqalloc.allocate(graph, (args.band_min_hz, args.band_max_hz), args.delta_min_hz)
    violations = freqalloc.verify(plan, graph)
    if violations:
        raise CliError(f"internal error: allocated plan has {len(violations)} violations", EXIT_NUMERICAL)
    print(
        f"assigned {len(plan.assignment)} resonators, "
        f"{len(set(plan.assignment.values()))} distinct frequencies, 0 violations"
    )
    _write(plan.to_json(), args.out)
    return EXIT_OK


def _device_params(args: argparse.Namespace) -> czgate.DeviceParams:
    if args.params:
        return czgate.DeviceParams.from_json_dict(_load_json(args.params))
    return czgate.reference_device()


def cmd_czsweep(args: argparse.Namespace) -> int:
    params = _device_params(args)
    q_values = list(args.q) if args.q else None
    if args.kappa_per_s is not None:
        if q_values is None:
            q_values = [params.omega_r / args.kappa_per_s if args.kappa_per_s > 0 else math.inf]
        for q in q_values:
            # validation happens in DeviceParams
            czgate.DeviceParams(**{**params.__dict__, "Q_i": q, "kappa": args.kappa_per_s})
    if q_values is None:
        q_values = list(czgate.DEFAULT_Q_GRID)
    if any(not q > 0 for q in q_values):
        raise CliError("quality factors must be positive")

    if args.t_gate_s is not None:
        tuned, shift = (params, 0.0) if args.no_tune else czgate.tune_to_cz(params)
        g_eff = czgate.estimate_g_eff(tuned)
        calib = czgate.Calibration(tuned, shift, g_eff, czgate.gate_time(g_eff), args.t_gate_s, math.nan)
    else:
        calib = czgate.calibrate(params, tune=not args.no_tune, q_factor=args.calib_q)
    points, calib = czgate.q_sweep(params, q_values, calibration=calib)
    _write(czgate.sweep_to_csv(points), args.out)

    info = calib.summary()
    print(f"omega1 shift to dressed CZ resonance: {info['omega1_shift_hz'] / 1e6:.4f} MHz")
    print(f"g_eff/2pi: {info['g_eff_hz'] / 1e6:.4f} MHz, nominal gate time {info['t_nominal_s'] * 1e9:.3f} ns")
    print(f"calibrated gate time: {info['t_gate_s'] * 1e9:.3f} ns")
    crossing = czgate.threshold_crossing(points)
    monotone = czgate.is_nonincreasing(points)
    if crossing is not None:
        label = f"{crossing:.4g}"
    elif all(p.infidelity < czgate.SURFACE_CODE_THRESHOLD for p in points):
        label = "not bracketed (below threshold at every sampled Q)"
    else:
        label = "not bracketed (above threshold at every sampled Q)"
    print(f"Q at which corrected infidelity crosses {czgate.SURFACE_CODE_THRESHOLD:.2%}: {label}")
    print(f"corrected infidelity nonincreasing in Q: {monotone}")
    if args.params_out:
        _write(json.dumps(calib.params.to_json_dict(), indent=2), args.params_out)
    return EXIT_OK


def cmd_fitres(args: argparse.Namespace) -> int:
    trace = resonator.read_trace(args.trace)
    fit = resonator.fit_resonance(trace)
    out = fit.to_dict()
    if args.power_dbm is not None:
        p = resonator.dbm_to_watts(args.power_dbm)
        out["power_dbm"] = args.power_dbm
        out["avg_photon_number"] = resonator.avg_photon_number(fit, p)
        out["photon_number_convention"] = "2 Q_l^2 P / (|Q_c| hbar omega_r^2)"
    _write(json.dumps(out, indent=2), args.out)
    return EXIT_OK


def cmd_crosstalk(args: argparse.Namespace) -> int:
    res = resonator.crosstalk_spectrum(resonator.read_trace(args.trace))
    out = res.to_dict()
    if not args.full:
        out.pop("freq")
        out.pop("crosstalk_db")
    _write(json.dumps(out, indent=2), args.out)
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    f_r = args.f_r_hz
    if args.kind == "notch":
        q_l = 1.0 / (1.0 / args.q_i + math.cos(args.phi) / args.q_c_mag)
        half = args.span_linewidths * f_r / q_l
        freqs = np.linspace(f_r - half, f_r + half, args.points)
        trace = resonator.synthetic_trace(
            freqs, f_r, q_l, args.q_c_mag, args.phi, args.a, args.alpha, args.tau_s,
            snr_db=args.snr_db, rng=args.seed,
        )
    else:
        freqs = np.linspace(f_r - 25 * args.width_hz, f_r + 25 * args.width_hz, args.points)
        trace = resonator.dip_trace(freqs, f_r, args.depth, args.width_hz)
    if args.out in (None, "-"):
        trace.to_csv(sys.stdout)
    else:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            trace.to_csv(fh)
    print(f"seed: {args.seed}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pseudo2d", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file with default values for the chosen command")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("layout", help="synthesise a surface-code grid and fold it")
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--encoding", choices=[e.value for e in lay.Encoding], default="square")
    p.add_argument("--no-fold", action="store_true", help="emit the pre-fold grid")
    p.add_argument("--out", help="layout JSON path")
    p.add_argument("--svg", help="SVG path")
    p.set_defaults(func=cmd_layout)

    p = sub.add_parser("freqalloc", help="assign resonator frequencies to a folded layout")
    p.add_argument("--layout", required=True, help="folded layout JSON")
    p.add_argument("--band-min-hz", type=float, default=7.0e9)
    p.add_argument("--band-max-hz", type=float, default=10.2e9)
    p.add_argument("--delta-min-hz", type=float, default=freqalloc.DEFAULT_DELTA_MIN_HZ)
    p.add_argument("--check", help="verify an existing plan JSON instead of allocating")
    p.add_argument("--out", help="plan JSON path (default stdout)")
    p.set_defaults(func=cmd_freqalloc)

    p = sub.add_parser("czsweep", help="CZ infidelity versus resonator quality factor")
    p.add_argument("--params", help="device JSON (frequencies in Hz); default reference device")
    p.add_argument("--q", type=_float_list, help="comma-separated quality factors")
    p.add_argument("--kappa-per-s", type=float, help="photon loss rate; must equal omega_r/Q")
    p.add_argument("--calib-q", type=float, default=czgate.CALIBRATION_Q)
    p.add_argument("--t-gate-s", type=float, help="skip calibration and use this gate time")
    p.add_argument("--no-tune", action="store_true", help="keep the bare CZ condition for qubit 1")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.add_argument("--params-out", help="write calibrated device JSON here")
    p.set_defaults(func=cmd_czsweep)

    p = sub.add_parser("fitres", help="fit a notch resonator trace")
    p.add_argument("--trace", required=True, help="CSV frequency_hz,s21_re,s21_im")
    p.add_argument("--power-dbm", type=float, help="input power for the photon-number estimate")
    p.add_argument("--out", help="JSON path (default stdout)")
    p.set_defaults(func=cmd_fitres)

    p = sub.add_parser("crosstalk", help="crosstalk spectrum 20 log10(1 - |S21|)")
    p.add_argument("--trace", required=True)
    p.add_argument("--full", action="store_true", help="include the per-point spectrum")
    p.add_argument("--out", help="JSON path (default stdout)")
    p.set_defaults(func=cmd_crosstalk)

    p = sub.add_parser("synth-trace", help="write a synthetic S21 trace")
    p.add_argument("--kind", choices=["notch", "dip"], default="notch")
    p.add_argument("--f-r-hz", type=float, default=10.1326e9)
    p.add_argument("--q-i", type=float, default=2.3e4)
    p.add_argument("--q-c-mag", type=float, default=3.141e5)
    p.add_argument("--phi", type=float, default=0.0)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--tau-s", type=float, default=0.0)
    p.add_argument("--span-linewidths", type=float, default=10.0)
    p.add_argument("--depth", type=float, default=3.548e-3, help="dip depth 1 - |S21|")
    p.add_argument("--width-hz", type=float, default=10e6, help="dip FWHM")
    p.add_argument("--points", type=int, default=2001)
    p.add_argument("--snr-db", type=float, help="add noise at this SNR")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_synth)
    return parser


def _subparsers(parser: argparse.ArgumentParser) -> dict[str, argparse.ArgumentParser]:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return dict(action.choices)
    return {}


def _apply_config(parser: argparse.ArgumentParser, argv: list[str] | None) -> argparse.Namespace:
    """Parse ``argv``; values from ``--config`` replace defaults, explicit flags still win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if not known.config:
        return parser.parse_args(argv)
    config = _load_json(known.config)
    if not isinstance(config, dict):
        raise CliError(f"{known.config}: top level must be an object")
    subs = _subparsers(parser)
    command = next((tok for tok in rest if tok in subs), None)
    if command is None:
        return parser.parse_args(argv)
    subparser = subs[command]
    dests = {a.dest: a for a in subparser._actions if a.dest not in ("help", "func")}
    unknown = sorted(set(config) - set(dests))
    if unknown:
        raise CliError(f"{known.config}: unknown keys for '{command}': {unknown}")
    defaults = {}
    for key, value in config.items():
        action = dests[key]
        if value is not None and action.type is _float_list:
            value = [float(v) for v in value] if isinstance(value, list) else _float_list(str(value))
        elif value is not None and action.type is not None:
            try:
                value = action.type(value)
            except (TypeError, ValueError) as exc:
                raise CliError(f"{known.config}: bad value for {key}: {exc}") from exc
        if action.choices is not None and value not in action.choices:
            raise CliError(f"{known.config}: {key} must be one of {list(action.choices)}")
        defaults[key] = value
        action.required = False
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        return args.func(args)
    except SystemExit as exc:  # argparse usage errors
        return EXIT_INVALID if exc.code not in (0, None) else EXIT_OK
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except freqalloc.InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        print(json.dumps(exc.certificate, indent=2, default=str), file=sys.stderr)
        return EXIT_INFEASIBLE
    except (czgate.IntegrationError, czgate.ManifoldError, resonator.FitError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:  # includes layout.ValidationError
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
