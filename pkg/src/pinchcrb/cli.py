"""pinchcrb command line: crb, sweep, optimize, validate.

Exit codes: 0 success, 1 tolerance failure, 2 validation error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from typing import Callable, Sequence

from . import kernels
from .config import EXAMPLE_CONFIG, ConfigError, RunConfig
from .crb import DegenerateObservationError, closed_form_crb
from .experiments import estimate_slope, run_sweep
from .placement import InfeasibleProblemError, audit_layout, optimize_placement
from .scene import DegenerateGeometryError, InvalidLayoutError
from .serialize import atomic_write, fmt, placement_text, write_sweep
from .sensitivity import observation_jacobian
from .validation import fd_check, fim_check

EXIT_OK, EXIT_TOLERANCE, EXIT_INVALID, EXIT_IO = 0, 1, 2, 3


class _Invalid(Exception):
    pass


# Command-line flags that override config keys: dest -> (section, key, flag).
_OVERRIDES = {
    "freq": ("carrier", "frequency_ghz", "--freq"),
    "rx_mode": ("receiver", "mode", "--rx-mode"),
    "n_elements": ("receiver", "n_elements", "--n-elements"),
    "seed": ("run", "seed", "--seed"),
    "format": ("run", "format", "--format"),
    "range": ("target", "range_m", "--range"),
    "direction_deg": ("target", "direction_deg", "--direction-deg"),
    "samples": ("sweep", "samples", "--samples"),
    "n_values": ("sweep", "n_values", "--n-values"),
    "m_antennas": ("transmitter", "n_antennas", "--m"),
    "restarts": ("placement", "restarts", "--restarts"),
    "fd_configs": ("validate", "fd_configs", "--fd-configs"),
    "fim_configs": ("validate", "fim_configs", "--fim-configs"),
}


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pinchcrb", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s (kernels: {kernels.BACKEND})")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, stochastic=False):
        p.add_argument("--config", help=f"INI file (see {EXAMPLE_CONFIG.name} for every key)")
        p.add_argument("--freq", type=float, help="carrier frequency in GHz")
        p.add_argument("--rx-mode", choices=("exact", "plane-wave"))
        p.add_argument("--n-elements", type=int, help="receive elements N")
        if stochastic:
            p.add_argument("--seed", type=int)
        return p

    p = common(sub.add_parser("crb", help="bounds for one target"))
    p.add_argument("--range", type=float, help="target range in m")
    p.add_argument("--direction-deg", type=float, help="target direction in degrees")
    p.add_argument("--format", choices=("csv", "json"), help="csv prints key = value lines")

    p = common(sub.add_parser("sweep", help="Monte Carlo N-sweep to CSV and .dat"), stochastic=True)
    p.add_argument("--samples", type=int)
    p.add_argument("--n-values", type=_int_list)
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--out", help="output table path")

    p = common(sub.add_parser("optimize", help="optimize PA positions"), stochastic=True)
    p.add_argument("--m", dest="m_antennas", type=int, help="number of PAs")
    p.add_argument("--restarts", type=int)
    p.add_argument("--out", help="placement file path")

    p = common(sub.add_parser("validate", help="derivative and FIM oracle checks"), stochastic=True)
    p.add_argument("--fd-configs", type=int)
    p.add_argument("--fim-configs", type=int)
    return parser


def _load_config(args) -> RunConfig:
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
    except FileNotFoundError as exc:
        raise _Invalid(f"config file not found: {exc.filename}") from None
    except ConfigError as exc:
        raise _Invalid(str(exc)) from None
    flag_of = {}
    for dest, (section, key, flag) in _OVERRIDES.items():
        value = getattr(args, dest, None)
        if value is not None:
            cfg = cfg.replace(section, **{key: value})
            flag_of[f"{section}.{key}"] = flag
    try:
        cfg.check()
    except ConfigError as exc:
        flag = flag_of.get(exc.field)
        raise _Invalid(f"{exc} ({flag})" if flag else str(exc)) from None
    return cfg


def _render_report(report, fmt_name: str) -> str:
    values = {
        "i": report.i, "s": report.s, "k": report.k, "schur_det": report.schur_det,
        "sqrt_crb_r_m": math.sqrt(report.crb_r),
        "sqrt_crb_theta_deg": math.degrees(math.sqrt(report.crb_theta)),
    }
    if fmt_name == "json":
        out = {key: fmt(v) for key, v in values.items()}
        out["divergent"] = report.divergent
        return json.dumps(out, indent=1)
    lines = [f"{key} = {fmt(v)}" for key, v in values.items()]
    lines.append(f"divergent = {'true' if report.divergent else 'false'}")
    return "\n".join(lines)


def cmd_crb(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    try:
        report = closed_form_crb(cfg.transmitter_layout(), cfg.receiver_layout(), cfg.target_model(),
                                 cfg.budget_model())
    except (DegenerateObservationError, DegenerateGeometryError, InvalidLayoutError) as exc:
        raise _Invalid(str(exc)) from None
    print(_render_report(report, cfg.run.format), file=out)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, path: str, out=None) -> int:
    out = out or sys.stdout
    try:
        spec = cfg.sweep_spec()
    except (ValueError, InfeasibleProblemError) as exc:
        raise _Invalid(str(exc)) from None
    result = run_sweep(spec)
    written = write_sweep(result, path, cfg.run.format)
    for label in result.labels():
        finite = [r for r in result.for_label(label) if math.isfinite(r.mean_sqrt_crb_r)]
        slope = estimate_slope(result, label) if len(finite) >= 3 else math.nan
        print(f"{label}: slope(range) = {slope:.4f}", file=out)
    print(f"wrote {len(result.rows)} rows to {written[0]} (+{len(written) - 1} .dat files)", file=out)
    return EXIT_OK


def cmd_optimize(cfg: RunConfig, path: str, out=None) -> int:
    out = out or sys.stdout
    try:
        problem = cfg.placement_problem()
    except InfeasibleProblemError as exc:
        raise _Invalid(f"transmitter.n_antennas: {exc}") from None
    result = optimize_placement(problem, cfg.run.seed, restarts=cfg.placement.restarts)
    violations = audit_layout(result.positions, problem.waveguide_length, problem.min_spacing)
    if violations:  # projection guarantees feasibility; this is a safety net
        print("constraint audit failed: " + "; ".join(violations), file=sys.stderr)
        return EXIT_TOLERANCE
    meta = {"m_antennas": problem.m_antennas, "objective": problem.objective.name,
            "frequency_ghz": cfg.carrier.frequency_ghz, "waveguide_length_m": problem.waveguide_length,
            "wavelength_m": problem.wavelength}
    written = atomic_write(path, placement_text(result, meta))
    print(f"objective = {fmt(result.objective_value)}", file=out)
    print(f"wrote {problem.m_antennas} positions to {written}", file=out)
    return EXIT_OK


def cmd_validate(cfg: RunConfig, jacobian: Callable = observation_jacobian, out=None) -> int:
    out = out or sys.stdout
    space = cfg.config_space()
    v = cfg.validate
    fd = fd_check(v.fd_configs, cfg.run.seed, space, jacobian=jacobian, tolerance=v.fd_tolerance)
    fim = fim_check(v.fim_configs, cfg.run.seed + 1, dataclasses.replace(space, plane_wave_fraction=0.0),
                    cfg.budget_model(), tolerance=v.fim_tolerance)
    for report in (fd, fim):
        print(report.summary(), file=out)
        if not report.passed and report.worst:
            print(f"  worst: {report.worst}", file=out)
    return EXIT_OK if fd.passed and fim.passed else EXIT_TOLERANCE


def main(argv: Sequence[str] | None = None, *, jacobian: Callable | None = None) -> int:
    """Entry point. ``jacobian`` replaces the analytic chain in ``validate`` (fault injection)."""
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        if args.command == "crb":
            return cmd_crb(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.out or cfg.run.output)
        if args.command == "optimize":
            return cmd_optimize(cfg, args.out or cfg.run.placement_output)
        return cmd_validate(cfg, jacobian or observation_jacobian)
    except _Invalid as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
