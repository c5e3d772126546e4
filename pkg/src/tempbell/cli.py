"""Command-line entry point: ``tempbell {simulate,exact,optimize,report,sweep,verify}``.

Exit status: 0 on success, 1 for usage or configuration errors, 2 for
failures while running.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError
from .geometry import Config, Direction, Setting
from .harness import (
    ExperimentSpec,
    build_report,
    dumps,
    report_rows,
    resolve_seed,
    run_experiment,
    write_outputs,
    write_rows_csv,
)
from .inequalities import exact_reports, prob7_margin_from_18, quantum_lhs_16, quantum_lhs_18, quantum_report
from .optimizer import optimize, verify_reference_configs
from .quantum import DEFAULT_PREP, StatePrep, quantum_prob_table
from .records import RunBatch

log = logging.getLogger("tempbell")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _load_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def _load_config(path: str) -> tuple[Config, dict]:
    data = _load_json(path)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    try:
        cfg = Config.from_dict(data.get("config", data))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: bad config ({exc})") from None
    return cfg, data


def _fmt(v, counts: bool = False) -> str:
    if v is None:
        return "-"
    if counts:
        return str(int(v))
    if isinstance(v, float):
        return f"{v:.8f}"
    return str(v)


def _print_reports(reports: list[dict], out) -> None:
    for r in reports:
        counts = r["variant"] == "counts-6"
        line = (f"{r['variant']:<11} lhs={_fmt(r['lhs'], counts)} bound={_fmt(r['bound'], counts)} "
                f"margin={_fmt(r['margin'], counts)}")
        if r.get("z_score") is not None:
            line += f" z={r['z_score']:.2f}"
        line += f" {r['status']}"
        if r.get("degenerate"):
            line += " (degenerate config)"
        print(line, file=out)


# -- subcommands ----------------------------------------------------------------

def cmd_simulate(args, out) -> int:
    spec = ExperimentSpec.load(args.spec)
    if args.runs is not None:
        spec.n_runs = args.runs
    if args.workers is not None:
        spec.workers = args.workers
    spec.__post_init__()
    seed = resolve_seed(args.seed, spec.seed)
    report = run_experiment(spec, seed)
    out_dir = Path(args.out_dir) if args.out_dir else Path(args.spec).with_suffix("").parent / "run"
    paths = write_outputs(report, out_dir, args.format)
    print(f"{spec.model}/{spec.protocol}: {len(report.records)} records, seed {seed}", file=out)
    _print_reports(list(report.inequalities.values()), out)
    for name, p in paths.items():
        print(f"wrote {name}: {p}", file=out)
    return 0


def cmd_exact(args, out) -> int:
    cfg, data = _load_config(args.config)
    prep_data = data.get("prep")
    if args.prep:
        prep_data = _load_json(args.prep)
    prep = StatePrep.from_dict(prep_data) if prep_data else DEFAULT_PREP
    state = prep.resolve(cfg)
    reports = [quantum_report(cfg, "quantum-16"), quantum_report(cfg, "quantum-18")]
    reports += exact_reports(quantum_prob_table(state, cfg), cfg)
    payload = {
        "config": cfg.to_dict(),
        "prep": prep.to_dict(),
        "dots": dict(zip(("ab", "ac", "bc"), cfg.dots())),
        "predicted_prob7_margin_under_A+": prob7_margin_from_18(cfg),
        "reports": [r.to_dict() for r in reports],
    }
    if args.format == "json":
        out.write(dumps(payload))
    else:
        _print_reports(payload["reports"], out)
    return 0


def cmd_optimize(args, out) -> int:
    if not 0 < args.grid_deg <= 10.0:
        raise ConfigError("--grid-deg must lie in (0, 10]")
    result = optimize(args.objective, args.grid_deg, args.starts, resolve_seed(args.seed), args.tolerance)
    text = dumps(result)
    if args.out:
        Path(args.out).write_text(text)
    print(f"{result['objective']}: grid {result['grid']['best_value']:.8f}, "
          f"refined {result['best_value']:.10f}", file=out)
    if "multi_start" in result:
        print(f"multi-start best {result['multi_start']['best_value']:.10f} "
              f"(|diff| {result['agreement']:.2e})", file=out)
    if "reference_config_value" in result:
        print(f"reference configuration value {result['reference_config_value']:.8f}; "
              f"optimum exceeds it by {result['exceeds_reference_config_by']:.8f}", file=out)
    return 0


def cmd_report(args, out) -> int:
    try:
        runs = RunBatch.from_csv(args.records)
    except FileNotFoundError:
        raise ConfigError(f"records file not found: {args.records}") from None
    spec = ExperimentSpec.load(args.spec) if args.spec else None
    seed = resolve_seed(args.seed, spec.seed) if spec is not None else args.seed
    body = build_report(runs, spec, seed)
    if args.format == "csv":
        if args.out:
            write_rows_csv(args.out, report_rows(body))
        _print_reports(list(body["inequalities"].values()), out)
    else:
        text = dumps(body)
        if args.out:
            Path(args.out).write_text(text)
        else:
            out.write(text)
    return 0


def cmd_sweep(args, out) -> int:
    """Rotate one direction about an axis and tabulate the closed forms."""
    cfg, _ = _load_config(args.config)
    setting = Setting.parse(args.setting)
    axis = np.array(args.axis, dtype=float)
    axis /= np.linalg.norm(axis)
    base = cfg[setting].as_array()
    rows = []
    for deg in np.linspace(0.0, 360.0, args.steps):
        t = math.radians(deg)
        # Rodrigues rotation of the chosen direction
        v = (base * math.cos(t) + np.cross(axis, base) * math.sin(t)
             + axis * (axis @ base) * (1.0 - math.cos(t)))
        dirs = [cfg.a, cfg.b, cfg.c]
        dirs[setting] = Direction.from_array(v)
        c = Config(*dirs)
        rows.append({"angle_deg": float(deg), "lhs16": quantum_lhs_16(c), "lhs18": quantum_lhs_18(c),
                     "prob7_margin_A+": prob7_margin_from_18(c)})
    if args.out:
        write_rows_csv(args.out, rows)
        print(f"wrote {len(rows)} rows to {args.out}", file=out)
    else:
        out.write("angle_deg,lhs16,lhs18,prob7_margin_A+\n")
        for r in rows:
            out.write(f"{r['angle_deg']!r},{r['lhs16']!r},{r['lhs18']!r},{r['prob7_margin_A+']!r}\n")
    return 0


def cmd_verify(args, out) -> int:
    res = verify_reference_configs()
    for name, r in res.items():
        print(f"{name}: {r['value']:.12f} (expected {r['expected']:.12f})", file=out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tempbell", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("simulate", help="run an experiment spec and persist records and report")
    s.add_argument("--spec", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--runs", type=int, help="override n_runs")
    s.add_argument("--out-dir")
    s.add_argument("--format", choices=("json", "csv"), default="json")
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("exact", help="closed-form evaluation of every inequality for a config")
    s.add_argument("--config", required=True)
    s.add_argument("--prep", help="JSON state prep (defaults to the config file's 'prep')")
    s.add_argument("--format", choices=("text", "json"), default="text")
    s.set_defaults(func=cmd_exact)

    s = sub.add_parser("optimize", help="maximize a violation objective over configurations")
    s.add_argument("--objective", choices=("ineq16", "ineq18"), default="ineq16")
    s.add_argument("--grid-deg", type=float, default=1.0)
    s.add_argument("--starts", type=int, default=32)
    s.add_argument("--seed", type=int)
    s.add_argument("--tolerance", type=float, default=1e-10)
    s.add_argument("--out")
    s.set_defaults(func=cmd_optimize)

    s = sub.add_parser("report", help="rebuild a report from persisted run records")
    s.add_argument("--records", required=True)
    s.add_argument("--spec")
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.add_argument("--format", choices=("json", "csv"), default="json")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("sweep", help="tidy CSV of closed forms while one direction rotates")
    s.add_argument("--config", required=True)
    s.add_argument("--setting", default="B", choices=("A", "B", "C", "a", "b", "c"))
    s.add_argument("--axis", type=float, nargs=3, default=[0.0, 0.0, 1.0])
    s.add_argument("--steps", type=int, default=361)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("verify", help="check the closed forms at the reference configurations")
    s.set_defaults(func=cmd_verify)
    return p


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        log.debug("failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
