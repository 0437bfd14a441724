"""``lpwa-geom`` command-line entry point.

Exit codes: 0 success, 2 infeasible optimisation, 3 configuration error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

from . import __version__
from .config import load_scenario, parse_set_args, resolved_params, scenario_hash
from .errors import ConfigError, InfeasibleError, NonMonotoneError, QuadratureError, UnsupportedModelError
from .experiments import KINDS, ExperimentSpec, Table, run
from .parallel import WORKERS_ENV, worker_count

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_CONFIG = 3
EXIT_NUMERICAL = 4


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return "%.9g" % v
    if hasattr(v, "item"):  # numpy scalar
        return format_value(v.item())
    return str(v)


def write_csv(table: Table, path: Path) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.columns)
        for row in table.rows:
            w.writerow([format_value(v) for v in row])


def _json_default(obj):
    if hasattr(obj, "item"):
        return obj.item()
    raise TypeError(type(obj).__name__)


def write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _parse_axis(raw: str | None):
    # "replicas=1,2,3" or "power=10 mW,50 mW"
    if raw is None:
        return None
    if "=" not in raw:
        raise ConfigError(f"--axis expects NAME=V1,V2,..., got {raw!r}")
    name, values = raw.split("=", 1)
    items = [parse_set_args([f"v={v.strip()}"])["v"] for v in values.split(",") if v.strip()]
    return name.strip(), items


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lpwa-geom", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"lpwa-geom {__version__}")
    p.add_argument("command", choices=KINDS)
    p.add_argument("--scenario", required=True, help="scenario YAML file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a scenario field (repeatable)")
    p.add_argument("--seed", type=int, default=None, help="Monte Carlo seed (overrides mc.seed)")
    p.add_argument("--mc", action="store_true", help="add Monte Carlo columns to sweep")
    p.add_argument("--brute-force", action="store_true", help="cross-check optimize by enumeration")
    p.add_argument("--axis", default=None, metavar="NAME=V1,V2,...",
                   help="sweep/scale axis and values (defaults from the scenario)")
    p.add_argument("--out", default=".", help="output directory")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        overrides = parse_set_args(args.overrides)
        if args.seed is not None:
            overrides["mc.seed"] = args.seed
        sc = load_scenario(args.scenario, overrides)
        spec = ExperimentSpec(args.command, args.scenario, str(out), overrides, _parse_axis(args.axis),
                              args.seed, args.mc, args.brute_force)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": spec.kind,
        "scenario_path": str(args.scenario),
        "scenario_hash": scenario_hash(sc),
        "tool_version": __version__,
        "overrides": {k: overrides[k] for k in sorted(overrides)},
        "flags": {"mc": spec.mc, "brute_force": spec.brute_force, "axis": args.axis},
        "resolved": resolved_params(sc),
        "outputs": [],
    }
    status = EXIT_OK
    try:
        table = run(spec, sc, workers=worker_count())
    except InfeasibleError as exc:
        report = {"feasible": False, "reason": exc.reason, "message": str(exc),
                  "scenario_hash": manifest["scenario_hash"], "tool_version": __version__}
        write_json(report, out / f"{spec.kind}_summary.json")
        manifest["outputs"].append(f"{spec.kind}_summary.json")
        manifest["result"] = report
        print(f"infeasible ({exc.reason}): {exc}", file=sys.stderr)
        status = EXIT_INFEASIBLE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UnsupportedModelError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonMonotoneError as exc:
        report = {"error": str(exc), "probes": exc.probes}
        write_json(report, out / f"{spec.kind}_error.json")
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (QuadratureError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    else:
        name = "optimize_trace.csv" if spec.kind == "optimize" else f"{spec.kind}.csv"
        write_csv(table, out / name)
        manifest["outputs"].append(name)
        if table.summary:
            summary = dict(table.summary)
            if spec.kind == "optimize":
                summary["feasible"] = True
            write_json(summary, out / f"{spec.kind}_summary.json")
            manifest["outputs"].append(f"{spec.kind}_summary.json")
        print(f"wrote {out / name}")
    manifest["workers_env"] = WORKERS_ENV
    write_json(manifest, out / "run_manifest.json")
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
