"""Command-line entry point.

Subcommands:
  run              run an experiment from a flat key=value config file
  audit            twin-graph validity audit for a graph file and a policy
  verify-analytic  check every closed-form oracle assertion
  report           merge per-run CSVs into one summary CSV

Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import __version__, analytic
from .graph import CausalGraph, GraphError, audit_performative_validity
from .perform import ExperimentConfig, PerformError, run_experiment
from .recourse import METHODS
from .settings import SETTING_NAMES

OUT_DIR_ENV = "RECOURSELAB_OUT"

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class ConfigError(ValueError):
    pass


_CONFIG_FIELDS = {
    "setting": str,
    "method": str,
    "seeds": "int_list",
    "profile": str,
    "train_rows": int,
    "cohort_size": int,
    "t_r": float,
    "t_c": float,
    "penalty_shape": str,
    "noise_mode": str,
    "min_bucket": int,
    "m": int,
    "calibration_seed": int,
    "out_dir": str,
    "gpa_csv": str,
    "gpa_map": "str_map",
}


def parse_config_text(text) -> ExperimentConfig:
    values = {}
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line or line.startswith("["):
            continue
        if "=" not in line:
            raise ConfigError(f"line {i}: expected 'key = value', got {raw.strip()!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        if key in ("version",):
            continue
        if key not in _CONFIG_FIELDS:
            raise ConfigError(f"line {i}: unknown config field {key!r}")
        kind = _CONFIG_FIELDS[key]
        try:
            if kind == "int_list":
                values[key] = tuple(int(v) for v in val.split(",") if v.strip())
            elif kind == "str_map":
                pairs = [p for p in val.split(",") if p.strip()]
                values[key] = dict(p.split(":", 1) for p in pairs)
            else:
                values[key] = kind(val)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"line {i}: field {key!r}: cannot parse {val!r} ({e})") from e
    for required in ("setting", "method"):
        if required not in values:
            raise ConfigError(f"missing required config field {required!r}")
    if values["setting"] not in SETTING_NAMES:
        raise ConfigError(f"unknown setting {values['setting']!r}; known: {', '.join(SETTING_NAMES)}")
    if values["method"] not in METHODS:
        raise ConfigError(f"unknown method {values['method']!r}; known: {', '.join(METHODS)}")
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    return parse_config_text(text)


def _cmd_run(args):
    try:
        config = load_config(args.config)
        if args.profile:
            config.profile = args.profile
            config.train_rows = None
            config.cohort_size = None
        if args.out:
            config.out_dir = args.out
        elif os.environ.get(OUT_DIR_ENV) and config.out_dir == ".":
            config.out_dir = os.environ[OUT_DIR_ENV]
        config = config.resolved()
    except (ConfigError, PerformError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE

    try:
        report = run_experiment(config, jobs=args.jobs)
    except Exception as e:
        print(f"run failed: {e}", file=sys.stderr)
        return EXIT_RUNTIME

    os.makedirs(config.out_dir, exist_ok=True)
    base = f"{report.setting}_{report.method}"
    csv_path = os.path.join(config.out_dir, f"report_{base}.csv")
    with open(csv_path, "w") as fh:
        fh.write(report.csv_text())
    with open(os.path.join(config.out_dir, f"report_{base}.txt"), "w") as fh:
        fh.write(report.to_text(version=__version__))
    with open(os.path.join(config.out_dir, f"config_{base}.conf"), "w") as fh:
        fh.write(report.config_text())
    print(report.summary_line())
    print(f"wrote {csv_path}")
    return EXIT_OK


def _cmd_audit(args):
    try:
        with open(args.graph) as fh:
            graph = CausalGraph.parse(fh.read())
        policy = [n for n in (args.policy_inputs or "").split(",") if n]
        targets = [n for n in (args.targets or "").split(",") if n]
        report = audit_performative_validity(graph, policy, targets, args.resampled)
    except (OSError, GraphError) as e:
        print(f"audit error: {e}", file=sys.stderr)
        return EXIT_USAGE
    print(report.to_text(), end="")
    return EXIT_OK


def _cmd_verify_analytic(_args):
    results = analytic.run_checks()
    width = max(len(r.name) for r in results)
    failed = 0
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        failed += 0 if r.passed else 1
        print(f"{status}  {r.name:<{width}}  {r.detail}")
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_RUNTIME


def _cmd_report(args):
    rows = []
    header = None
    for path in args.csv:
        try:
            with open(path) as fh:
                lines = fh.read().splitlines()
        except OSError as e:
            print(f"report error: {e}", file=sys.stderr)
            return EXIT_USAGE
        if not lines:
            continue
        cols = lines[0].split(",")[:5]
        if header is None:
            header = cols
        rows += [",".join(line.split(",")[:5]) for line in lines[1:]]
    if header is None:
        print("report error: no input rows", file=sys.stderr)
        return EXIT_USAGE
    text = ",".join(header) + "\n" + "\n".join(sorted(rows)) + "\n"
    if args.out_file:
        with open(args.out_file, "w") as fh:
            fh.write(text)
        print(f"wrote {args.out_file}")
    else:
        print(text, end="")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="recourselab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a config file")
    run.add_argument("--config", required=True, help="flat key=value config file")
    run.add_argument("--profile", choices=["desk", "paper"], help="override the scale profile")
    run.add_argument("--jobs", type=int, default=1, help="seed-level worker processes")
    run.add_argument("--out", help=f"output directory (default: config out_dir or ${OUT_DIR_ENV})")
    run.set_defaults(fn=_cmd_run)

    audit = sub.add_parser("audit", help="performative-validity audit for a graph file")
    audit.add_argument("graph", help="graph text file (parent -> child lines, target: header)")
    audit.add_argument("--policy-inputs", default="", help="comma-separated features the policy reads")
    audit.add_argument("--targets", default="", help="comma-separated intervention targets")
    audit.add_argument("--resampled", action="store_true", help="noise is resampled post-recourse")
    audit.set_defaults(fn=_cmd_audit)

    verify = sub.add_parser("verify-analytic", help="check the closed-form oracle assertions")
    verify.set_defaults(fn=_cmd_verify_analytic)

    report = sub.add_parser("report", help="merge per-run CSVs into one summary CSV")
    report.add_argument("csv", nargs="+", help="per-run report CSVs")
    report.add_argument("--out-file", help="write the merged CSV here instead of stdout")
    report.set_defaults(fn=_cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
