"""
CLI
---

The ``he`` command line: serving a home over HTTP, replaying scenario scripts, running the
benchmark and compatibility suites, inspecting instantiated policies, and the policy
specification toolkit.

Exit codes are 0 on success, 1 when expectations or checks fail and 2 on usage or
configuration errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import pathlib
import sys
from typing import TYPE_CHECKING

from hendorse.bench import Suite, render_report, run_bench
from hendorse.config import load_catalog, load_home_config
from hendorse.constants import (
    COMPAT_SUITE,
    DEFAULT_BENCH_INNER,
    DEFAULT_BENCH_RUNS,
    DEFAULT_LISTEN,
    INFERENCES,
    SCENARIO_MANIFEST,
    SERVE_HISTORY_LIMIT,
    TESTBED_HOME,
)
from hendorse.errors import ConfigurationError, EndorsementError
from hendorse.platform import boot_platform
from hendorse.policy import EvidenceMode, write_templates
from hendorse.scenario import home_path, run_compatibility, run_scenario, run_suite
from hendorse.toolkit import (
    SourceFormat,
    filter_templates,
    generate_templates,
    group_by_target,
    ingest_all,
    load_inferences,
    load_policies,
    read_designated,
)
from hendorse.writer import write_records

if TYPE_CHECKING:
    from collections.abc import Sequence

    from hendorse.frame import RecordFrame
    from hendorse.policy import PolicyTemplate

LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


# ----- Helpers ----- #


def _policies(paths: Sequence[str] | None, catalog_path: pathlib.Path | None = None) -> list[PolicyTemplate]:
    return load_policies(paths, load_catalog(catalog_path))


def _write_frame(path: str, frame: RecordFrame) -> None:
    """A ``.json`` suffix writes headers and rows as JSON, anything else a record table."""
    output = pathlib.Path(path)
    if output.suffix == ".json":
        document = {"headers": frame.headers, "rows": json.loads(frame.to_json(orient="records"))}
        output.write_text(json.dumps(document, indent=2) + "\n")
    else:
        write_records(output, frame)
    LOGGER.info(f"Report written to {output}")


def _home(name: str) -> pathlib.Path:
    path = pathlib.Path(name)
    return path if path.exists() else home_path(name)


# ----- Commands ----- #


def _serve(args: argparse.Namespace) -> int:
    from hendorse.api import serve

    config = load_home_config(_home(args.config))
    if args.history_limit > 0:
        config = config.model_copy(update={"history_limit": args.history_limit})
    platform = boot_platform(config, _policies(args.policies, config.catalog), enforcing=not args.baseline)
    serve(platform, args.listen)
    return EXIT_OK


def _scenario_run(args: argparse.Namespace) -> int:
    config = load_home_config(_home(args.config))
    result = run_scenario(
        args.script,
        config,
        _policies(args.policies, config.catalog),
        EvidenceMode(args.evidence),
        enforcing=not args.baseline,
    )
    print(result.summary())
    if args.audit:
        _write_frame(args.audit, result.audit)
    return EXIT_OK if result.passed else EXIT_FAILED


def _scenario_suite(args: argparse.Namespace) -> int:
    templates = _policies(args.policies)
    report = run_suite(args.manifest, templates, golden_only=args.golden_only, evidence_mode=EvidenceMode(args.evidence))
    matrix = report.matrix()
    print(matrix.to_string(index=False))
    print(f"{matrix.headers['MATCHED']}/{matrix.headers['SCENARIOS']} decisions as expected")
    if args.output:
        _write_frame(args.output, matrix)
    return EXIT_OK if report.passed else EXIT_FAILED


def _bench(args: argparse.Namespace) -> int:
    config = load_home_config(_home(args.config))
    report = run_bench(
        Suite(args.suite.upper()),
        baseline=args.baseline,
        runs=args.runs,
        inner=args.inner,
        seed=args.seed,
        config=config,
        templates=_policies(args.policies, config.catalog),
    )
    print(render_report(report))
    if args.output:
        _write_frame(args.output, report)
    return EXIT_OK


def _compat(args: argparse.Namespace) -> int:
    report = run_compatibility(args.suite, _policies(args.policies), seed=args.seed)
    print(report)
    return EXIT_OK if report.passed else EXIT_FAILED


def _policy_show(args: argparse.Namespace) -> int:
    config = load_home_config(_home(args.config))
    platform = boot_platform(config, _policies(args.policies, config.catalog))
    print(platform.engine.show())
    return EXIT_OK


def _spec_ingest(args: argparse.Namespace) -> int:
    from hendorse.config import write_catalog

    designated = read_designated(args.designated) if args.designated else ()
    device_map, report = ingest_all(args.files, args.format, designated)
    print(report)
    if args.output:
        write_catalog(args.output, list(device_map))
        LOGGER.info(f"Device-attribute map written to {args.output}")
    return EXIT_OK


def _spec_gen(args: argparse.Namespace) -> int:
    inferences = load_inferences(args.inferences, load_catalog(args.catalog))
    groups = group_by_target(inferences)
    if (args.aho, args.value) not in groups:
        errmsg = f"No inferences target {args.aho}={args.value}"
        raise ConfigurationError(errmsg)
    templates = generate_templates(groups[(args.aho, args.value)])
    print(f"{len(templates)} templates for {args.aho}={args.value}")
    if args.output:
        write_templates(args.output, templates)
    return EXIT_OK


def _spec_filter(args: argparse.Namespace) -> int:
    report = filter_templates(
        _policies(args.templates, args.catalog),
        min_strong=args.min_strong,
        contains_pair=args.contains,
        max_size=args.max_size,
    )
    print(report)
    if args.output:
        write_templates(args.output, report.templates)
    return EXIT_OK


# ----- Parser ----- #


def _policy_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--policies",
        nargs="+",
        help="Policy template files or inference tables. Defaults to the bundled inference table.",
    )


def _home_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--config", default=str(TESTBED_HOME), help="Home configuration file or bundled home name."
    )
    _policy_options(parser)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="he", description="Home abstraction endorsement platform.")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level.")
    commands = parser.add_subparsers(dest="command", required=True)

    serve = commands.add_parser("serve", help="Serve a home over HTTP.")
    _home_options(serve)
    serve.add_argument("--listen", default=DEFAULT_LISTEN, help="host:port to listen on.")
    serve.add_argument("--baseline", action="store_true", help="Run without endorsement.")
    serve.add_argument(
        "--history-limit",
        type=int,
        default=SERVE_HISTORY_LIMIT,
        help="Audit, state history and event log entries to keep, 0 keeps all of them.",
    )
    serve.set_defaults(handler=_serve)

    scenario = commands.add_parser("scenario", help="Replay scenario scripts.")
    scenario_commands = scenario.add_subparsers(dest="scenario_command", required=True)
    run = scenario_commands.add_parser("run", help="Replay one script.")
    run.add_argument("script", help="Scenario script file.")
    _home_options(run)
    run.add_argument("--baseline", action="store_true", help="Replay without endorsement.")
    run.add_argument("--audit", help="Write the audit log to this file.")
    suite = scenario_commands.add_parser("suite", help="Replay every scenario of a manifest.")
    suite.add_argument("--manifest", default=str(SCENARIO_MANIFEST), help="Scenario manifest file.")
    suite.add_argument("--golden-only", action="store_true", help="Only the golden scenarios.")
    suite.add_argument("-o", "--output", help="Write the decision matrix to this file.")
    _policy_options(suite)
    for sub in (run, suite):
        sub.add_argument(
            "--evidence",
            choices=[mode.value for mode in EvidenceMode],
            default=EvidenceMode.MOST_RECENT_CHANGE.value,
            help="How policy checks read device states.",
        )
    run.set_defaults(handler=_scenario_run)
    suite.set_defaults(handler=_scenario_suite)

    bench = commands.add_parser("bench", help="Run a benchmark suite.")
    _home_options(bench)
    bench.add_argument("--suite", choices=["micro", "macro"], default="micro")
    bench.add_argument("--baseline", action="store_true", help="Also measure the baseline and the overhead.")
    bench.add_argument("--runs", type=int, default=DEFAULT_BENCH_RUNS)
    bench.add_argument("--inner", type=int, default=DEFAULT_BENCH_INNER)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("-o", "--output", help="Report file, .json or record table.")
    bench.set_defaults(handler=_bench)

    compat = commands.add_parser("compat", help="Run the automation compatibility suite.")
    compat.add_argument("--suite", default=str(COMPAT_SUITE))
    compat.add_argument("--seed", type=int)
    _policy_options(compat)
    compat.set_defaults(handler=_compat)

    policy = commands.add_parser("policy", help="Inspect policies.")
    policy_commands = policy.add_subparsers(dest="policy_command", required=True)
    show = policy_commands.add_parser("show", help="List the instantiated policies of a home.")
    _home_options(show)
    show.set_defaults(handler=_policy_show)

    spec = commands.add_parser("spec", help="Policy specification toolkit.")
    spec_commands = spec.add_subparsers(dest="spec_command", required=True)
    ingest = spec_commands.add_parser("ingest", help="Build a device-attribute map from sources.")
    ingest.add_argument("files", nargs="+")
    ingest.add_argument("--format", choices=[fmt.value for fmt in SourceFormat], help="Detected per file if omitted.")
    ingest.add_argument("--designated", help="Designated override list.")
    ingest.add_argument("-o", "--output", help="Write the map in the catalog format.")
    ingest.set_defaults(handler=_spec_ingest)

    gen = spec_commands.add_parser("gen", help="Generate the templates of one AHO value.")
    gen.add_argument("--aho", required=True)
    gen.add_argument("--value", required=True)
    gen.add_argument("--inferences", default=str(INFERENCES))
    gen.add_argument("--catalog", help="Device catalog. Defaults to the bundled one.")
    gen.add_argument("-o", "--output")
    gen.set_defaults(handler=_spec_gen)

    filt = spec_commands.add_parser("filter", help="Filter templates.")
    filt.add_argument("templates", nargs="*", help="Template files or inference tables.")
    filt.add_argument("--min-strong", type=int)
    filt.add_argument("--contains", help="device-type.attribute pair the templates must check.")
    filt.add_argument("--max-size", type=int)
    filt.add_argument("--catalog", help="Device catalog. Defaults to the bundled one.")
    filt.add_argument("-o", "--output")
    filt.set_defaults(handler=_spec_filter)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)-7s %(name)s: %(message)s",
    )
    try:
        return args.handler(args)
    except (EndorsementError, OSError, ValueError) as error:
        LOGGER.error(str(error))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
