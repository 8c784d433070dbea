"""
Command-line entry point.

    gasrepair detect      CONTRACT                    vulnerability report
    gasrepair testgen     CONTRACT (--log F | --scenario F) --out TESTS
    gasrepair repair      CONTRACT --tests TESTS      search for plausible patches
    gasrepair gas-compare A B                         gas dominance between contracts
    gasrepair run-tests   CONTRACT --tests TESTS      replay a regression suite

Exit codes: 0 success, 1 usage or input error, 2 no plausible patch (or failing
tests for run-tests), 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Literal, Optional, Sequence

from pydantic import BaseModel, ConfigDict, FilePath, ValidationError

from . import __version__
from .config import CostTable, SearchConfig
from .detect import VulnKind, detect_all
from .exceptions import ConfigError, GasRepairError, ParseError, UsageError
from .gas import (
    SubstitutionBinding,
    check_gas_bound,
    compare_dominance,
    enumerate_paths,
    expected_gas_formula,
    log_weights,
    partition_paths,
    reduced_compare,
)
from .lang import nodes as n
from .lang import parse_file, typecheck
from .search import repair, repair_urs
from .testgen import (
    Scenario,
    TestCase,
    TransactionRecord,
    generate_tests,
    read_jsonl,
    record_transactions,
    write_jsonl,
)
from .vm import run_test

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NO_PATCH = 2
EXIT_INTERNAL = 3

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class ArgumentParser(argparse.ArgumentParser):
    """argparse that raises UsageError instead of exiting"""

    def error(self, message):
        raise UsageError(message)


class CliConfig(BaseModel):
    """Validated command line of one invocation"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    subcommand: Literal["detect", "testgen", "repair", "gas-compare", "run-tests"]
    contract: FilePath
    other: Optional[FilePath] = None
    tests: Optional[FilePath] = None
    log: Optional[FilePath] = None
    scenario: Optional[FilePath] = None
    weights: Optional[FilePath] = None
    output: Optional[Path] = None
    json_output: bool = False
    search: SearchConfig = SearchConfig()


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError(f"expected on or off, got '{text}'")
    return text == "on"


def _kinds(text: str) -> frozenset[VulnKind]:
    try:
        return VulnKind.parse_list(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


def _weights(text: str) -> Optional[str]:
    if text == "uniform":
        return None
    if text.startswith("log:") and len(text) > 4:
        return text[4:]
    raise argparse.ArgumentTypeError(f"expected uniform or log:<file>, got '{text}'")


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(
        prog="gasrepair", description="Gas-aware search-based repair of MiniSol contracts"
    )
    parser.add_argument("--version", action="version", version=f"gasrepair {__version__}")
    common = ArgumentParser(add_help=False)
    common.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug"
    )
    common.add_argument("--json", dest="json_output", action="store_true")
    common.add_argument("--out", dest="output", metavar="FILE", type=Path)
    common.add_argument("--cost-table", metavar="FILE", type=Path)
    common.add_argument("--kinds", type=_kinds, help="e.g. ED,RE,IO (default: all)")
    common.add_argument("--gas-limit", type=int, default=1_000_000)
    common.add_argument("--per-test-timeout", type=float, default=5.0, metavar="SEC")

    commands = parser.add_subparsers(dest="subcommand", required=True, parser_class=ArgumentParser)

    detect = commands.add_parser("detect", parents=[common], help="report vulnerabilities")
    detect.add_argument("contract", type=Path)

    testgen = commands.add_parser("testgen", parents=[common], help="build a regression suite")
    testgen.add_argument("contract", type=Path)
    source = testgen.add_mutually_exclusive_group(required=True)
    source.add_argument("--log", type=Path, help="transaction log (JSON lines)")
    source.add_argument("--scenario", type=Path, help="scenario script to record")
    testgen.add_argument("--log-out", type=Path, help="write recorded transactions here")

    repair_cmd = commands.add_parser("repair", parents=[common], help="search for patches")
    repair_cmd.add_argument("contract", type=Path)
    repair_cmd.add_argument("--tests", type=Path, help="regression suite (JSON lines)")
    repair_cmd.add_argument("--mode", choices=["genetic", "urs"], default="genetic")
    repair_cmd.add_argument("--gas-objective", type=_on_off, default=True, metavar="on|off")
    repair_cmd.add_argument("--gmax-discard", type=_on_off, default=False, metavar="on|off")
    repair_cmd.add_argument("--timeout", type=float, default=3600.0, metavar="SEC")
    repair_cmd.add_argument("--gas-bound", type=int)
    repair_cmd.add_argument("--ip", type=int, default=20, help="initial population size")
    repair_cmd.add_argument("--gr", type=int, default=10, help="generation size")
    repair_cmd.add_argument("--pop-size", type=int, default=40, help="population size")
    repair_cmd.add_argument("--max-generations", type=int)
    repair_cmd.add_argument("--evaluators", type=int)
    repair_cmd.add_argument("--seed", type=int, default=0)
    repair_cmd.add_argument("--deterministic", action="store_true")
    repair_cmd.add_argument("--weights", type=_weights, default=None, metavar="uniform|log:FILE")

    compare = commands.add_parser("gas-compare", parents=[common], help="compare gas")
    compare.add_argument("contract", type=Path)
    compare.add_argument("other", type=Path)
    compare.add_argument("--weights", type=_weights, default=None, metavar="uniform|log:FILE")
    compare.add_argument("--gas-bound", type=int)

    run_tests = commands.add_parser("run-tests", parents=[common], help="replay a suite")
    run_tests.add_argument("contract", type=Path)
    run_tests.add_argument("--tests", type=Path, required=True)
    return parser


def cli_config(args: argparse.Namespace) -> CliConfig:
    """Validate every flag and input path before any work starts"""
    search = {
        "gas_limit": args.gas_limit,
        "per_test_timeout": args.per_test_timeout,
    }
    if args.kinds is not None:
        search["targeted_kinds"] = args.kinds
    elif args.subcommand == "detect":
        search["targeted_kinds"] = frozenset(VulnKind)
    if args.cost_table is not None:
        search["cost_table"] = CostTable.load(args.cost_table)
    if args.subcommand == "repair":
        search.update(
            mode=args.mode,
            gas_objective=args.gas_objective,
            gmax_early_discard=args.gmax_discard,
            max_bound=args.timeout,
            gas_bound=args.gas_bound,
            initial_population=args.ip,
            generation_size=args.gr,
            population_size=args.pop_size,
            max_generations=args.max_generations,
            seed=args.seed,
            deterministic=args.deterministic,
        )
        if args.evaluators is not None:
            search["evaluators"] = args.evaluators
    elif args.subcommand == "gas-compare":
        search["gas_bound"] = args.gas_bound
    try:
        return CliConfig(
            subcommand=args.subcommand,
            contract=args.contract,
            other=getattr(args, "other", None),
            tests=getattr(args, "tests", None),
            log=getattr(args, "log", None),
            scenario=getattr(args, "scenario", None),
            weights=getattr(args, "weights", None),
            output=args.output,
            json_output=args.json_output,
            search=SearchConfig(**search),
        )
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()
        )
        raise UsageError(problems) from e


def configure_logging(verbosity: int):
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def load_contract(path: Path) -> n.Contract:
    """Parse and typecheck a contract file; problems are input errors"""
    contract = parse_file(path)
    errors = typecheck(contract)
    if errors:
        raise UsageError(f"{path} does not typecheck: " + "; ".join(map(str, errors)))
    return contract


def emit(config: CliConfig, text: str):
    if config.output is not None:
        config.output.write_text(text, encoding="utf-8")
        logger.info("wrote %s", config.output)
    else:
        sys.stdout.write(text)


def _load_weight_log(config: CliConfig) -> Optional[list[TransactionRecord]]:
    if config.weights is None:
        return None
    return read_jsonl(config.weights, TransactionRecord)


##############
# Subcommands
##############


def cmd_detect(config: CliConfig) -> int:
    contract = load_contract(config.contract)
    report = detect_all(contract, config.search.targeted_kinds)
    if config.json_output:
        entries = report.to_json(contract)
        emit(config, json.dumps({"counts": report.counts(), "findings": entries}, indent=2) + "\n")
    else:
        lines = [
            f"{e['kind']:<4} line {e['line']}  {e['nodePath']}  {e['note']}"
            for e in report.to_json(contract)
        ]
        lines.append(f"{len(report)} finding(s)")
        emit(config, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_testgen(config: CliConfig, log_out: Optional[Path] = None) -> int:
    if config.output is None:
        raise UsageError("testgen needs --out for the generated suite")
    contract = load_contract(config.contract)
    search = config.search
    if config.scenario is not None:
        records = record_transactions(contract, Scenario.load(config.scenario), search.cost_table)
        if log_out is not None:
            write_jsonl(log_out, records)
    else:
        records = read_jsonl(config.log, TransactionRecord)
    tests, discards = generate_tests(
        contract, records, search.per_test_timeout, search.cost_table, search.gas_limit
    )
    write_jsonl(config.output, tests)
    for discard in discards:
        logger.warning("transaction #%d discarded: %s", discard.source, discard.reason)
    summary = {
        "tests": len(tests),
        "discarded": [d.model_dump() for d in discards],
    }
    if config.json_output:
        sys.stdout.write(json.dumps(summary, indent=2) + "\n")
    else:
        sys.stdout.write(f"{len(tests)} test(s), {len(discards)} discarded\n")
    return EXIT_OK


def cmd_repair(config: CliConfig) -> int:
    contract = load_contract(config.contract)
    tests = read_jsonl(config.tests, TestCase) if config.tests is not None else []
    if not tests:
        logger.warning("repairing without regression tests")
    search = repair_urs if config.search.mode == "urs" else repair
    report = search(contract, config.search, tests, _load_weight_log(config))
    if config.json_output or config.output is not None:
        emit(config, report.to_json())
    else:
        lines = [f"status: {report.status}"]
        for patch in report.plausible:
            marker = "*" if patch.content_hash in report.recommended else " "
            lines.append(
                f"{marker} {patch.content_hash[:12]} {patch.space} distance={patch.distance}"
                f" gas={patch.gas_formula} level={patch.gas_level}"
            )
        emit(config, "\n".join(lines) + "\n")
    if report.status == "no_plausible_patch":
        return EXIT_NO_PATCH
    return EXIT_OK


def cmd_gas_compare(config: CliConfig) -> int:
    search = config.search
    table = search.cost_table
    first = load_contract(config.contract)
    second = load_contract(config.other)
    weight_log = _load_weight_log(config)
    formulas = []
    for contract in (first, second):
        weights = None
        if weight_log is not None:
            weights = log_weights(contract, weight_log, table=table, gas_limit=search.gas_limit)
        formulas.append(expected_gas_formula(contract, weights, table, search.path_cap))
    binding = SubstitutionBinding()
    verdict = compare_dominance(formulas[0], formulas[1], binding)
    old_paths = enumerate_paths(first, search.path_cap)
    new_paths = enumerate_paths(second, search.path_cap)
    partition = partition_paths(old_paths, new_paths)
    result = {
        "a": str(formulas[0]),
        "b": str(formulas[1]),
        "verdict": verdict.value,
        "paths": {
            "joint": len(partition.joint),
            "repaired": len(partition.repaired),
            "new": len(partition.new),
            "removed": len(partition.removed),
        },
    }
    if weight_log is None and len(old_paths) == len(new_paths):
        result["reduced"] = reduced_compare(first, second, table, search.path_cap).value
    if search.gas_bound is not None:
        bounds = {}
        for label, contract in (("a", first), ("b", second)):
            bound = check_gas_bound(
                contract, search.gas_bound, table, search.trip_cap, search.path_cap
            )
            bounds[label] = {
                "within": bound.within,
                "function": bound.path.function if bound.path else None,
                "witness": bound.witness,
                "unbounded": bound.unbounded,
            }
        result["bound"] = bounds
    if config.json_output:
        emit(config, json.dumps(result, indent=2) + "\n")
    else:
        emit(config, f"A: {result['a']}\nB: {result['b']}\n{result['verdict']}\n")
    return EXIT_OK


def cmd_run_tests(config: CliConfig) -> int:
    contract = load_contract(config.contract)
    tests = read_jsonl(config.tests, TestCase)
    search = config.search
    results = []
    for test in tests:
        verdict = run_test(contract, test, search.cost_table, search.gas_limit)
        results.append({"id": test.id, "passed": verdict.passed, "reason": verdict.reason})
    failed = [r for r in results if not r["passed"]]
    if config.json_output:
        emit(config, json.dumps({"results": results, "failed": len(failed)}, indent=2) + "\n")
    else:
        lines = [
            f"{r['id']} {'PASS' if r['passed'] else 'FAIL ' + r['reason']}" for r in results
        ]
        lines.append(f"{len(results) - len(failed)} passed, {len(failed)} failed")
        emit(config, "\n".join(lines) + "\n")
    return EXIT_NO_PATCH if failed else EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand; returns the process exit code"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        configure_logging(args.verbose)
        config = cli_config(args)
        match config.subcommand:
            case "detect":
                return cmd_detect(config)
            case "testgen":
                return cmd_testgen(config, args.log_out)
            case "repair":
                return cmd_repair(config)
            case "gas-compare":
                return cmd_gas_compare(config)
            case "run-tests":
                return cmd_run_tests(config)
    except (UsageError, ConfigError, ParseError, OSError) as e:
        sys.stderr.write(f"gasrepair: error: {e}\n")
        return EXIT_USAGE
    except GasRepairError as e:
        sys.stderr.write(f"gasrepair: {type(e).__name__}: {e}\n")
        return EXIT_INTERNAL
    except Exception as e:
        logger.debug("internal error", exc_info=True)
        sys.stderr.write(f"gasrepair: internal error: {type(e).__name__}: {e}\n")
        return EXIT_INTERNAL
    return EXIT_INTERNAL  # pragma: no cover


if __name__ == "__main__":
    sys.exit(main())
