"""
    Test suite for the gasrepair command line.
"""
import io
import json
import tempfile
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path
from unittest import TestCase

from gasrepair.cli import EXIT_NO_PATCH, EXIT_OK, EXIT_USAGE, main
from tests.fixtures import PAYOUT, corpus_path, scenario_path

###############
# Test Fixtures
###############


class CliTestCase(TestCase):
    """Runs the command line with captured output in a scratch directory"""

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def run_cli(self, *argv):
        """Exit code, stdout and stderr of one invocation"""
        out, err = io.StringIO(), io.StringIO()
        with redirect_stdout(out), redirect_stderr(err):
            code = main([str(arg) for arg in argv])
        return code, out.getvalue(), err.getvalue()

    def write(self, name, text):
        path = self.tmp / name
        path.write_text(text, encoding="utf-8")
        return path

    def refund_suite(self):
        """Record the refund scenario into a suite file"""
        target = self.tmp / "refund.jsonl"
        code, _, _ = self.run_cli(
            "testgen", corpus_path("refund"), "--scenario", scenario_path("refund"), "--out", target
        )
        self.assertEqual(code, EXIT_OK)
        return target


#########
# detect
#########


class DetectCommandTests(CliTestCase):
    def test_clean(self):
        """A clean contract has no findings"""
        code, out, _ = self.run_cli("detect", corpus_path("clean"))
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(out.splitlines()[-1], "0 finding(s)")

    def test_all_kinds_by_default(self):
        """Without --kinds every detector runs"""
        code, out, _ = self.run_cli("detect", corpus_path("escrow"), "--json")
        self.assertEqual(code, EXIT_OK)
        report = json.loads(out)
        self.assertEqual(report["counts"], {"ED": 2, "RE": 0, "IO": 0, "TOD": 3})
        self.assertEqual(len(report["findings"]), 5)

    def test_selected_kinds(self):
        """--kinds restricts the detectors"""
        _, out, _ = self.run_cli("detect", corpus_path("escrow"), "--json", "--kinds", "ED")
        self.assertEqual(json.loads(out)["counts"]["TOD"], 0)

    def test_usage_errors(self):
        """Missing files, bad flags and unparsable contracts exit with 1"""
        self.assertEqual(self.run_cli("detect", self.tmp / "absent.msol")[0], EXIT_USAGE)
        bad_kinds = self.run_cli("detect", corpus_path("clean"), "--kinds", "XX")
        self.assertEqual(bad_kinds[0], EXIT_USAGE)
        self.assertEqual(self.run_cli()[0], EXIT_USAGE)
        broken = self.write("broken.msol", "contract Broken { function f() public {")
        code, _, err = self.run_cli("detect", broken)
        self.assertEqual(code, EXIT_USAGE)
        self.assertIn("gasrepair: error:", err)

    def test_output_file(self):
        """--out writes the report instead of printing it"""
        target = self.tmp / "report.json"
        code, out, _ = self.run_cli("detect", corpus_path("refund"), "--json", "--out", target)
        self.assertEqual((code, out), (EXIT_OK, ""))
        self.assertEqual(json.loads(target.read_text())["counts"]["ED"], 1)


#####################
# testgen, run-tests
#####################


class SuiteCommandTests(CliTestCase):
    def test_testgen_from_scenario(self):
        """Recording a scenario writes one test per call and the raw log"""
        tests, log = self.tmp / "tests.jsonl", self.tmp / "log.jsonl"
        code, out, _ = self.run_cli(
            "testgen",
            corpus_path("refund"),
            "--scenario",
            scenario_path("refund"),
            "--out",
            tests,
            "--log-out",
            log,
        )
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(out, "5 test(s), 0 discarded\n")
        self.assertEqual(len(tests.read_text().splitlines()), 5)
        self.assertEqual(len(log.read_text().splitlines()), 5)

        again = self.tmp / "again.jsonl"
        code, out, _ = self.run_cli("testgen", corpus_path("refund"), "--log", log, "--out", again)
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(again.read_text(), tests.read_text())

    def test_testgen_needs_out(self):
        """The suite must go somewhere"""
        code, _, _ = self.run_cli(
            "testgen", corpus_path("refund"), "--scenario", scenario_path("refund")
        )
        self.assertEqual(code, EXIT_USAGE)

    def test_run_tests(self):
        """The original passes its suite; a changed contract fails it with 2"""
        suite = self.refund_suite()
        code, out, _ = self.run_cli("run-tests", corpus_path("refund"), "--tests", suite)
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(out.splitlines()[-1], "5 passed, 0 failed")

        source = corpus_path("refund").read_text(encoding="utf-8")
        stricter = self.write("stricter.msol", source.replace("amount > 0", "amount > 100"))
        code, out, _ = self.run_cli("run-tests", stricter, "--tests", suite, "--json")
        self.assertEqual(code, EXIT_NO_PATCH)
        result = json.loads(out)
        self.assertEqual(result["failed"], 1)
        self.assertEqual([r["id"] for r in result["results"] if not r["passed"]], ["t0002"])


##############
# gas-compare
##############


class GasCompareCommandTests(CliTestCase):
    def test_identical_contracts(self):
        """A contract neither dominates nor is dominated by itself"""
        loops = corpus_path("loops")
        code, out, _ = self.run_cli("gas-compare", loops, loops, "--json")
        self.assertEqual(code, EXIT_OK)
        result = json.loads(out)
        self.assertEqual(result["verdict"], "NoDominance")
        self.assertEqual(result["reduced"], "NoDominance")
        self.assertEqual(result["paths"], {"joint": 8, "repaired": 0, "new": 0, "removed": 0})

    def test_cheaper_contract(self):
        """Dropping a repeated addition makes the second contract dominate"""
        source = corpus_path("loops").read_text(encoding="utf-8")
        cheaper = self.write("cheaper.msol", source.replace("return a + b;", "return a;"))
        code, out, _ = self.run_cli("gas-compare", corpus_path("loops"), cheaper)
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(out.splitlines()[-1], "BdominatesA")

    def test_gas_bound(self):
        """Loop paths are checked against the bound at the trip cap"""
        loops = corpus_path("loops")
        _, out, _ = self.run_cli("gas-compare", loops, loops, "--json", "--gas-bound", 5000)
        bound = json.loads(out)["bound"]
        self.assertFalse(bound["a"]["within"])
        self.assertEqual(bound["a"]["function"], "sum")


#########
# repair
#########


class RepairCommandTests(CliTestCase):
    def repair_payout(self, target):
        contract = self.write("payout.msol", PAYOUT)
        return self.run_cli(
            "repair",
            contract,
            "--kinds",
            "ED",
            "--deterministic",
            "--seed",
            7,
            "--pop-size",
            20,
            "--max-generations",
            30,
            "--out",
            target,
        )

    def test_nothing_to_repair(self):
        """A clean contract reports no vulnerabilities and exits 0"""
        code, out, _ = self.run_cli("repair", corpus_path("clean"))
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(out, "status: no_vulnerabilities\n")

    def test_deterministic_reports(self):
        """Two deterministic runs with the same seed write identical reports"""
        first, second = self.tmp / "first.json", self.tmp / "second.json"
        self.assertEqual(self.repair_payout(first)[0], EXIT_OK)
        self.assertEqual(self.repair_payout(second)[0], EXIT_OK)
        self.assertEqual(first.read_bytes(), second.read_bytes())
        report = json.loads(first.read_text())
        self.assertEqual(report["status"], "repaired")
        self.assertEqual(report["config"]["seed"], 7)

    def test_no_patch_exit_code(self):
        """A search that runs out of generations exits with 2"""
        code, out, _ = self.run_cli(
            "repair",
            corpus_path("escrow"),
            "--tests",
            self.escrow_suite(),
            "--kinds",
            "ED",
            "--deterministic",
            "--ip",
            1,
            "--gr",
            1,
            "--max-generations",
            1,
        )
        self.assertIn(code, (EXIT_OK, EXIT_NO_PATCH))
        self.assertEqual(code == EXIT_NO_PATCH, "no_plausible_patch" in out)

    def test_invalid_settings(self):
        """Out-of-range search settings are usage errors"""
        code, _, err = self.run_cli("repair", corpus_path("refund"), "--ip", 0)
        self.assertEqual(code, EXIT_USAGE)
        self.assertIn("initial_population", err)
        bad_mode = self.run_cli("repair", corpus_path("refund"), "--mode", "x")
        self.assertEqual(bad_mode[0], EXIT_USAGE)

    def escrow_suite(self):
        target = self.tmp / "escrow.jsonl"
        code, _, _ = self.run_cli(
            "testgen", corpus_path("escrow"), "--scenario", scenario_path("escrow"), "--out", target
        )
        self.assertEqual(code, EXIT_OK)
        return target
