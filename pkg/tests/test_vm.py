"""
    Test suite for the gas-metering interpreter.
"""
import time
from unittest import TestCase

from gasrepair.config import AdversaryConfig, CostTable
from gasrepair.exceptions import ExecutionError, ExecutionTimeout
from gasrepair.lang import NodeId, parse
from gasrepair.lang import nodes as n
from gasrepair.lang.parser import parse_statement
from gasrepair.mutate import Insert, Move, Position, apply_edit
from gasrepair.vm import (
    CONTRACT_ADDRESS,
    AccountSlice,
    ExecutionEnv,
    MachineState,
    Status,
    WorldState,
    adversary_callback,
    deploy,
    execute,
    instruction_gas,
    run_test,
)
from tests.fixtures import load, records

###############
# Test Fixtures
###############

ATTACKER = 666


def call(contract, world, function, *args, caller=1, value=0, **kwargs):
    """Execute one transaction"""
    env = ExecutionEnv(caller, function, tuple(args), value, **kwargs)
    return execute(contract, world, env)


def drain_path(loops):
    """Path of the body of loops.drain"""
    return loops.function_id("drain").path + (0,)


def climb_path(loops):
    """Path of the body of loops.climb"""
    return loops.function_id("climb").path + (0,)


def loop_skipping_mutant(loops):
    """drain() with `a = false;` inserted after its first statement"""
    edit = Insert(
        parse_statement("a = false;"), NodeId(drain_path(loops) + (0,)), Position.AFTER
    )
    return apply_edit(loops, edit)


def runaway_mutant(loops):
    """climb() with the loop's increment moved after the loop"""
    body = climb_path(loops)
    edit = Move(NodeId(body + (1, 1, 0)), NodeId(body + (1,)), Position.AFTER)
    return apply_edit(loops, edit)


def bank_with_attacker(name):
    """A bank-like subject holding 30 wei, 10 of them credited to the attacker"""
    contract = load(name)
    storage = {"balances[1]": 20, f"balances[{ATTACKER}]": 10}
    if contract.state_var("total") is not None:
        storage["total"] = 30
    world = deploy(contract, balance=30, funded={1: 100, ATTACKER: 0}, storage=storage)
    return contract, world


#######
# Gas
#######


class InstructionGasTests(TestCase):
    def setUp(self):
        self.world = WorldState()
        self.machine = MachineState()

    def test_add_costs_three(self):
        """An Add step costs 3 units"""
        self.assertEqual(instruction_gas("add", self.world, self.machine), 3)

    def test_storage_write_prices(self):
        """Writing zero costs 4 units, a non-zero value 68"""
        self.assertEqual(instruction_gas("sstore", self.world, self.machine, value=0), 4)
        self.assertEqual(
            instruction_gas("sstore", self.world, self.machine, value=False), 4
        )
        self.assertEqual(instruction_gas("sstore", self.world, self.machine, value=7), 68)
        self.assertEqual(
            instruction_gas("sstore", self.world, self.machine, value=True), 68
        )

    def test_memory_expansion(self):
        """New memory is priced on top of what is already allocated"""
        self.assertEqual(instruction_gas("memory", self.world, self.machine, words=3), 9)
        self.machine.memory_words = 3
        self.assertEqual(instruction_gas("memory", self.world, self.machine, words=2), 6)
        quadratic = CostTable(memory_quadratic_divisor=2)
        self.machine.memory_words = 0
        self.assertEqual(
            instruction_gas("memory", self.world, self.machine, quadratic, words=4),
            3 * 4 + 16 // 2,
        )

    def test_noop_is_free(self):
        """No-ops cost nothing"""
        self.assertEqual(instruction_gas("noop", self.world, self.machine), 0)

    def test_custom_table(self):
        """Prices come from the cost table"""
        table = CostTable(costs={"add": 7})
        self.assertEqual(instruction_gas("add", self.world, self.machine, table), 7)
        self.assertEqual(table.cost("sub"), 3)

    def test_return_zero_by_hand(self):
        """`return 0;` costs one push plus one return"""
        contract = parse("contract C { function f() public returns (uint) { return 0; } }")
        result = call(contract, deploy(contract), "f")
        table = CostTable()
        self.assertEqual(result.return_value, 0)
        self.assertEqual(result.gas_used, table.cost("push") + table.cost("return"))

    def test_trace_sums_to_gas_used(self):
        """gas_used is the sum of the traced steps"""
        loops = load("loops")
        result = call(loops, deploy(loops), "sum", 4)
        self.assertEqual(result.return_value, 0 + 1 + 2 + 3)
        self.assertEqual(result.gas_used, sum(step.gas for step in result.trace))
        self.assertEqual(result.loop_counts, {loops.function_id("sum").path + (0, 2): 4})


#############
# Execution
#############


class ExecuteTests(TestCase):
    def test_payable_transfer(self):
        """A payable call moves the value to the contract"""
        refund = load("refund")
        world = deploy(refund, funded={1: 100})
        result = call(refund, world, "pay", value=25)
        self.assertEqual(result.status, Status.SUCCESS)
        self.assertEqual(result.post_state.balance(CONTRACT_ADDRESS), 25)
        self.assertEqual(result.post_state.balance(1), 75)
        self.assertEqual(result.post_state.storage, {"paid[1]": 25})
        self.assertEqual(world.balance(1), 100)  # input world untouched

    def test_require_rolls_back(self):
        """A failed require reverts every effect, the value transfer included"""
        refund = load("refund")
        world = call(refund, deploy(refund, funded={1: 100}), "pay", value=25).post_state
        result = call(refund, world, "pay", value=10)
        self.assertEqual(result.status, Status.REQUIRE_FAILED)
        self.assertEqual(result.post_state.balance(1), 75)
        self.assertEqual(result.post_state.storage, {"paid[1]": 25})
        self.assertGreater(result.gas_used, 0)

    def test_value_to_non_payable(self):
        """Sending value to a non-payable function fails like a require"""
        refund = load("refund")
        result = call(refund, deploy(refund, funded={1: 100}), "refund", value=5)
        self.assertEqual(result.status, Status.REQUIRE_FAILED)
        self.assertEqual(result.post_state.balance(1), 100)

    def test_bad_environment(self):
        """Unknown functions, wrong arguments and unfunded callers are caller bugs"""
        loops = load("loops")
        world = deploy(loops)
        with self.assertRaises(ExecutionError):
            call(loops, world, "missing")
        with self.assertRaises(ExecutionError):
            call(loops, world, "add", 1)
        with self.assertRaises(ExecutionError):
            call(loops, world, "store", True)
        refund = load("refund")
        with self.assertRaises(ExecutionError):
            call(refund, deploy(refund), "pay", value=5)

    def test_out_of_gas(self):
        """Exceeding the limit stops at exactly the limit and reverts"""
        loops = load("loops")
        world = deploy(loops)
        result = call(loops, world, "store", 20, gas_limit=50)
        self.assertEqual(result.status, Status.OUT_OF_GAS)
        self.assertEqual(result.gas_used, 50)
        self.assertEqual(result.post_state.storage, {})

    def test_overflow_wraps(self):
        """uint arithmetic wraps modulo 2**256 and is flagged"""
        token = load("token")
        world = deploy(token, storage={"balances[1]": 1})
        result = call(token, world, "mint", n.UINT_MAX)
        self.assertEqual(result.status, Status.SUCCESS)
        self.assertEqual(result.post_state.storage, {})
        self.assertIn("overflow_wrapped", {flag.kind for flag in result.flags})

    def test_failed_unchecked_send(self):
        """An ignored failing send is flagged and execution continues"""
        banana = load("banana")
        world = deploy(banana, storage={"credit[1]": 5})
        result = call(banana, world, "withdraw", 5)
        self.assertEqual(result.status, Status.SUCCESS)
        self.assertEqual(result.post_state.storage, {})
        self.assertIn("unchecked_send_failed", {flag.kind for flag in result.flags})

    def test_deadline(self):
        """A passed deadline aborts long executions"""
        loops = load("loops")
        env = ExecutionEnv(1, "sum", (5000,))
        with self.assertRaises(ExecutionTimeout):
            execute(loops, deploy(loops), env, deadline=time.monotonic() - 1)


###########################
# Gas-changing mutations
###########################


class MutantGasTests(TestCase):
    def setUp(self):
        self.loops = load("loops")

    def test_inserted_exit_reduces_gas(self):
        """Clearing the loop flag right after setting it skips the loop"""
        mutant = loop_skipping_mutant(self.loops)
        before = call(self.loops, deploy(self.loops), "drain", 3)
        after = call(mutant, deploy(mutant), "drain", 3)
        self.assertEqual(after.status, Status.SUCCESS)
        self.assertLess(after.gas_used, before.gas_used)

    def test_moved_increment_runs_out_of_gas(self):
        """Moving the increment out of the loop never terminates"""
        mutant = runaway_mutant(self.loops)
        for limit in (1_000, 1_000_000):
            with self.subTest(gas_limit=limit):
                result = call(mutant, deploy(mutant), "climb", gas_limit=limit)
                self.assertEqual(result.status, Status.OUT_OF_GAS)
                self.assertEqual(result.gas_used, limit)
        original = call(self.loops, deploy(self.loops), "climb")
        self.assertEqual(original.return_value, 102)


##############
# Reentrancy
##############


class AdversaryTests(TestCase):
    def setUp(self):
        config = AdversaryConfig(address=ATTACKER, function="withdraw")
        self.hook = adversary_callback(config)

    def test_reentrancy_drains_victim(self):
        """Re-entering withdraw pays the attacker twice"""
        bank, world = bank_with_attacker("bank")
        env = ExecutionEnv(ATTACKER, "withdraw")
        result = execute(bank, world, env, hook=self.hook)
        self.assertEqual(result.status, Status.SUCCESS)
        self.assertEqual(result.post_state.balance(ATTACKER), 20)
        self.assertLess(result.post_state.balance(CONTRACT_ADDRESS), 30 - 10)

    def test_state_first_contract_resists(self):
        """Zeroing the credit before the send leaves nothing to re-enter for"""
        clean, world = bank_with_attacker("clean")
        env = ExecutionEnv(ATTACKER, "withdraw")
        result = execute(clean, world, env, hook=self.hook)
        self.assertEqual(result.status, Status.SUCCESS)
        self.assertEqual(result.post_state.balance(ATTACKER), 10)
        self.assertEqual(result.post_state.balance(CONTRACT_ADDRESS), 20)

    def test_other_receivers_do_not_reenter(self):
        """Only sends to the attacker address trigger the hook"""
        bank, world = bank_with_attacker("bank")
        result = execute(bank, world, ExecutionEnv(1, "withdraw"), hook=self.hook)
        self.assertEqual(result.post_state.balance(1), 120)
        self.assertEqual(result.post_state.balance(CONTRACT_ADDRESS), 10)


############
# Run test
############


class RunTestTests(TestCase):
    def setUp(self):
        self.refund = load("refund")
        self.records = records("refund")

    def test_recorded_calls_pass(self):
        """Every recorded transaction replays on its own contract"""
        for record in self.records:
            with self.subTest(call=record.call.function):
                self.assertTrue(run_test(self.refund, record).passed)

    def test_failing_require_is_recorded(self):
        """A second payment by the same caller was recorded as reverted"""
        self.assertEqual(self.records[-1].status, "require_failed")
        self.assertTrue(run_test(self.refund, self.records[-1]).passed)

    def test_status_mismatch(self):
        """A different outcome fails with a status reason"""
        record = self.records[0].model_copy(update={"status": "require_failed"})
        verdict = run_test(self.refund, record)
        self.assertFalse(verdict.passed)
        self.assertTrue(verdict.reason.startswith("status mismatch"))

    def test_storage_mismatch(self):
        """A different post-state storage fails naming the slot"""
        record = self.records[0]
        post = dict(record.post_state)
        post[CONTRACT_ADDRESS] = AccountSlice(
            balance=post[CONTRACT_ADDRESS].balance, storage={"paid[1]": 24}
        )
        verdict = run_test(self.refund, record.model_copy(update={"post_state": post}))
        self.assertFalse(verdict.passed)
        self.assertIn("paid[1]", verdict.reason)

    def test_balance_mismatch(self):
        """A different post-state balance fails naming the account"""
        record = self.records[0]
        post = dict(record.post_state)
        post[1] = AccountSlice(balance=post[1].balance + 1)
        verdict = run_test(self.refund, record.model_copy(update={"post_state": post}))
        self.assertFalse(verdict.passed)
        self.assertTrue(verdict.reason.startswith("balance mismatch at 1"))

    def test_unknown_function(self):
        """A contract without the recorded function cannot execute the test"""
        verdict = run_test(load("token"), self.records[0])
        self.assertFalse(verdict.passed)
        self.assertIn("unknown function 'pay'", verdict.reason)
