"""
    Test suite for edits, patches, structural diff and the seven mutation spaces.
"""
import random
from unittest import TestCase

from gasrepair.exceptions import ApplyError, SpaceExhausted
from gasrepair.lang import NodeId, content_hash, parse, pretty_print
from gasrepair.lang import nodes as n
from gasrepair.lang.parser import parse_expression, parse_statement
from gasrepair.mutate import (
    Insert,
    Move,
    Patch,
    Position,
    Replace,
    Sampler,
    SpaceId,
    apply,
    apply_edit,
    diff,
    mutate_i,
    mutate_m,
    mutate_r,
    mutation_distance,
    space_of,
    space_validity,
)
from gasrepair.mutate.edits import apply_chain
from gasrepair.mutate.synthesis import GENERATORS
from tests.fixtures import load

###############
# Test Fixtures
###############

# small contracts for exhaustive composition
FLAG = "contract Flag { bool a; function f() public { a = true; } }"
PAIR = "contract Pair { uint x; function f() public { x = 1; x = 0; } }"
STEP = "contract Step { uint x; function f() public { x = x + 1; } }"


def compositions(contract, patch, depth):
    """Every patch of at most `depth` edits extending patch, with its last contract"""
    if depth == 0:
        return
    generation = len(patch.edits)
    for tag in "MRI":
        for edit in GENERATORS[tag](contract, generation):
            try:
                mutant = apply_edit(contract, edit, generation)
            except ApplyError:
                continue
            extended = patch.extend(edit)
            yield extended
            yield from compositions(mutant, extended, depth - 1)


def chain_is_distinct(patch, base):
    """No contract repeats along the patch's edit chain"""
    hashes = [content_hash(c) for c in apply_chain(patch, base)]
    return len(set(hashes)) == len(hashes)


def require_ok_after(anchor):
    """Insert `require(ok);` after the statement at anchor"""
    return Insert(parse_statement("require(ok);"), anchor, Position.AFTER)


#########
# Edits
#########


class EditTests(TestCase):
    def setUp(self):
        self.refund = load("refund")
        self.refund_fn = self.refund.function_id("refund").path + (0,)

    def test_insert_require(self):
        """Inserting require(ok) after the unchecked send checks it"""
        edit = require_ok_after(NodeId(self.refund_fn + (3,)))
        patched = apply_edit(self.refund, edit)
        body = patched.function("refund").body.statements
        self.assertEqual(body[-1], n.Require(n.Var("ok")))
        self.assertEqual(len(body), 5)

    def test_move(self):
        """Moving a statement keeps every statement exactly once"""
        bank = load("bank")
        withdraw = bank.function_id("withdraw").path + (0,)
        edit = Move(NodeId(withdraw + (3,)), NodeId(withdraw + (5,)), Position.AFTER)
        moved = apply_edit(bank, edit)
        before = bank.function("withdraw").body.statements
        after = moved.function("withdraw").body.statements
        self.assertEqual(sorted(map(repr, before)), sorted(map(repr, after)))
        self.assertEqual(after[-1], before[3])

    def test_replace_expression(self):
        """Replace swaps one expression in place"""
        loops = load("loops")
        cond = NodeId(loops.function_id("climb").path + (0, 1, 0))
        patched = apply_edit(loops, Replace(cond, parse_expression("x < 100")))
        self.assertEqual(patched.function("climb").body.statements[1].cond.op, "<")

    def test_replace_kind_must_match(self):
        """An expression cannot replace a statement"""
        with self.assertRaises(ApplyError):
            apply_edit(self.refund, Replace(NodeId(self.refund_fn + (0,)), n.Var("x")))

    def test_stale_generation(self):
        """An edit stamped for another generation is rejected"""
        edit = require_ok_after(NodeId(self.refund_fn + (3,), 1))
        with self.assertRaises(ApplyError):
            apply_edit(self.refund, edit)

    def test_move_into_itself(self):
        """A statement cannot move into its own body"""
        loops = load("loops")
        loop = loops.function_id("sum").path + (0, 2)
        edit = Move(NodeId(loop), NodeId(loop + (1, 0)), Position.AFTER)
        with self.assertRaises(ApplyError):
            apply_edit(loops, edit)


###########
# Patches
###########


class PatchTests(TestCase):
    def setUp(self):
        self.refund = load("refund")
        body = self.refund.function_id("refund").path + (0,)
        self.first = require_ok_after(NodeId(body + (3,)))
        self.second = Replace(NodeId(body + (1, 0, 1), 1), n.IntLiteral(1))
        self.patch = Patch(content_hash(self.refund), (self.first, self.second))

    def test_apply(self):
        """Edits apply in order, each on the tree left by the previous one"""
        patched = apply(self.patch, self.refund)
        text = pretty_print(patched)
        self.assertIn("require(ok);", text)
        self.assertIn("require(amount > 1);", text)

    def test_apply_to_wrong_base(self):
        """A patch only applies to the contract it was built for"""
        with self.assertRaises(ApplyError):
            apply(self.patch, load("bank"))

    def test_identity_patch(self):
        """The empty patch yields the original"""
        empty = Patch(content_hash(self.refund))
        self.assertEqual(apply(empty, self.refund), self.refund)
        self.assertEqual(mutation_distance(empty), 0)

    def test_distance_counts_operators(self):
        """Mutation distance is the length of the operator trace"""
        self.assertEqual(mutation_distance(Patch("x", (self.first,))), 1)
        self.assertEqual(mutation_distance(self.patch), 2)
        self.assertEqual(self.patch.trace, ("I", "R"))

    def test_json(self):
        """A patch survives serialization"""
        restored = Patch.from_json(self.patch.base, self.patch.to_json())
        self.assertEqual(apply(restored, self.refund), apply(self.patch, self.refund))

    def test_malformed_json(self):
        """Unknown edit kinds are rejected"""
        with self.assertRaises(ApplyError):
            Patch.from_json("x", [{"op": "swap"}])


########
# Diff
########


class DiffTests(TestCase):
    def test_equal_trees(self):
        """Equal contracts are at distance 0"""
        self.assertEqual(diff(load("bank"), load("bank")), 0)

    def test_single_insert(self):
        """One inserted statement costs at least 1"""
        refund = load("refund")
        body = refund.function_id("refund").path + (0,)
        edit = require_ok_after(NodeId(body + (3,)))
        self.assertGreaterEqual(diff(refund, apply_edit(refund, edit)), 1)

    def test_operator_change(self):
        """Changing one operator costs exactly 1"""
        a = parse("contract C { uint x; function f() public { x = x + 1; } }")
        b = parse("contract C { uint x; function f() public { x = x - 1; } }")
        self.assertEqual(diff(a, b), 1)

    def test_symmetric(self):
        """diff(a, b) == diff(b, a)"""
        a, b = load("bank"), load("clean")
        self.assertEqual(diff(a, b), diff(b, a))
        self.assertGreater(diff(a, b), 0)


##########
# Spaces
##########


class SpaceTests(TestCase):
    def test_space_of(self):
        """A trace belongs to the space of its operator set"""
        self.assertEqual(space_of("M"), SpaceId.S1)
        self.assertEqual(space_of("RR"), SpaceId.S2)
        self.assertEqual(space_of("IMI"), SpaceId.S5)
        self.assertEqual(space_of("RIM"), SpaceId.S7)
        self.assertIsNone(space_of(""))

    def test_validity_needs_exact_operators(self):
        """A Move-only patch is in S1 and not in S4"""
        pair = parse(PAIR)
        body = pair.function_id("f").path + (0,)
        move = Move(NodeId(body + (0,)), NodeId(body + (1,)), Position.AFTER)
        patch = Patch(content_hash(pair), (move,))
        self.assertTrue(space_validity(SpaceId.S1, patch, pair))
        self.assertFalse(space_validity(SpaceId.S4, patch, pair))

    def test_validity_rejects_undone_edits(self):
        """A chain that comes back to an earlier contract is in no space"""
        pair = parse(PAIR)
        body = pair.function_id("f").path + (0,)
        there = Move(NodeId(body + (0,)), NodeId(body + (1,)), Position.AFTER)
        back = Move(NodeId(body + (0,), 1), NodeId(body + (1,), 1), Position.AFTER)
        patch = Patch(content_hash(pair), (there, back))
        self.assertEqual([s for s in SpaceId if space_validity(s, patch, pair)], [])

    def test_compositions_are_partitioned(self):
        """Every composition of up to three edits lies in exactly one space"""
        for source in (FLAG, PAIR, STEP):
            base = parse(source)
            hit = set()
            checked = 0
            for patch in compositions(base, Patch(content_hash(base)), 3):
                accepted = [s for s in SpaceId if space_validity(s, patch, base)]
                if chain_is_distinct(patch, base):
                    self.assertEqual(accepted, [space_of(patch.trace)], patch.trace)
                    hit.update(accepted)
                else:
                    self.assertEqual(accepted, [], patch.trace)
                checked += 1
            with self.subTest(contract=base.name):
                self.assertGreater(checked, 100)
                if base.name == "Pair":
                    self.assertEqual(hit, set(SpaceId))


############
# Sampling
############


class SamplerTests(TestCase):
    def test_single_statement_has_no_move(self):
        """A one-statement function offers nothing to move"""
        with self.assertRaises(SpaceExhausted):
            mutate_m(parse(FLAG), random.Random(0))

    def test_mutants_are_unseen(self):
        """Successive draws never repeat a mutant"""
        pair = parse(PAIR)
        seen = set()
        # six insert positions, four distinct results
        for _ in range(4):
            patch = mutate_i(pair, random.Random(1), seen=seen)
            self.assertEqual(patch.trace, ("I",))
        self.assertEqual(len(seen), 4)
        with self.assertRaises(SpaceExhausted):
            mutate_i(pair, random.Random(1), seen=seen)

    def test_seeded_order(self):
        """The same seed draws the same mutant"""
        step = parse(STEP)
        first = mutate_r(step, random.Random(42))
        again = mutate_r(step, random.Random(42))
        self.assertEqual(first, again)

    def test_hints_first(self):
        """With a hint on the unchecked send, the first Replace checks that send"""
        banana = load("banana")
        withdraw = banana.function_id("withdraw").path + (0,)
        hint = NodeId(withdraw + (1, 0))
        patch = mutate_r(banana, random.Random(3), hints=[hint])
        (edit,) = patch.edits
        self.assertEqual(edit.site.path[: len(withdraw) + 1], withdraw + (1,))

    def test_exhaustion(self):
        """A sampler runs dry after every distinct mutant was drawn"""
        flag = parse(FLAG)
        sampler = Sampler(SpaceId.S2, flag, Patch(content_hash(flag)), random.Random(0))
        drawn = 0
        with self.assertRaises(SpaceExhausted):
            while True:
                sampler.draw()
                drawn += 1
        self.assertEqual(drawn, 3)
        self.assertTrue(sampler.exhausted)

    def test_unreachable_space(self):
        """A patch using Move can never land in S2"""
        pair = parse(PAIR)
        body = pair.function_id("f").path + (0,)
        move = Move(NodeId(body + (0,)), NodeId(body + (1,)), Position.AFTER)
        patch = Patch(content_hash(pair), (move,))
        sampler = Sampler(SpaceId.S2, apply(patch, pair), patch, random.Random(0))
        self.assertTrue(sampler.exhausted)

    def test_runaway_move_is_in_s1(self):
        """Moving the loop increment after the loop is one of the Move mutants"""
        loops = load("loops")
        body = loops.function_id("climb").path + (0,)
        target = Move(NodeId(body + (1, 1, 0)), NodeId(body + (1,)), Position.AFTER)
        wanted = apply_edit(loops, target)
        sampler = Sampler(SpaceId.S1, loops, Patch(content_hash(loops)), random.Random(0))
        found = False
        while not found:
            _, mutant = sampler.draw()
            found = mutant == wanted
        self.assertTrue(found)
