"""
    Shared fixtures: the contract corpus and its recorded regression suites.
"""
from functools import lru_cache
from pathlib import Path

from gasrepair.lang import parse, parse_file
from gasrepair.testgen import Scenario, generate_tests, record_transactions

CORPUS = Path(__file__).parent.parent / "corpus"

# targeted findings per corpus subject, by kind
EXPECTED_FINDINGS = {
    "airdrop": {"ED": 1, "RE": 0, "IO": 0, "TOD": 1},
    "auction": {"ED": 0, "RE": 1, "IO": 0, "TOD": 0},
    "banana": {"ED": 1, "RE": 1, "IO": 0, "TOD": 0},
    "bank": {"ED": 0, "RE": 1, "IO": 0, "TOD": 0},
    "clean": {"ED": 0, "RE": 0, "IO": 0, "TOD": 0},
    "dgame": {"ED": 0, "RE": 0, "IO": 3, "TOD": 2},
    "escrow": {"ED": 2, "RE": 0, "IO": 0, "TOD": 3},
    "refund": {"ED": 1, "RE": 0, "IO": 0, "TOD": 0},
    "token": {"ED": 0, "RE": 0, "IO": 2, "TOD": 0},
    "wallet": {"ED": 0, "RE": 1, "IO": 0, "TOD": 0},
}


def corpus_path(name):
    """Path of a corpus contract"""
    return CORPUS / f"{name}.msol"


def scenario_path(name):
    """Path of a corpus contract's recording scenario"""
    return CORPUS / f"{name}.scenario.json"


@lru_cache(maxsize=None)
def load(name):
    """Parsed corpus contract (contracts are immutable, so caching is safe)"""
    return parse_file(corpus_path(name))


def contract(source):
    """Parse an inline contract"""
    return parse(source)


def records(name):
    """Transactions recorded by running a corpus subject's scenario"""
    return record_transactions(load(name), Scenario.load(scenario_path(name)))


@lru_cache(maxsize=None)
def suite(name):
    """Regression tests generated from a corpus subject's scenario"""
    tests, discards = generate_tests(load(name), records(name), workers=1)
    assert not discards, discards
    return tuple(tests)


# one unchecked send and nothing else to repair
PAYOUT = """
contract Payout {
    mapping(address => uint) owed;

    function claim() public {
        uint amount = owed[msg.sender];
        owed[msg.sender] = 0;
        msg.sender.send(amount);
    }
}
"""

PAYOUT_SCENARIO = Scenario(
    accounts={1: 10, 2: 10},
    contract_balance=12,
    storage={"owed[1]": 5, "owed[2]": 7},
    calls=[
        {"caller": 1, "function": "claim"},
        {"caller": 2, "function": "claim"},
        {"caller": 1, "function": "claim"},
    ],
)


@lru_cache(maxsize=None)
def payout():
    """The Payout contract and its regression suite"""
    subject = parse(PAYOUT)
    tests, discards = generate_tests(
        subject, record_transactions(subject, PAYOUT_SCENARIO), workers=1
    )
    assert not discards, discards
    return subject, tuple(tests)
