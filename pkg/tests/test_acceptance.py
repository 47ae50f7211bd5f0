"""End-to-end acceptance gate.

Seven criteria, one test each, every test printing a single PASS/FAIL
line. Together they pin the behavior the rest of the suite explores
piecewise: conflict detection on the two purchase fixtures, checker vs
oracle agreement on random contracts, golden Solidity output, the two
canonical simulation traces, and the property families (round-trip,
conservation, atomicity, co-simulation conformity)."""

import random
import time
from pathlib import Path

from rclc.ast import pretty_print
from rclc.checker import brute_force_oracle, check
from rclc.codegen import emit_solidity, lower
from rclc.parser import parse_contract
from rclc.semantics import ContractSemantics
from rclc.simulator import call, co_simulate, deploy, parse_script, run_script

from contractgen import random_contract

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
BIND = {"buyer": "b", "seller": "s", "bank": "k", "carrier": "c"}
AMOUNTS = {"paymentAmount": 100, "shippingCosts": 10}


def load(name):
    result = parse_contract((FIXTURES / name).read_text(), file=name)
    assert result.ok, result.errors
    return result.contract


def verdict(name: str, ok: bool, detail: str = ""):
    tail = f" ({detail})" if detail else ""
    print(f"[{'PASS' if ok else 'FAIL'}] {name}{tail}")
    assert ok, f"{name}{tail}"


def test_criterion_1_conflict_reproduction():
    contract = load("purchase_conflicted.rcl")
    start = time.monotonic()
    report = check(contract)
    elapsed = time.monotonic() - start

    ok = len(report.conflicts) == 1
    conflict = report.conflicts[0] if report.conflicts else None
    if ok:
        ok = (
            (conflict.pair.performer, conflict.pair.counterparty)
            == ("c", "b")
            and conflict.action == "deliverProduct"
        )
    if ok:
        # the witness must replay to a state holding both norms
        sem = ContractSemantics(contract)
        state = sem.initial_state()
        for event in conflict.witness:
            state = sem.step(state, event)
        ok = (
            conflict.obligation in state.active
            and conflict.prohibition in state.active
        )
    if ok:
        ok = elapsed < 1.0
    verdict(
        "criterion 1: one conflict class on {c,b} deliverProduct, "
        "witness replays",
        ok,
        f"{len(report.conflicts)} conflict(s), {elapsed * 1000:.0f} ms",
    )


def test_criterion_2_fix_verification():
    contract = load("purchase_fixed.rcl")
    start = time.monotonic()
    report = check(contract)
    elapsed = time.monotonic() - start
    verdict(
        "criterion 2: corrected fixture is conflict-free",
        report.conflicts == () and elapsed < 1.0,
        f"{len(report.conflicts)} conflict(s), {elapsed * 1000:.0f} ms",
    )


def test_criterion_3_oracle_equivalence():
    rng = random.Random(20260819)
    start = time.monotonic()
    disagreements = 0
    n = 120
    for _ in range(n):
        contract = random_contract(rng, max_events=12)
        checked = {
            (c.pair.performer, c.pair.counterparty, c.action)
            for c in check(contract).conflicts
        }
        oracle = {
            (pair.performer, pair.counterparty, action)
            for pair, action in brute_force_oracle(contract)
        }
        if checked != oracle:
            disagreements += 1
    elapsed = time.monotonic() - start
    verdict(
        f"criterion 3: checker agrees with brute-force oracle on {n} "
        "random contracts",
        disagreements == 0 and elapsed < 60.0,
        f"{disagreements} disagreements, {elapsed:.1f} s",
    )


def test_criterion_4_codegen_golden_fidelity():
    conflicted = emit_solidity(
        lower(load("purchase_conflicted.rcl"), allow_conflicts=True)
    )
    corrected = emit_solidity(lower(load("purchase_fixed.rcl")))
    golden_conflicted = (FIXTURES / "purchase_conflicted.sol").read_text()
    golden_corrected = (FIXTURES / "purchase_fixed.sol").read_text()

    ok = conflicted == golden_conflicted and corrected == golden_corrected
    enum_block = (
        "    enum ContractState {\n"
        "        Created,\n"
        "        ProductBought,\n"
        "        ProductPaid,\n"
        "        PaymentNotified,\n"
        "        ProductDelivered,\n"
        "        Finalized\n"
        "    }\n"
    )
    for text in (conflicted, corrected):
        ok = ok and "pragma solidity ^0.8.0;" in text
        ok = ok and enum_block in text
        ok = ok and all(
            f"modifier only{r}()" in text for r in ("B", "S", "K", "C")
        )
        ok = ok and "modifier atState(ContractState _requiredState)" in text
    # one function per obligation (plus the root guard), none duplicated
    for name, kwargs, functions in (
        ("purchase_conflicted.rcl", {"allow_conflicts": True}, 11),
        ("purchase_fixed.rcl", {}, 12),
    ):
        ir = lower(load(name), **kwargs)
        events = [fn.event for fn in ir.functions]
        ok = ok and len(ir.functions) == functions
        ok = ok and len(set(events)) == len(events)
    verdict(
        "criterion 4: generated Solidity is byte-identical to the goldens "
        "with the expected skeleton",
        ok,
    )


def test_criterion_5_negative_trace_reproduction():
    ir = lower(load("purchase_conflicted.rcl"), allow_conflicts=True)
    script = parse_script(
        (FIXTURES / "scripts" / "conflicted_run.txt").read_text()
    )
    world, records = run_script(ir, script, BIND, AMOUNTS)
    ok = (
        len(records) == 6
        and all(r.ok for r in records[:5])
        and not records[5].ok
        and records[5].function == "deliverProduct"
        and records[5].revert_message
        == "Frete nao foi pago pelo vendedor a transportadora"
        and world.current_state == "PaymentNotified"
    )
    verdict(
        "criterion 5: delivery reverts with the freight message and the "
        "machine stalls in PaymentNotified",
        ok,
        f"final state {world.current_state}",
    )


def test_criterion_6_positive_trace_reproduction():
    ir = lower(load("purchase_fixed.rcl"))
    script = parse_script(
        (FIXTURES / "scripts" / "corrected_run.txt").read_text()
    )
    world, records = run_script(ir, script, BIND, AMOUNTS)
    ok = (
        len(records) == 12
        and all(r.ok for r in records)
        and world.current_state == "Finalized"
    )
    verdict(
        "criterion 6: the corrected contract runs the full script and "
        "finalizes",
        ok,
        f"final state {world.current_state}",
    )


def test_criterion_7_property_suites():
    violations = []

    # parse . pretty_print is the identity on 500 generated contracts
    rng = random.Random(20260819)
    for i in range(500):
        contract = random_contract(rng)
        result = parse_contract(pretty_print(contract))
        if not result.ok or result.contract != contract:
            violations.append(f"round-trip {i}")

    # conservation and revert atomicity over 200 random scripts
    rng = random.Random(424242)
    ir = lower(load("purchase_fixed.rcl"))
    functions = [fn.name for fn in ir.functions]
    accounts = list(BIND.values())
    values = [0, 0, 10, 100, 3]
    for i in range(200):
        world = deploy(ir, BIND, AMOUNTS)
        total = (
            sum(b for _a, b in world.accounts) + world.contract_balance
        )
        for _ in range(rng.randint(1, 15)):
            before = world
            world, record = call(
                world,
                rng.choice(accounts),
                rng.choice(functions),
                rng.choice(values),
            )
            now = sum(b for _a, b in world.accounts) + world.contract_balance
            if now != total:
                violations.append(f"conservation script {i}")
            if not record.ok and (
                world.accounts != before.accounts
                or world.contract_balance != before.contract_balance
                or world.current_state != before.current_state
                or world.flag_values != before.flag_values
                or world.event_log != before.event_log
            ):
                violations.append(f"atomicity script {i}")

    # co-simulation conformity on the corrected fixture
    contract = load("purchase_fixed.rcl")
    script = parse_script(
        (FIXTURES / "scripts" / "corrected_run.txt").read_text()
    )
    world, _ = run_script(ir, script, BIND, AMOUNTS)
    issues = co_simulate(contract, world)
    violations.extend(f"co-simulation: {i}" for i in issues)

    verdict(
        "criterion 7: round-trip, conservation, atomicity, and "
        "co-simulation properties hold",
        not violations,
        f"{len(violations)} violation(s)",
    )
