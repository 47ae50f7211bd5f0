"""Desk-scale execution of the generated state machine.

A World holds named accounts with integer balances, the contract's own
balance, the current state, the flag assignment, and two append-only
logs. Calls are pure: `call` returns a fresh World and the record of
what happened. A reverted call changes nothing but the call log.

Guard evaluation order per call: caller funds, payability, role, state,
call value, flag preconditions in declaration order. The first failing
guard reverts with its message. Internal calls (fidelity mode) run with
the original caller's identity, so a role-guarded callee inspects the
outer caller; any revert inside unwinds the whole call.

Money only flows in: a payable call moves the call value from the
caller to the contract balance, and no generated function pays out, so
the sum of all balances is constant across any call.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .codegen import CallFn, EmitEvent, MachineIR, SetFlag, SetState

__all__ = [
    "SimError",
    "CallRecord",
    "World",
    "deploy",
    "call",
    "parse_script",
    "run_script",
    "render_trace",
    "co_simulate",
]

EventEntry = tuple  # (sender role, receiver role, message)


class SimError(Exception):
    """Misuse of the simulator itself: unknown functions or accounts,
    bad bindings, malformed scripts. Distinct from a revert, which is a
    normal, recorded outcome."""


@dataclass(frozen=True)
class CallRecord:
    caller: str
    function: str
    value: int
    ok: bool
    revert_message: str | None = None
    events: tuple[EventEntry, ...] = ()


@dataclass(frozen=True)
class World:
    ir: MachineIR = field(compare=False, repr=False)
    bindings: tuple[tuple[str, str], ...]  # (role name, account)
    amounts: tuple[tuple[str, int], ...]  # (param, value)
    accounts: tuple[tuple[str, int], ...]  # (account, balance)
    contract_balance: int
    current_state: str
    flag_values: tuple[tuple[str, bool], ...]
    event_log: tuple[EventEntry, ...] = ()
    call_log: tuple[CallRecord, ...] = ()

    def balance(self, account: str) -> int:
        return dict(self.accounts)[account]

    def flag(self, name: str) -> bool:
        return dict(self.flag_values)[name]


def deploy(
    ir: MachineIR,
    bindings: dict[str, str],
    amounts: dict[str, int],
    initial_balance: int = 1000,
) -> World:
    """Create a fresh World in the Created state.

    Every role must be bound to its own account and every amount
    parameter given a value; leftovers in either map are rejected."""
    role_names = [role for role, _agent in ir.roles]
    for role in role_names:
        if role not in bindings:
            raise SimError(f"no account bound for role '{role}'")
    for role in bindings:
        if role not in role_names:
            raise SimError(f"binding for unknown role '{role}'")
    accounts = [bindings[role] for role in role_names]
    if len(set(accounts)) != len(accounts):
        raise SimError("two roles share one account; bind distinct accounts")
    for param in ir.params:
        if param not in amounts:
            raise SimError(f"no value given for amount parameter '{param}'")
    for param in amounts:
        if param not in ir.params:
            raise SimError(f"value given for unknown parameter '{param}'")
    if initial_balance < 0:
        raise SimError("initial balance must be non-negative")
    return World(
        ir=ir,
        bindings=tuple((role, bindings[role]) for role in role_names),
        amounts=tuple((p, int(amounts[p])) for p in ir.params),
        accounts=tuple((a, initial_balance) for a in accounts),
        contract_balance=0,
        current_state=ir.states[0],
        flag_values=tuple((f, False) for f, _comment in ir.flags),
    )


class _Revert(Exception):
    pass


class _Draft:
    """Mutable working copy that a revert simply discards."""

    def __init__(self, world: World):
        self.accounts = dict(world.accounts)
        self.contract_balance = world.contract_balance
        self.state = world.current_state
        self.flags = dict(world.flag_values)
        self.events: list[EventEntry] = []


def call(
    world: World, caller: str, function: str, value: int = 0
) -> tuple[World, CallRecord]:
    """Execute one call. Reverts are recorded, not raised; only misuse
    (unknown function or account) raises SimError."""
    ir = world.ir
    try:
        fn = ir.function(function)
    except KeyError:
        raise SimError(f"unknown function '{function}'") from None
    bindings = dict(world.bindings)
    amounts = dict(world.amounts)
    accounts = dict(world.accounts)
    if caller not in accounts:
        raise SimError(f"unknown account '{caller}'")
    if value < 0:
        raise SimError("call value must be non-negative")

    draft = _Draft(world)

    def run(fn, value: int) -> None:
        # role and state guards mirror the emitted modifiers
        if caller != bindings[fn.role_guard]:
            raise _Revert(dict(ir.role_messages)[fn.agent])
        if fn.state_guard is not None and draft.state != fn.state_guard:
            raise _Revert(ir.state_message)
        if fn.value_guard is not None and value != amounts[fn.value_guard]:
            raise _Revert(fn.value_message)
        for flag, wanted, message in fn.flag_preconditions:
            if draft.flags[flag] != wanted:
                raise _Revert(message)
        for effect in fn.effects:
            if isinstance(effect, SetState):
                draft.state = effect.state
            elif isinstance(effect, SetFlag):
                draft.flags[effect.flag] = True
            elif isinstance(effect, EmitEvent):
                draft.events.append(
                    (effect.sender, effect.receiver, effect.message)
                )
            elif isinstance(effect, CallFn):
                # internal call: same caller identity, same call value
                run(ir.function(effect.name), value)
        if fn.finalize and ir.finalization_state is not None:
            if draft.state == ir.finalization_state and all(
                draft.flags[f] for f in ir.finalization_flags
            ):
                draft.state = "Finalized"

    try:
        if fn.private:
            raise _Revert(f"{function} is private")
        if value > draft.accounts[caller]:
            raise _Revert("insufficient funds")
        if fn.value_guard is None and value > 0:
            raise _Revert(f"{function} is not payable")
        draft.accounts[caller] -= value
        draft.contract_balance += value
        run(fn, value)
    except _Revert as r:
        record = CallRecord(caller, function, value, ok=False, revert_message=str(r))
        return replace(world, call_log=world.call_log + (record,)), record

    record = CallRecord(
        caller, function, value, ok=True, events=tuple(draft.events)
    )
    new_world = replace(
        world,
        accounts=tuple(draft.accounts.items()),
        contract_balance=draft.contract_balance,
        current_state=draft.state,
        flag_values=tuple(draft.flags.items()),
        event_log=world.event_log + tuple(draft.events),
        call_log=world.call_log + (record,),
    )
    return new_world, record


def parse_script(text: str) -> list[tuple[str, str, int]]:
    """One call per line: `<account> <function> [value=<n>]`. Blank
    lines and `#` comments are skipped."""
    calls: list[tuple[str, str, int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) == 2:
            account, function = parts
            value = 0
        elif len(parts) == 3:
            account, function, tail = parts
            if not tail.startswith("value=") or not tail[6:].isdigit():
                raise SimError(
                    f"script line {lineno}: expected value=<n>, found '{tail}'"
                )
            value = int(tail[6:])
        else:
            raise SimError(
                f"script line {lineno}: expected '<account> <function> "
                f"[value=<n>]', found '{line}'"
            )
        calls.append((account, function, value))
    return calls


def run_script(
    ir: MachineIR,
    script: list[tuple[str, str, int]],
    bindings: dict[str, str],
    amounts: dict[str, int],
    initial_balance: int = 1000,
) -> tuple[World, list[CallRecord]]:
    """Deploy and fold the script through `call`. Reverts never stop
    the run; they are recorded like any other outcome."""
    world = deploy(ir, bindings, amounts, initial_balance)
    records: list[CallRecord] = []
    for account, function, value in script:
        world, record = call(world, account, function, value)
        records.append(record)
    return world, records


def render_trace(world: World) -> str:
    """Deterministic text trace of a finished run: one line per call
    with its events indented, then the final state, flags, balances."""
    out: list[str] = []
    for record in world.call_log:
        head = f"call {record.caller} {record.function}"
        if record.value:
            head += f" value={record.value}"
        if record.ok:
            out.append(f"{head} -> OK")
            for sender, receiver, message in record.events:
                out.append(f"  event {sender} -> {receiver}: {message}")
        else:
            out.append(f'{head} -> REVERT "{record.revert_message}"')
    out.append("")
    out.append(f"final state: {world.current_state}")
    out.append("flags:")
    for flag, value in world.flag_values:
        out.append(f"  {flag} = {'true' if value else 'false'}")
    out.append("balances:")
    for account, balance in world.accounts:
        out.append(f"  {account} = {balance}")
    out.append(f"  contract = {world.contract_balance}")
    return "\n".join(out) + "\n"


def co_simulate(contract, world: World) -> list[str]:
    """Replay the world's successful calls against the contract's own
    transition semantics and compare endpoints.

    Returns a list of discrepancies (empty means the run conforms):
    every successful call must map to an accepted transition, and the
    machine must sit in Finalized exactly when no obligation is left
    active."""
    from .semantics import ContractSemantics, StepError

    sem = ContractSemantics(contract)
    state = sem.initial_state()
    issues: list[str] = []
    for record in world.call_log:
        if not record.ok:
            continue
        fn = world.ir.function(record.function)
        if fn.event is None:
            continue
        try:
            state = sem.step(state, fn.event)
        except StepError as exc:
            issues.append(
                f"call {record.function} performed {fn.event[0]} "
                f"{fn.event[1]}, which the contract rejects: {exc}"
            )
    open_obligations = sorted(
        str(n) for n in state.active if n.kind == "O"
    )
    finalized = world.current_state == "Finalized"
    if finalized and open_obligations:
        issues.append(
            "machine is Finalized but obligations remain: "
            + "; ".join(open_obligations)
        )
    if not finalized and not open_obligations:
        issues.append(
            "all obligations are discharged but the machine is in "
            f"{world.current_state}, not Finalized"
        )
    return issues
