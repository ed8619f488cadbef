"""Concrete interpreter for the supported x86_64 subset.

This is the independent check on the lifter: it executes parsed instructions
directly against a register file and a word-addressed stack and shares no
code with ``semantics``. Syscalls are recorded, never performed.
"""

from __future__ import annotations

import hashlib
import random
import struct
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .asm import GPRS, MASK64, Corpus, Gadget, Immediate, Instruction, RegisterRef

DEFAULT_BUDGET = 100_000
STACK_SLACK = 64
# stack word 0 sits at this address; rsp mirrors the word index
STACK_BASE = 0x7FFF_FFFF_0000

SYSCALL_ARG_REGS = ("rax", "rdi", "rsi", "rdx", "r10", "r8", "r9")
_MASKS = {64: MASK64, 32: 0xFFFF_FFFF, 16: 0xFFFF, 8: 0xFF}


class EmuFault(Exception):
    kind = "EmuFault"

    def __init__(self, message: str = "", *, gadget: int | None = None):
        super().__init__(message)
        self.gadget = gadget


class DivideError(EmuFault):
    kind = "DivideError"


class StackOverrun(EmuFault):
    kind = "StackOverrun"


class BudgetExhausted(EmuFault):
    kind = "BudgetExhausted"


class UnsupportedInstruction(EmuFault):
    kind = "UnsupportedInstruction"


class UnresolvedAddress(EmuFault):
    kind = "UnresolvedAddress"


@dataclass
class MachineState:
    regs: dict[str, int]
    stack: list[int]
    sp: int  # index of the word rsp points at
    budget: int = DEFAULT_BUDGET
    limit: int | None = None  # one past the last payload word

    def __post_init__(self) -> None:
        self.regs = {r: self.regs.get(r, 0) & MASK64 for r in GPRS}
        if self.limit is None:
            self.limit = len(self.stack)
        self._sync_rsp()

    def _sync_rsp(self) -> None:
        self.regs["rsp"] = (STACK_BASE + 8 * self.sp) & MASK64

    def copy(self) -> "MachineState":
        return MachineState(dict(self.regs), list(self.stack), self.sp, self.budget, self.limit)

    def digest(self) -> str:
        blob = struct.pack("<16Q", *(self.regs[r] for r in GPRS))
        return hashlib.sha256(blob).hexdigest()[:16]


def make_state(regs: Mapping[str, int] | None = None, words: Sequence[int] = (),
               slack: int = STACK_SLACK, budget: int = DEFAULT_BUDGET) -> MachineState:
    """A machine whose rsp points at ``words[0]`` with ``slack`` free words below."""
    stack = [0] * slack + [w & MASK64 for w in words]
    return MachineState(dict(regs or {}), stack, slack, budget, len(stack))


@dataclass(frozen=True)
class SyscallEvent:
    gadget: int
    regs: dict

    def args(self) -> dict[str, int]:
        return {r: self.regs[r] for r in SYSCALL_ARG_REGS}


@dataclass
class TraceEntry:
    gadget_offset: int
    instruction: str
    state_after: str


@dataclass
class Trace:
    entries: list[TraceEntry] = field(default_factory=list)

    def to_json(self) -> list[dict]:
        return [{"gadget": f"{e.gadget_offset:#x}", "instruction": e.instruction,
                 "state": e.state_after} for e in self.entries]


# --- register access ---------------------------------------------------------


def _sx(value: int, width: int) -> int:
    value &= _MASKS[width]
    return value - (1 << width) if value >> (width - 1) else value


def _get(s: MachineState, ref: RegisterRef) -> int:
    full = s.regs[ref.canonical]
    if ref.lane == "high":
        return (full >> 8) & 0xFF
    return full & _MASKS[ref.width]


def _set(s: MachineState, ref: RegisterRef, value: int) -> None:
    if ref.canonical == "rsp":
        raise UnsupportedInstruction("write to rsp as data")
    if ref.width == 64:
        s.regs[ref.canonical] = value & MASK64
    elif ref.width == 32:
        s.regs[ref.canonical] = value & 0xFFFF_FFFF  # upper half cleared
    else:
        shift = 8 if ref.lane == "high" else 0
        m = _MASKS[ref.width] << shift
        old = s.regs[ref.canonical]
        s.regs[ref.canonical] = (old & ~m & MASK64) | ((value & _MASKS[ref.width]) << shift)


def _value(s: MachineState, op) -> int:
    if isinstance(op, Immediate):
        return op.value & MASK64
    if isinstance(op, RegisterRef):
        if op.canonical == "rsp":
            raise UnsupportedInstruction("rsp read as data")
        return _get(s, op)
    raise UnsupportedInstruction(f"operand {op}")


def _push(s: MachineState, value: int) -> None:
    if s.sp == 0:
        raise StackOverrun("push below stack bottom")
    s.sp -= 1
    s.stack[s.sp] = value & MASK64
    s._sync_rsp()


def _pop(s: MachineState) -> int:
    if s.sp >= len(s.stack):
        raise StackOverrun("pop past stack top")
    v = s.stack[s.sp]
    s.sp += 1
    s._sync_rsp()
    return v


# --- instruction execution -----------------------------------------------------


def _shift(mnemonic: str, value: int, count: int, width: int) -> int:
    count &= 63 if width == 64 else 31
    mask = _MASKS[width]
    value &= mask
    if mnemonic in ("shl", "sal"):
        return (value << count) & mask
    if mnemonic == "shr":
        return value >> count
    if mnemonic == "sar":
        return (_sx(value, width) >> count) & mask
    count %= width
    if mnemonic == "ror":
        count = (width - count) % width
    return ((value << count) | (value >> (width - count))) & mask


def _trunc_div(a: int, b: int) -> tuple[int, int]:
    q = abs(a) // abs(b)
    if (a < 0) != (b < 0):
        q = -q
    return q, a - q * b


def execute_instruction(s: MachineState, insn: Instruction) -> None:
    """Execute one non-control-flow instruction in place."""
    m, ops = insn.mnemonic, insn.operands
    if insn.has_memory:
        raise UnsupportedInstruction(f"memory operand in {insn}")
    if m == "push":
        op = ops[0]
        if isinstance(op, RegisterRef) and (op.width != 64 or op.canonical == "rsp"):
            raise UnsupportedInstruction(str(insn))
        _push(s, _value(s, op))
        return
    if m == "pop":
        op = ops[0]
        if op.width != 64 or op.canonical == "rsp":
            raise UnsupportedInstruction(str(insn))
        _set(s, op, _pop(s))
        return
    dest = ops[0] if ops else None
    if m in ("add", "sub") and dest.canonical == "rsp":
        if dest.width != 64 or not isinstance(ops[1], Immediate) or ops[1].value % 8:
            raise UnsupportedInstruction(str(insn))
        delta = ops[1].value // 8 * (1 if m == "add" else -1)
        new_sp = s.sp + delta
        if not 0 <= new_sp <= len(s.stack):
            raise StackOverrun(str(insn))
        s.sp = new_sp
        s._sync_rsp()
        return
    w = dest.width if dest is not None else 64
    mask = _MASKS[w]
    if m == "mov":
        _set(s, dest, _value(s, ops[1]))
    elif m in ("add", "sub", "and", "or", "xor"):
        a, b = _value(s, dest), _value(s, ops[1])
        r = {"add": a + b, "sub": a - b, "and": a & b, "or": a | b, "xor": a ^ b}[m]
        _set(s, dest, r & mask)
    elif m == "inc":
        _set(s, dest, (_value(s, dest) + 1) & mask)
    elif m == "dec":
        _set(s, dest, (_value(s, dest) - 1) & mask)
    elif m == "neg":
        _set(s, dest, (-_value(s, dest)) & mask)
    elif m == "not":
        _set(s, dest, ~_value(s, dest) & mask)
    elif m in ("shl", "sal", "shr", "sar", "rol", "ror"):
        _set(s, dest, _shift(m, _value(s, dest), _value(s, ops[1]), w))
    elif m == "imul" and len(ops) == 3:
        _set(s, dest, (_sx(_value(s, ops[1]), w) * _sx(ops[2].value, 64)) & mask)
    elif m == "imul" and len(ops) == 2:
        _set(s, dest, (_sx(_value(s, dest), w) * _sx(_value(s, ops[1]), w)) & mask)
    elif m == "imul":
        if w not in (64, 32):
            raise UnsupportedInstruction(str(insn))
        acc, hi = RegisterRef("rax", w), RegisterRef("rdx", w)
        product = _sx(_value(s, acc), w) * _sx(_value(s, dest), w)
        _set(s, acc, product & mask)
        _set(s, hi, (product >> w) & mask)
    elif m == "idiv":
        if w not in (64, 32):
            raise UnsupportedInstruction(str(insn))
        acc, hi = RegisterRef("rax", w), RegisterRef("rdx", w)
        dividend = _sx((_value(s, hi) << w) | _value(s, acc), 2 * w) if w == 32 else \
            _sx128((_value(s, hi) << 64) | _value(s, acc))
        divisor = _sx(_value(s, dest), w)
        if divisor == 0:
            raise DivideError("divide by zero")
        q, r = _trunc_div(dividend, divisor)
        if not -(1 << (w - 1)) <= q < (1 << (w - 1)):
            raise DivideError("quotient overflow")
        _set(s, acc, q & mask)
        _set(s, hi, r & mask)
    elif m == "xchg":
        a, b = _value(s, dest), _value(s, ops[1])
        _set(s, dest, b)
        _set(s, ops[1], a)
    elif m == "xadd":
        a, b = _value(s, dest), _value(s, ops[1])
        _set(s, ops[1], a)
        _set(s, dest, (a + b) & mask)
    else:
        raise UnsupportedInstruction(str(insn))


def _sx128(v: int) -> int:
    return v - (1 << 128) if v >> 127 else v


def _tick(s: MachineState) -> None:
    if s.budget <= 0:
        raise BudgetExhausted("instruction budget exhausted")
    s.budget -= 1


def step_gadget(s: MachineState, g: Gadget, trace: Trace | None = None,
                events: list | None = None) -> tuple[MachineState, int | None]:
    """Run gadget ``g`` to its ``ret``.

    Returns the new state and the address popped by ``ret``, or None when
    the gadget ended at a bare ``syscall`` or ``ret`` found the payload
    exhausted.
    """
    s = s.copy()
    for insn in g.instructions:
        _tick(s)
        try:
            if insn.mnemonic == "ret":
                if insn.operands:
                    raise UnsupportedInstruction(str(insn))
                if s.sp == s.limit:
                    nxt = None
                else:
                    nxt = _pop(s)
                if trace is not None:
                    trace.entries.append(TraceEntry(g.offset, str(insn), s.digest()))
                return s, nxt
            if insn.mnemonic == "syscall":
                if events is None:
                    raise UnsupportedInstruction("syscall outside a payload run")
                events.append(SyscallEvent(g.offset, dict(s.regs)))
                # the instruction itself overwrites rcx (return rip) and r11 (rflags)
                s.regs["rcx"] = (g.offset + 2) & MASK64
                s.regs["r11"] = 0x202
            else:
                execute_instruction(s, insn)
        except EmuFault as exc:
            exc.gadget = g.offset
            raise
        if trace is not None:
            trace.entries.append(TraceEntry(g.offset, str(insn), s.digest()))
    return s, None


@dataclass
class RunResult:
    state: MachineState
    trace: Trace
    events: list[SyscallEvent]


def execute_payload(payload: bytes, corpus: Corpus, base: int = 0,
                    init: Mapping[str, int] | None = None,
                    budget: int = DEFAULT_BUDGET, trace: bool = False) -> RunResult:
    """Load ``payload`` as the stack and dispatch gadgets until the chain ends."""
    if len(payload) % 8:
        raise ValueError("payload length is not a multiple of 8")
    words = struct.unpack(f"<{len(payload) // 8}Q", payload)
    by_addr = {(base + g.offset) & MASK64: g for g in corpus.gadgets}
    s = make_state(init, words, budget=budget)
    tr = Trace() if trace else None
    events: list[SyscallEvent] = []
    if not words:
        return RunResult(s, tr or Trace(), events)
    nxt: int | None = _pop(s)
    while nxt is not None:
        g = by_addr.get(nxt)
        if g is None:
            raise UnresolvedAddress(f"no gadget at {nxt:#x}")
        s, nxt = step_gadget(s, g, tr, events)
        if g.is_trigger and len(g.instructions) == 1:
            break
    return RunResult(s, tr or Trace(), events)


def random_registers(rng: random.Random) -> dict[str, int]:
    return {r: rng.getrandbits(64) for r in GPRS if r != "rsp"}


@dataclass(frozen=True)
class Verdict:
    passed: bool
    register: str | None = None
    expected: int | None = None
    actual: int | None = None
    reason: str = ""

    def __str__(self) -> str:
        if self.passed:
            return "pass"
        if self.register is None:
            return f"fail: {self.reason}"
        actual = "*" if self.actual is None else f"{self.actual:#x}"
        return f"fail({self.register}, {self.expected:#x}, {actual}) {self.reason}".rstrip()


def verify_payload(payload: bytes, corpus: Corpus, objectives: Sequence[Mapping[str, int]],
                   base: int = 0, runs: int = 100, seed: int = 0) -> Verdict:
    """Execute from ``runs`` random register files; every run must hit every objective."""
    rng = random.Random(seed)
    for _ in range(runs):
        init = random_registers(rng)
        try:
            result = execute_payload(payload, corpus, base, init)
        except EmuFault as exc:
            return Verdict(False, reason=f"{exc.kind}: {exc}")
        if len(result.events) != len(objectives):
            return Verdict(False, reason=f"{len(result.events)} syscall(s) executed, "
                                         f"expected {len(objectives)}")
        for event, objective in zip(result.events, objectives):
            for reg, want in objective.items():
                got = event.regs[reg]
                if got != want & MASK64:
                    return Verdict(False, reg, want & MASK64, got)
    return Verdict(True)


def verify_chain(chain, layout, objectives: Iterable[Mapping[str, int]] | None = None,
                 corpus: Corpus | None = None, runs: int = 100, seed: int = 0) -> Verdict:
    """Emit ``layout`` and check it against the objective(s) in the emulator.

    ``chain`` may be a single Chain or a list of them; its gadgets form the
    corpus unless one is given.
    """
    from .emit import emit_payload

    chains = chain if isinstance(chain, (list, tuple)) else [chain]
    if objectives is None:
        objectives = [c.objective for c in chains]
    if corpus is None:
        gadgets = {}
        for c in chains:
            for step in c.steps:
                gadgets[step.summary.offset] = step.summary.gadget
            gadgets[c.trigger.offset] = c.trigger.gadget
        corpus = Corpus(list(gadgets.values()))
    return verify_payload(emit_payload(layout), corpus, list(objectives),
                          layout.base, runs, seed)
