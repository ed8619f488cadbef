"""Register-equation IR for gadgets.

A gadget is lifted into equations ``dest = rhs`` whose right-hand sides only
read register values at gadget entry (``Reg``) and attacker-controlled stack
words (``Free``). Lifting first produces raw program-order writes, in which
``Reg`` reads the *current* value and temporaries named ``$tN`` carry pushed
values and exchange scratch; ``fold_equations`` then substitutes those away.

All values are unsigned 64-bit integers in ``[0, 2**64)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

from .asm import (
    BINARY_ALU,
    DATA_REGS,
    GPRS,
    MASK64,
    SHIFTS,
    UNARY_ALU,
    Gadget,
    Immediate,
    Instruction,
    RegisterRef,
    alias_for,
)

WIDTH_MASK = {64: MASK64, 32: 0xFFFFFFFF, 16: 0xFFFF, 8: 0xFF}


class EvalFault(ArithmeticError):
    pass


class DivisionByZero(EvalFault):
    pass


class DivisionOverflow(EvalFault):
    pass


class UnknownValue(LookupError):
    """Raised when an expression reads a register with no known value."""


def signed(value: int, width: int = 64) -> int:
    value &= WIDTH_MASK[width]
    return value - (1 << width) if value >> (width - 1) else value


# --- IR nodes -------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: int


@dataclass(frozen=True)
class Reg:
    name: str


@dataclass(frozen=True)
class Free:
    slot: int


@dataclass(frozen=True)
class Var:
    """Named unknown; the chain search uses these for bound stack words."""

    key: tuple


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "RValue"
    right: "RValue"
    width: int = 64  # operand width for shifts and rotates


@dataclass(frozen=True)
class UnOp:
    op: str
    operand: "RValue"


@dataclass(frozen=True)
class ZExt32:
    operand: "RValue"


@dataclass(frozen=True)
class Insert:
    base: "RValue"
    sub: "RValue"
    width: int
    lane: str = "low"


@dataclass(frozen=True)
class MulHigh:
    """High half of the signed product of two width-bit values."""

    left: "RValue"
    right: "RValue"
    width: int = 64


@dataclass(frozen=True)
class DivWide:
    """Signed division of the double-width value high:low by divisor."""

    op: str  # "div" quotient, "mod" remainder
    high: "RValue"
    low: "RValue"
    divisor: "RValue"
    width: int = 64


@dataclass(frozen=True)
class Poison:
    reason: str  # "zero" or "overflow"


RValue = Union[Const, Reg, Free, Var, BinOp, UnOp, ZExt32, Insert, MulHigh, DivWide, Poison]

BINOPS = frozenset({"add", "sub", "and", "or", "xor", "mul", "div", "mod",
                    "shl", "shr", "sar", "rol", "ror"})
UNOPS = frozenset({"neg", "not"})


def children(node: RValue) -> tuple:
    if isinstance(node, BinOp):
        return (node.left, node.right)
    if isinstance(node, (UnOp, ZExt32)):
        return (node.operand,)
    if isinstance(node, Insert):
        return (node.base, node.sub)
    if isinstance(node, MulHigh):
        return (node.left, node.right)
    if isinstance(node, DivWide):
        return (node.high, node.low, node.divisor)
    return ()


def walk(node: RValue):
    stack = [node]
    seen = set()
    while stack:
        n = stack.pop()
        if id(n) in seen:
            continue
        seen.add(id(n))
        yield n
        stack.extend(children(n))


def regs_read(node: RValue) -> set[str]:
    return {n.name for n in walk(node) if isinstance(n, Reg)}


def contains(node: RValue, kinds) -> bool:
    return any(isinstance(n, kinds) for n in walk(node))


# --- concrete operator semantics ------------------------------------------


def _shift_count(count: int, width: int) -> int:
    return count & (63 if width == 64 else 31)


def apply_binop(op: str, a: int, b: int, width: int = 64) -> int:
    if op == "add":
        return (a + b) & MASK64
    if op == "sub":
        return (a - b) & MASK64
    if op == "and":
        return a & b
    if op == "or":
        return a | b
    if op == "xor":
        return a ^ b
    if op == "mul":
        return (a * b) & MASK64
    if op in ("div", "mod"):
        sa, sb = signed(a), signed(b)
        if sb == 0:
            raise DivisionByZero("division by zero")
        q = abs(sa) // abs(sb) * (1 if (sa < 0) == (sb < 0) else -1)
        return (q if op == "div" else sa - q * sb) & MASK64
    mask = WIDTH_MASK[width]
    c = _shift_count(b, width)
    if op == "shl":
        return (a << c) & MASK64
    if op == "shr":
        return (a & mask) >> c
    if op == "sar":
        return (signed(a, width) >> c) & MASK64
    if op in ("rol", "ror"):
        c %= width
        v = a & mask
        if op == "ror":
            c = (width - c) % width
        return ((v << c) | (v >> (width - c))) & mask
    raise ValueError(f"unknown operator {op!r}")


def apply_mulhigh(a: int, b: int, width: int) -> int:
    return ((signed(a, width) * signed(b, width)) >> width) & WIDTH_MASK[width]


def apply_divwide(op: str, high: int, low: int, divisor: int, width: int) -> int:
    mask = WIDTH_MASK[width]
    dividend = signed(((high & mask) << width) | (low & mask), 2 * width) if width < 64 else \
        _signed128(((high & mask) << 64) | (low & mask))
    d = signed(divisor, width)
    if d == 0:
        raise DivisionByZero("idiv by zero")
    q = abs(dividend) // abs(d) * (1 if (dividend < 0) == (d < 0) else -1)
    if not -(1 << (width - 1)) <= q < 1 << (width - 1):
        raise DivisionOverflow("idiv quotient overflow")
    return (q if op == "div" else dividend - q * d) & mask


def _signed128(v: int) -> int:
    return v - (1 << 128) if v >> 127 else v


def insert_bits(base: int, sub: int, width: int, lane: str) -> int:
    shift = 8 if lane == "high" else 0
    field_mask = WIDTH_MASK[width] << shift
    return (base & ~field_mask & MASK64) | ((sub & WIDTH_MASK[width]) << shift)


def evaluate(node: RValue, regs: Mapping[str, int], free: Sequence[int] = (),
             vars: Mapping | None = None, _memo: dict | None = None) -> int:
    """Evaluate ``node`` with ``Reg`` reads from ``regs`` and ``Free`` from ``free``.

    A register missing from ``regs`` raises UnknownValue.
    """
    memo = {} if _memo is None else _memo
    key = id(node)
    if key in memo:
        return memo[key]

    def ev(n):
        return evaluate(n, regs, free, vars, memo)

    if isinstance(node, Const):
        out = node.value
    elif isinstance(node, Reg):
        try:
            out = regs[node.name]
        except KeyError:
            raise UnknownValue(node.name) from None
    elif isinstance(node, Free):
        out = free[node.slot]
    elif isinstance(node, Var):
        if vars is None or node.key not in vars:
            raise UnknownValue(node.key)
        out = vars[node.key]
    elif isinstance(node, BinOp):
        out = apply_binop(node.op, ev(node.left), ev(node.right), node.width)
    elif isinstance(node, UnOp):
        v = ev(node.operand)
        out = (-v) & MASK64 if node.op == "neg" else ~v & MASK64
    elif isinstance(node, ZExt32):
        out = ev(node.operand) & 0xFFFFFFFF
    elif isinstance(node, Insert):
        out = insert_bits(ev(node.base), ev(node.sub), node.width, node.lane)
    elif isinstance(node, MulHigh):
        out = apply_mulhigh(ev(node.left), ev(node.right), node.width)
    elif isinstance(node, DivWide):
        out = apply_divwide(node.op, ev(node.high), ev(node.low), ev(node.divisor), node.width)
    elif isinstance(node, Poison):
        raise (DivisionByZero if node.reason == "zero" else DivisionOverflow)("poisoned constant")
    else:
        raise TypeError(f"not an RValue: {node!r}")
    memo[key] = out
    return out


# --- simplification and folding -------------------------------------------

ZERO = Const(0)


def _rebuild(node: RValue, kids: tuple) -> RValue:
    if isinstance(node, BinOp):
        return BinOp(node.op, kids[0], kids[1], node.width)
    if isinstance(node, UnOp):
        return UnOp(node.op, kids[0])
    if isinstance(node, ZExt32):
        return ZExt32(kids[0])
    if isinstance(node, Insert):
        return Insert(kids[0], kids[1], node.width, node.lane)
    if isinstance(node, MulHigh):
        return MulHigh(kids[0], kids[1], node.width)
    if isinstance(node, DivWide):
        return DivWide(node.op, kids[0], kids[1], kids[2], node.width)
    return node


def simplify_node(node: RValue) -> RValue:
    """Local rewrites on a node whose children are already simplified."""
    kids = children(node)
    if not kids:
        return node
    for k in kids:
        if isinstance(k, Poison):
            return k
    if all(isinstance(k, Const) for k in kids):
        try:
            return Const(evaluate(node, {}))
        except DivisionByZero:
            return Poison("zero")
        except DivisionOverflow:
            return Poison("overflow")
    if isinstance(node, ZExt32) and isinstance(node.operand, ZExt32):
        return node.operand
    if isinstance(node, BinOp):
        a, b, op = node.left, node.right, node.op
        if a == b:
            if op in ("xor", "sub") and not _may_trap(a):
                return ZERO
            if op in ("and", "or"):
                return a
        if op in ("add", "or", "xor", "sub") and b == ZERO:
            return a
        if op in ("add", "or", "xor") and a == ZERO:
            return b
        if op in ("and", "mul") and ZERO in (a, b) and not (_may_trap(a) or _may_trap(b)):
            return ZERO
        if op == "and" and b == Const(MASK64):
            return a
    return node


def _may_trap(node: RValue) -> bool:
    # dropping a subterm that can fault would hide the fault
    return any(_can_trap(n) for n in walk(node))


def substitute(node: RValue, env: Mapping[str, RValue], _memo: dict | None = None) -> RValue:
    """Replace ``Reg`` reads by ``env`` entries and simplify bottom-up."""
    memo = {} if _memo is None else _memo
    key = id(node)
    if key in memo:
        return memo[key]
    if isinstance(node, Reg):
        out = env.get(node.name, node)
    else:
        kids = children(node)
        if kids:
            new = tuple(substitute(k, env, memo) for k in kids)
            out = simplify_node(_rebuild(node, new))
        else:
            out = node
    memo[key] = out
    return out


def simplify(node: RValue) -> RValue:
    return substitute(node, {})


@dataclass(frozen=True)
class Equation:
    dest: str
    rhs: RValue
    width: int = 64  # width of the final write, used only for rendering

    def render(self) -> str:
        return render_equation(self)


def fold_equations(eqs: Sequence[Equation]) -> list[Equation]:
    """Flatten program-order writes into entry-relative equations.

    Later reads see earlier writes; the result has one equation per register
    written (temporaries dropped, identity writes elided), in first-write
    order, and is meant for simultaneous evaluation against the entry state.
    """
    env: dict[str, RValue] = {}
    widths: dict[str, int] = {}
    order: list[str] = []
    for eq in eqs:
        env[eq.dest] = substitute(eq.rhs, env)
        widths[eq.dest] = eq.width
        if eq.dest not in order:
            order.append(eq.dest)
    out = []
    for dest in order:
        if dest.startswith("$"):
            continue
        rhs = env[dest]
        if rhs == Reg(dest):
            continue
        out.append(Equation(dest, rhs, widths[dest]))
    return out


def collect_traps(eqs: Sequence[Equation], folded: Sequence[Equation]) -> tuple:
    """Division nodes computed along the way whose result the folded
    equations no longer mention; they can still trap at run time."""
    env: dict[str, RValue] = {}
    kept = {n for eq in folded for n in walk(eq.rhs) if _can_trap(n)}
    traps: list[RValue] = []
    for eq in eqs:
        env[eq.dest] = substitute(eq.rhs, env)
        for n in walk(env[eq.dest]):
            if _can_trap(n) and n not in kept and n not in traps:
                traps.append(n)
    return tuple(traps)


def _can_trap(n: RValue) -> bool:
    return isinstance(n, (DivWide, Poison)) or (isinstance(n, BinOp) and n.op in ("div", "mod"))


def eval_sequential(eqs: Sequence[Equation], entry: Mapping[str, int],
                    free: Sequence[int] = ()) -> dict[str, int]:
    """Run raw writes one after another, each read seeing the latest value."""
    state = dict(entry)
    for eq in eqs:
        state[eq.dest] = evaluate(eq.rhs, state, free)
    return {k: v for k, v in state.items() if not k.startswith("$")}


# --- lifting ----------------------------------------------------------------


class RejectReason(enum.Enum):
    UNBALANCED_PUSH = "UnbalancedPush"
    MEMORY_INSTRUCTION = "MemoryInstruction"
    UNSUPPORTED_INSTRUCTION = "UnsupportedInstruction"
    NEGATIVE_RSP_ADJUST = "NegativeRspAdjust"
    RSP_MISALIGNED = "RspMisaligned"


@dataclass(frozen=True)
class Rejection:
    gadget: Gadget
    reason: RejectReason
    detail: str = ""


@dataclass(frozen=True)
class GadgetSummary:
    gadget: Gadget
    equations: tuple[Equation, ...]
    free_slots: int = 0
    rsp_adjust: int = 0
    category: int = 1
    is_syscall_trigger: bool = False
    traps: tuple = ()  # dropped divisions that still fault at run time

    @property
    def offset(self) -> int:
        return self.gadget.offset

    @property
    def total_stack_consumed(self) -> int:
        return 8 * self.free_slots + self.rsp_adjust + 8

    @property
    def payload_words(self) -> int:
        return 1 + self.free_slots + self.rsp_adjust // 8

    @property
    def written(self) -> tuple[str, ...]:
        return tuple(eq.dest for eq in self.equations)

    @property
    def reads(self) -> set[str]:
        out: set[str] = set()
        for eq in self.equations:
            out |= regs_read(eq.rhs)
        return out

    @property
    def poisoned(self) -> bool:
        return any(contains(eq.rhs, Poison) for eq in self.equations)

    @property
    def may_fault(self) -> bool:
        """True if evaluation can trap: poisoned or a non-constant division."""
        return bool(self.traps) or any(contains(eq.rhs, (Poison, DivWide)) or
                   any(isinstance(n, BinOp) and n.op in ("div", "mod") for n in walk(eq.rhs))
                   for eq in self.equations)

    def equation_for(self, reg: str) -> Equation | None:
        for eq in self.equations:
            if eq.dest == reg:
                return eq
        return None

    def render(self) -> str:
        return render_summary(self)


class _Unsupported(Exception):
    pass


class _Reject(Exception):
    def __init__(self, reason: RejectReason, detail: str = ""):
        super().__init__(detail)
        self.reason = reason
        self.detail = detail


def _read(op) -> RValue:
    if isinstance(op, Immediate):
        return Const(op.value & MASK64)
    assert isinstance(op, RegisterRef)
    if op.canonical == "rsp":
        raise _Unsupported("rsp used as a data operand")
    r = Reg(op.canonical)
    if op.width == 64:
        return r
    if op.width == 32:
        return ZExt32(r)
    if op.lane == "high":
        return BinOp("and", BinOp("shr", r, Const(8)), Const(0xFF))
    return BinOp("and", r, Const(WIDTH_MASK[op.width]))


def _write(op: RegisterRef, value: RValue) -> Equation:
    if op.canonical == "rsp":
        raise _Unsupported("rsp written as a data register")
    if op.width == 64:
        return Equation(op.canonical, value, 64)
    if op.width == 32:
        return Equation(op.canonical, ZExt32(value), 32)
    return Equation(op.canonical, Insert(Reg(op.canonical), value, op.width, op.lane), op.width)


class _Lifter:
    def __init__(self) -> None:
        self.writes: list[Equation] = []
        self.ntemps = 0

    def temp(self, value: RValue) -> Reg:
        name = f"$t{self.ntemps}"
        self.ntemps += 1
        self.writes.append(Equation(name, value))
        return Reg(name)

    def convert(self, insn: Instruction) -> None:
        m, ops = insn.mnemonic, insn.operands
        w = self.writes
        if m == "mov":
            w.append(_write(ops[0], _read(ops[1])))
        elif m in BINARY_ALU:
            w.append(_write(ops[0], BinOp(m, _read(ops[0]), _read(ops[1]))))
        elif m in UNARY_ALU:
            d = _read(ops[0])
            rhs = {"inc": lambda: BinOp("add", d, Const(1)),
                   "dec": lambda: BinOp("sub", d, Const(1)),
                   "neg": lambda: UnOp("neg", d),
                   "not": lambda: UnOp("not", d)}[m]()
            w.append(_write(ops[0], rhs))
        elif m in SHIFTS:
            op = "shl" if m == "sal" else m
            w.append(_write(ops[0], BinOp(op, _read(ops[0]), _read(ops[1]), ops[0].width)))
        elif m == "imul" and len(ops) == 2:
            w.append(_write(ops[0], BinOp("mul", _read(ops[0]), _read(ops[1]))))
        elif m == "imul" and len(ops) == 3:
            w.append(_write(ops[0], BinOp("mul", _read(ops[1]), _read(ops[2]))))
        elif m in ("imul", "idiv"):
            src = ops[0]
            width = src.width
            if width not in (64, 32):
                raise _Unsupported(f"{m} with a {width}-bit operand")
            acc = RegisterRef("rax", width)
            hi = RegisterRef("rdx", width)
            if m == "imul":
                a, b = _read(acc), _read(src)
                lo_t = self.temp(BinOp("mul", a, b))
                hi_t = self.temp(MulHigh(a, b, width))
            else:
                h, lo, d = _read(hi), _read(acc), _read(src)
                lo_t = self.temp(DivWide("div", h, lo, d, width))
                hi_t = self.temp(DivWide("mod", h, lo, d, width))
            w.append(_write(acc, lo_t))
            w.append(_write(hi, hi_t))
        elif m == "xchg":
            t = self.temp(_read(ops[0]))
            w.append(_write(ops[0], _read(ops[1])))
            w.append(_write(ops[1], t))
        elif m == "xadd":
            t = self.temp(BinOp("add", _read(ops[0]), _read(ops[1])))
            w.append(_write(ops[1], _read(ops[0])))
            w.append(_write(ops[0], t))
        else:
            raise _Unsupported(f"{m} inside a gadget body")


def _is_rsp(op) -> bool:
    return isinstance(op, RegisterRef) and op.canonical == "rsp"


def _stack_operand(insn: Instruction):
    op = insn.operands[0]
    if isinstance(op, Immediate) and insn.mnemonic == "push":
        return op
    if not isinstance(op, RegisterRef) or op.width != 64 or op.canonical == "rsp":
        raise _Unsupported(f"{insn.mnemonic} needs a 64-bit data register")
    return op


def _lift_raw(g: Gadget):
    """Program-order writes plus stack accounting, or a Rejection."""
    lifter = _Lifter()
    pushed: list[Reg] = []
    # attacker stack words consumed, in order: "pop" or "skip"
    words: list[str] = []
    try:
        for insn in g.instructions[:-1]:
            if insn.has_memory:
                raise _Reject(RejectReason.MEMORY_INSTRUCTION, str(insn))
            m, ops = insn.mnemonic, insn.operands
            if m == "push":
                pushed.append(lifter.temp(_read(_stack_operand(insn))))
            elif m == "pop":
                dest = _stack_operand(insn)
                if pushed:
                    lifter.writes.append(Equation(dest.canonical, pushed.pop()))
                else:
                    lifter.writes.append(Equation(dest.canonical, Free(len(words))))
                    words.append("pop")
            elif m in ("add", "sub") and _is_rsp(ops[0]):
                if ops[0].width != 64 or not isinstance(ops[1], Immediate):
                    raise _Unsupported(f"unsupported stack adjustment {insn}")
                delta = ops[1].value if m == "add" else -ops[1].value
                if delta < 0:
                    raise _Reject(RejectReason.NEGATIVE_RSP_ADJUST, str(insn))
                if delta % 8:
                    raise _Reject(RejectReason.RSP_MISALIGNED, str(insn))
                n = delta // 8
                while n and pushed:
                    pushed.pop()
                    n -= 1
                words.extend(["skip"] * n)
            elif any(_is_rsp(op) for op in ops):
                raise _Unsupported(f"rsp operand in {insn}")
            else:
                lifter.convert(insn)
        last = g.instructions[-1]
        if last.mnemonic != "ret" or last.operands:
            raise _Unsupported(f"gadget ends in {last}")
        if pushed:
            raise _Reject(RejectReason.UNBALANCED_PUSH,
                          f"{len(pushed)} value(s) left on stack at ret")
    except _Unsupported as exc:
        return Rejection(g, RejectReason.UNSUPPORTED_INSTRUCTION, str(exc))
    except _Reject as exc:
        return Rejection(g, exc.reason, exc.detail)
    # interior skipped words stay numbered free slots; trailing ones become rsp_adjust
    nslots = len(words)
    while nslots and words[nslots - 1] == "skip":
        nslots -= 1
    return lifter.writes, nslots, 8 * (len(words) - nslots)


def raw_writes(g: Gadget) -> list[Equation]:
    """Unfolded program-order writes of a liftable gadget."""
    raw = _lift_raw(g)
    if isinstance(raw, Rejection):
        raise ValueError(f"gadget rejected: {raw.reason.value}")
    return raw[0]


def lift_gadget(g: Gadget) -> GadgetSummary | Rejection:
    """Lift a gadget to folded equations, or say why it can't be used."""
    if g.is_trigger:
        return GadgetSummary(g, (), is_syscall_trigger=True)
    raw = _lift_raw(g)
    if isinstance(raw, Rejection):
        return raw
    writes, nslots, adjust = raw
    eqs = tuple(fold_equations(writes))
    category = 2 if any(contains(eq.rhs, Reg) for eq in eqs) else 1
    return GadgetSummary(g, eqs, nslots, adjust, category, traps=collect_traps(writes, eqs))


def classify(s: GadgetSummary) -> int:
    """Category 2 if any right-hand side reads an entry register, else 1."""
    for eq in s.equations:
        if contains(eq.rhs, Reg):
            return 2
    return 1


def eval_equations(s: GadgetSummary, entry: Mapping[str, int],
                   free: Sequence[int]) -> dict[str, int]:
    if len(free) != s.free_slots:
        raise ValueError(f"expected {s.free_slots} free values, got {len(free)}")
    memo: dict = {}
    for t in s.traps:
        evaluate(t, entry, free, _memo=memo)
    out = dict(entry)
    for eq in s.equations:
        out[eq.dest] = evaluate(eq.rhs, entry, free, _memo=memo)
    return out


# --- rendering --------------------------------------------------------------

_INFIX = {"add": "+", "sub": "-", "and": "&", "or": "|", "xor": "^", "mul": "*",
          "div": "/", "mod": "%", "shl": "<<", "shr": ">>"}


def _const_text(v: int) -> str:
    return str(v) if v < 4096 else hex(v)


def render_rvalue(node: RValue, width: int = 64, top: bool = True) -> str:
    r = lambda n, w=width: render_rvalue(n, w, top=False)  # noqa: E731
    if isinstance(node, Const):
        return _const_text(node.value)
    if isinstance(node, Reg):
        return alias_for(node.name, width) if node.name in GPRS else node.name
    if isinstance(node, Free):
        return "*"
    if isinstance(node, Var):
        return "$" + "_".join(map(str, node.key))
    if isinstance(node, ZExt32):
        inner = render_rvalue(node.operand, 32, top)
        return inner if width == 32 else f"zext32({inner})"
    if isinstance(node, BinOp):
        if node.op in _INFIX:
            text = f"{r(node.left)} {_INFIX[node.op]} {r(node.right)}"
            return text if top else f"({text})"
        return f"{node.op}{node.width}({r(node.left)}, {r(node.right)})"
    if isinstance(node, UnOp):
        return f"{'-' if node.op == 'neg' else '~'}{r(node.operand)}"
    if isinstance(node, Insert):
        lane = "h" if node.lane == "high" else ""
        return f"insert{node.width}{lane}({r(node.base, 64)}, {r(node.sub, 64)})"
    if isinstance(node, MulHigh):
        return f"mulhi{node.width}({r(node.left)}, {r(node.right)})"
    if isinstance(node, DivWide):
        return f"{node.op}{node.width}({r(node.high)}:{r(node.low)}, {r(node.divisor)})"
    if isinstance(node, Poison):
        return f"poison({node.reason})"
    raise TypeError(node)


def render_equation(eq: Equation) -> str:
    rhs = eq.rhs
    if eq.width == 32 and eq.dest in DATA_REGS and (
            isinstance(rhs, ZExt32) or (isinstance(rhs, Const) and rhs.value <= 0xFFFFFFFF)):
        return f"{alias_for(eq.dest, 32)} = {render_rvalue(rhs, 32)}"
    return f"{eq.dest} = {render_rvalue(rhs)}"


def render_summary(s: GadgetSummary) -> str:
    parts = [render_equation(eq) for eq in s.equations]
    if s.rsp_adjust:
        parts.append(f"rsp = rsp + {s.rsp_adjust}")
    return "; ".join(parts)


def rvalue_to_json(node: RValue):
    if isinstance(node, Const):
        return {"const": node.value}
    if isinstance(node, Reg):
        return {"reg": node.name}
    if isinstance(node, Free):
        return {"free": node.slot}
    if isinstance(node, Var):
        return {"var": list(node.key)}
    if isinstance(node, Poison):
        return {"poison": node.reason}
    out = {"node": type(node).__name__,
           "args": [rvalue_to_json(k) for k in children(node)]}
    for attr in ("op", "width", "lane"):
        if hasattr(node, attr):
            out[attr] = getattr(node, attr)
    return out
