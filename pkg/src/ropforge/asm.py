"""Gadget listings and the supported x86_64 instruction subset.

Listing lines look like ``0x00000000000022fe : pop rdi ; ret``. Instructions
are lowercase Intel syntax.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Union

GPRS = (
    "rax", "rbx", "rcx", "rdx", "rsi", "rdi", "rbp", "rsp",
    "r8", "r9", "r10", "r11", "r12", "r13", "r14", "r15",
)

# registers the gadget equations may write; rsp is the chain medium
DATA_REGS = tuple(r for r in GPRS if r != "rsp")

MASK64 = (1 << 64) - 1


class ParseError(ValueError):
    pass


class UnknownMnemonic(ParseError):
    pass


class BadOperandArity(ParseError):
    pass


class BadRegisterName(ParseError):
    pass


class BadOperand(ParseError):
    """Operand of the wrong kind, mismatched widths, or an out-of-range immediate."""


class DuplicateOffset(ValueError):
    pass


@dataclass(frozen=True)
class RegisterRef:
    canonical: str
    width: int = 64
    lane: str = "low"

    @property
    def name(self) -> str:
        return _ALIAS_NAME[(self.canonical, self.width, self.lane)]

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Immediate:
    value: int  # signed 64-bit

    def __str__(self) -> str:
        return f"-{-self.value:#x}" if self.value < 0 else f"{self.value:#x}"


@dataclass(frozen=True)
class MemoryMarker:
    text: str

    def __str__(self) -> str:
        return self.text


Operand = Union[RegisterRef, Immediate, MemoryMarker]


def _build_alias_table() -> dict[str, RegisterRef]:
    table: dict[str, RegisterRef] = {}
    legacy = {
        "rax": ("eax", "ax", "al", "ah"),
        "rbx": ("ebx", "bx", "bl", "bh"),
        "rcx": ("ecx", "cx", "cl", "ch"),
        "rdx": ("edx", "dx", "dl", "dh"),
        "rsi": ("esi", "si", "sil", None),
        "rdi": ("edi", "di", "dil", None),
        "rbp": ("ebp", "bp", "bpl", None),
        "rsp": ("esp", "sp", "spl", None),
    }
    for reg, (r32, r16, r8, r8h) in legacy.items():
        table[reg] = RegisterRef(reg, 64)
        table[r32] = RegisterRef(reg, 32)
        table[r16] = RegisterRef(reg, 16)
        table[r8] = RegisterRef(reg, 8)
        if r8h:
            table[r8h] = RegisterRef(reg, 8, "high")
    for n in range(8, 16):
        reg = f"r{n}"
        table[reg] = RegisterRef(reg, 64)
        table[f"{reg}d"] = RegisterRef(reg, 32)
        table[f"{reg}w"] = RegisterRef(reg, 16)
        table[f"{reg}b"] = RegisterRef(reg, 8)
    return table


REGISTER_ALIASES = _build_alias_table()
_ALIAS_NAME = {(r.canonical, r.width, r.lane): name for name, r in REGISTER_ALIASES.items()}


def canonical_register(name: str) -> RegisterRef:
    try:
        return REGISTER_ALIASES[name.strip().lower()]
    except KeyError:
        raise BadRegisterName(f"unknown register {name!r}") from None


def alias_for(canonical: str, width: int, lane: str = "low") -> str:
    return _ALIAS_NAME[(canonical, width, lane)]


# mnemonic -> allowed operand counts
ARITY = {
    "mov": (2,), "push": (1,), "pop": (1,),
    "add": (2,), "sub": (2,), "and": (2,), "or": (2,), "xor": (2,),
    "inc": (1,), "dec": (1,), "neg": (1,), "not": (1,),
    "imul": (1, 2, 3), "idiv": (1,),
    "shl": (2,), "shr": (2,), "sal": (2,), "sar": (2,), "rol": (2,), "ror": (2,),
    "xchg": (2,), "xadd": (2,),
    "ret": (0,), "syscall": (0,),
}
MNEMONICS = frozenset(ARITY)
SHIFTS = frozenset({"shl", "shr", "sal", "sar", "rol", "ror"})
BINARY_ALU = frozenset({"add", "sub", "and", "or", "xor"})
UNARY_ALU = frozenset({"inc", "dec", "neg", "not"})

_MEMORY_RE = re.compile(r"\[|\bptr\b")
_INT_RE = re.compile(r"^-?(0x[0-9a-f]+|[0-9]+)$")


@dataclass(frozen=True)
class Instruction:
    mnemonic: str
    operands: tuple[Operand, ...] = ()

    @property
    def has_memory(self) -> bool:
        return any(isinstance(op, MemoryMarker) for op in self.operands)

    def __str__(self) -> str:
        if not self.operands:
            return self.mnemonic
        return f"{self.mnemonic} " + ", ".join(str(op) for op in self.operands)


@dataclass(frozen=True)
class Gadget:
    offset: int
    instructions: tuple[Instruction, ...]
    source_line: str = field(default="", compare=False)
    number: int = field(default=0, compare=False)  # 1-based position in its listing

    @property
    def is_trigger(self) -> bool:
        return self.instructions[0].mnemonic == "syscall"

    @property
    def is_resumable_trigger(self) -> bool:
        return self.is_trigger and len(self.instructions) == 2

    def render(self) -> str:
        return f"{self.offset:#018x} : " + " ; ".join(str(i) for i in self.instructions)

    def __str__(self) -> str:
        return " ; ".join(str(i) for i in self.instructions)


@dataclass
class Corpus:
    gadgets: list[Gadget] = field(default_factory=list)
    unsupported: list[tuple[str, str]] = field(default_factory=list)
    malformed: list[str] = field(default_factory=list)

    def by_offset(self) -> dict[int, Gadget]:
        return {g.offset: g for g in self.gadgets}

    @property
    def triggers(self) -> list[Gadget]:
        return [g for g in self.gadgets if g.is_trigger]

    @property
    def regular(self) -> list[Gadget]:
        return [g for g in self.gadgets if not g.is_trigger]


def parse_immediate(text: str) -> int:
    t = text.strip().lower()
    if not _INT_RE.match(t):
        raise BadOperand(f"bad immediate {text!r}")
    value = int(t, 0)
    if not -(1 << 63) <= value <= MASK64:
        raise BadOperand(f"immediate {text!r} does not fit in 64 bits")
    if value >= 1 << 63:
        value -= 1 << 64
    return value


def _parse_operand(text: str) -> Operand:
    t = text.strip()
    if _MEMORY_RE.search(t):
        return MemoryMarker(t)
    if t and (t[0].isdigit() or t[0] == "-"):
        return Immediate(parse_immediate(t))
    return canonical_register(t)


def _check_operands(mnemonic: str, ops: tuple[Operand, ...]) -> None:
    if any(isinstance(op, MemoryMarker) for op in ops):
        return  # recognized only so the gadget can be rejected
    regs = [op for op in ops if isinstance(op, RegisterRef)]
    if ops and mnemonic not in ("push",) and not isinstance(ops[0], RegisterRef):
        raise BadOperand(f"{mnemonic}: destination must be a register")
    if mnemonic in SHIFTS:
        count = ops[1]
        if isinstance(count, RegisterRef) and count != RegisterRef("rcx", 8):
            raise BadOperand(f"{mnemonic}: count register must be cl")
        return
    if mnemonic == "imul" and len(ops) == 3:
        if not isinstance(ops[1], RegisterRef) or not isinstance(ops[2], Immediate):
            raise BadOperand("imul: three-operand form is reg, reg, imm")
    if mnemonic in ("xchg", "xadd") and not isinstance(ops[1], RegisterRef):
        raise BadOperand(f"{mnemonic}: both operands must be registers")
    if mnemonic == "imul" and len(ops) == 2 and not isinstance(ops[1], RegisterRef):
        raise BadOperand("imul: two-operand form is reg, reg")
    if len({r.width for r in regs}) > 1:
        raise BadOperand(f"{mnemonic}: operand widths differ")


def parse_instruction(token: str) -> Instruction:
    text = " ".join(token.strip().lower().split())
    if not text:
        raise UnknownMnemonic("empty instruction")
    mnemonic, _, rest = text.partition(" ")
    if mnemonic not in MNEMONICS:
        raise UnknownMnemonic(f"unknown mnemonic {mnemonic!r}")
    ops = tuple(_parse_operand(p) for p in rest.split(",")) if rest else ()
    if len(ops) not in ARITY[mnemonic]:
        raise BadOperandArity(f"{mnemonic} takes {ARITY[mnemonic]} operands, got {len(ops)}")
    _check_operands(mnemonic, ops)
    return Instruction(mnemonic, ops)


_LINE_RE = re.compile(r"^\s*0x([0-9a-fA-F]+)\s*:\s*(.*?)\s*$")


def _classify_body(body: str) -> tuple[tuple[Instruction, ...] | None, str | None]:
    parts = [p.strip() for p in body.split(";")]
    if not body or any(not p for p in parts):
        return None, "empty instruction"
    if any(_MEMORY_RE.search(p) for p in parts):
        return None, "memory operand"
    try:
        insns = tuple(parse_instruction(p) for p in parts)
    except ParseError as exc:
        return None, str(exc)
    names = [i.mnemonic for i in insns]
    if names in (["syscall"], ["syscall", "ret"]):
        return insns, None
    if names[-1] != "ret":
        return None, "missing terminal ret"
    if "ret" in names[:-1] or "syscall" in names:
        return None, "control transfer before terminal ret"
    return insns, None


def parse_listing(text: str) -> Corpus:
    """Parse a gadget listing into a Corpus.

    Unsupported and malformed lines are recorded, not raised. A repeated
    offset raises DuplicateOffset since it makes the listing ambiguous.
    """
    corpus = Corpus()
    seen: set[int] = set()
    for raw in text.splitlines():
        line = raw.rstrip("\r")
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        m = _LINE_RE.match(line)
        if m is None:
            corpus.malformed.append(line)
            continue
        offset = int(m.group(1), 16)
        if offset > MASK64:
            corpus.malformed.append(line)
            continue
        if offset in seen:
            raise DuplicateOffset(f"offset {offset:#x} listed twice")
        seen.add(offset)
        insns, reason = _classify_body(m.group(2))
        if insns is None:
            corpus.unsupported.append((line, reason))
        else:
            corpus.gadgets.append(Gadget(offset, insns, line, len(corpus.gadgets) + 1))
    return corpus


def render_listing(gadgets) -> str:
    return "".join(g.render() + "\n" for g in gadgets)
