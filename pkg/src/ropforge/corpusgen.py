"""Random gadget and corpus generators for property tests and experiments.

Planted corpora carry a hand-built payload that reaches the objective; it is
assembled here from the planting patterns and never consults the synthesizer,
so it can serve as an existence witness.
"""

from __future__ import annotations

import random
import struct
from dataclasses import dataclass, field

from .asm import DATA_REGS, MASK64, Gadget, alias_for, parse_listing
from .semantics import GadgetSummary, lift_gadget

LEGACY = ("rax", "rbx", "rcx", "rdx")
PLANT_REGS = ("rax", "rdi", "rsi", "rdx")
SCRATCH = tuple(r for r in DATA_REGS if r not in PLANT_REGS)


def reg_name(rng: random.Random, width: int, regs=DATA_REGS) -> str:
    r = rng.choice(regs)
    if width == 8 and r in LEGACY and rng.random() < 0.25:
        return alias_for(r, 8, "high")
    return alias_for(r, width)


def _imm(rng: random.Random, width: int) -> str:
    kind = rng.random()
    if kind < 0.4:
        v = rng.randrange(0, 16)
    elif kind < 0.7:
        v = rng.getrandbits(min(width, 32))
    else:
        v = -rng.randrange(1, 1 << 16)
    return f"{v:#x}" if v >= 0 else f"-{-v:#x}"


def random_instruction(rng: random.Random, regs=DATA_REGS) -> str:
    """One register-only instruction from the supported subset."""
    w = rng.choice((64, 64, 32, 32, 16, 8))
    d = reg_name(rng, w, regs)
    pick = rng.random()
    if pick < 0.18:
        src = reg_name(rng, w, regs) if rng.random() < 0.6 else _imm(rng, w)
        return f"mov {d}, {src}"
    if pick < 0.40:
        op = rng.choice(("add", "sub", "and", "or", "xor"))
        src = reg_name(rng, w, regs) if rng.random() < 0.6 else _imm(rng, w)
        return f"{op} {d}, {src}"
    if pick < 0.50:
        return f"{rng.choice(('inc', 'dec', 'neg', 'not'))} {d}"
    if pick < 0.60:
        op = rng.choice(("shl", "shr", "sal", "sar", "rol", "ror"))
        cnt = "cl" if rng.random() < 0.3 else str(rng.randrange(0, 70))
        return f"{op} {d}, {cnt}"
    if pick < 0.68:
        return f"{rng.choice(('xchg', 'xadd'))} {d}, {reg_name(rng, w, regs)}"
    if pick < 0.78:
        w = rng.choice((64, 32, 16))
        a, b = alias_for(rng.choice(regs), w), alias_for(rng.choice(regs), w)
        if rng.random() < 0.5:
            return f"imul {a}, {b}"
        return f"imul {a}, {b}, {_imm(rng, 16)}"
    if pick < 0.84:
        return f"imul {alias_for(rng.choice(regs), rng.choice((64, 32)))}"
    if pick < 0.88:
        return f"idiv {alias_for(rng.choice(regs), rng.choice((64, 32)))}"
    if pick < 0.96:
        return f"pop {rng.choice(regs)}"
    return f"add rsp, {8 * rng.randrange(1, 4):#x}"


def _with_pushes(rng: random.Random, body: list[str], regs) -> list[str]:
    """Insert balanced push/pop pairs (push before its pop) into ``body``."""
    out = list(body)
    for _ in range(rng.randrange(0, 3)):
        i = rng.randrange(0, len(out) + 1)
        j = rng.randrange(i, len(out) + 1)
        src = rng.choice(regs) if rng.random() < 0.85 else _imm(rng, 32)
        out.insert(j, f"pop {rng.choice(regs)}")
        out.insert(i, f"push {src}")
    return out


def random_gadget_text(rng: random.Random, max_len: int = 6, regs=DATA_REGS) -> str:
    n = rng.randrange(0, max_len)
    body = [random_instruction(rng, regs) for _ in range(n)]
    if rng.random() < 0.4:
        body = _with_pushes(rng, body, regs)
    return " ; ".join(body + ["ret"])


def random_accepted_gadget(rng: random.Random, offset: int = 0x1000, max_len: int = 6,
                           regs=DATA_REGS) -> tuple[Gadget, GadgetSummary]:
    """Draw until the lifter accepts; returns the gadget and its summary."""
    while True:
        text = f"{offset:#x} : {random_gadget_text(rng, max_len, regs)}"
        corpus = parse_listing(text)
        if not corpus.gadgets:
            continue
        g = corpus.gadgets[0]
        s = lift_gadget(g)
        if isinstance(s, GadgetSummary):
            return g, s


def unbalanced_gadget_text(rng: random.Random, max_len: int = 6) -> str:
    """Register-only gadget of at most ``max_len`` instructions (ret included)
    whose pushes outnumber its pops."""
    n_body = rng.randrange(1, max_len)
    n_push = rng.randrange(n_body // 2 + 1, n_body + 1)
    n_pop = rng.randrange(0, min(n_push, n_body - n_push + 1))
    n_other = n_body - n_push - n_pop
    items = ["push"] * n_push + ["pop"] * n_pop + ["other"] * n_other
    rng.shuffle(items)
    body = []
    for kind in items:
        if kind == "push":
            body.append(f"push {rng.choice(DATA_REGS)}" if rng.random() < 0.8
                        else f"push {_imm(rng, 32)}")
        elif kind == "pop":
            body.append(f"pop {rng.choice(DATA_REGS)}")
        else:
            while True:
                ins = random_instruction(rng)
                if not ins.startswith(("pop", "add rsp", "idiv")):
                    break
            body.append(ins)
    return " ; ".join(body + ["ret"])


_MEM_FORMS = (
    "mov qword ptr [{a}], {b}", "mov {b}, qword ptr [{a}]", "add {b}, qword ptr [{a} + 0x10]",
    "mov dword ptr [{a} - 8], {b32}", "xchg qword ptr [{a}], {b}", "push qword ptr [{a}]",
    "pop qword ptr [{a}]", "inc qword ptr [{a}]", "mov {b}, [{a}+{c}*8]",
)


def memory_gadget_text(rng: random.Random, max_len: int = 6) -> str:
    """Gadget with at least one memory-operand instruction."""
    n = rng.randrange(0, max_len - 1)
    body = [random_instruction(rng) for _ in range(n)]
    a, b, c = (rng.choice(DATA_REGS) for _ in range(3))
    mem = rng.choice(_MEM_FORMS).format(a=a, b=b, c=c, b32=alias_for(b, 32))
    body.insert(rng.randrange(0, n + 1), mem)
    return " ; ".join(body + ["ret"])


# --- planted corpora ----------------------------------------------------------


@dataclass
class PlantedCase:
    """A corpus with a planted solution for ``objective``.

    ``witness`` is the planted payload as word values (offsets, base 0),
    ending in the trigger address.
    """

    text: str
    objective: dict[str, int]
    witness: list[int]
    planted: list[str] = field(default_factory=list)

    @property
    def witness_bytes(self) -> bytes:
        return struct.pack(f"<{len(self.witness)}Q", *self.witness)


def _plant(rng: random.Random, r: str, v: int):
    """Returns (gadget bodies, word template). Template entries are either a
    gadget index (address) or ("val", int)."""
    s = rng.choice(SCRATCH)
    r32 = alias_for(r, 32)
    k = rng.randrange(1, 1 << 12)
    pattern = rng.randrange(8)
    if pattern == 0:
        return [f"pop {r} ; ret"], [0, ("val", v)]
    if pattern == 1:
        return [f"pop {r} ; pop {s} ; ret"], [0, ("val", v), ("val", rng.getrandbits(64))]
    if pattern == 2:
        return [f"pop {r} ; add rsp, 0x8 ; ret"], [0, ("val", v), ("val", 0)]
    if pattern == 3 and v <= 0xFFFFFFFF:
        return [f"mov {r32}, {v:#x} ; ret"], [0]
    if pattern == 4:
        return [f"pop {s} ; ret", f"mov {r}, {s} ; ret"], [0, ("val", v), 1]
    if pattern == 5:
        return [f"pop {r} ; add {r}, {k:#x} ; ret"], [0, ("val", (v - k) & MASK64)]
    if pattern == 6:
        return [f"pop {s} ; ret", f"xchg {r}, {s} ; ret"], [0, ("val", v), 1]
    if pattern == 7:
        return ([f"pop {s} ; ret", f"mov {r}, {s} ; sub {r}, {k:#x} ; ret"],
                [0, ("val", (v + k) & MASK64), 1])
    return [f"pop {r} ; ret"], [0, ("val", v)]


def planted_corpus(rng: random.Random, n_gadgets: int | None = None,
                   regs=PLANT_REGS) -> PlantedCase:
    """Random corpus of 10-30 gadgets (plus a trigger) with a planted chain.

    The objective covers a random non-empty subset of ``regs``. Each register
    gets its own planting pattern that writes only that register and scratch
    registers, so the patterns can run in any order.
    """
    n = n_gadgets if n_gadgets is not None else rng.randrange(10, 31)
    chosen = [r for r in regs if rng.random() < 0.6] or [rng.choice(regs)]
    objective = {}
    bodies: list[str] = []
    template: list = []
    for r in chosen:
        v = rng.getrandbits(64) if rng.random() < 0.6 else rng.randrange(0, 1 << 12)
        objective[r] = v
        gb, tpl = _plant(rng, r, v)
        base = len(bodies)
        bodies += gb
        template += [(t if isinstance(t, tuple) else base + t) for t in tpl]
    planted = list(bodies)
    while len(bodies) < n:
        bodies.append(random_gadget_text(rng, 5))
    offsets = rng.sample(range(0x1000, 0x80000, 0x10), len(bodies) + 1)
    order = list(range(len(bodies)))
    rng.shuffle(order)
    lines = [f"{offsets[i]:#018x} : {bodies[i]}" for i in order]
    trig = offsets[-1]
    lines.insert(rng.randrange(0, len(lines) + 1), f"{trig:#018x} : syscall ; ret")
    witness = [t[1] if isinstance(t, tuple) else offsets[t] for t in template] + [trig]
    return PlantedCase("\n".join(lines) + "\n", objective, witness, planted)
