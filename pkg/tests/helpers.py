"""Shared oracles for the test suite."""

from __future__ import annotations

import random

from ropforge import corpusgen, emu, semantics
from ropforge.asm import GPRS, MASK64

SAMPLE_LISTING = """\
0x00000000000054cf : mov edx, eax ; add rsp, 0x8 ; ret
0x0000000000005011 : mov eax, 0x1 ; ret
0x00000000000026d0 : mov eax, 0xa ; ret
0x00000000000022fe : pop rdi ; ret
0x00000000000022fc : pop rsi ; pop r15 ; ret
0x0000000000004a6b : syscall ; ret
"""

NEXT = 0xDEAD0000BEEF


def random_state(rng: random.Random) -> dict[str, int]:
    """Entry registers biased toward edge values so wraparound paths get exercised."""
    edge = (0, 1, MASK64, 1 << 63, (1 << 63) - 1, 0xFFFFFFFF, 0x80000000)
    out = {}
    for r in GPRS:
        if r == "rsp":
            continue
        out[r] = rng.choice(edge) if rng.random() < 0.15 else rng.getrandbits(64)
    return out


def differential(g, s, entry, words) -> str | None:
    """Compare the lifter with the emulator on one (gadget, state, stack) triple.

    Returns None on agreement (including both sides faulting), else a message.
    """
    free = words[: s.free_slots]
    stack = list(free) + [0x4141414141414141] * (s.rsp_adjust // 8) + [NEXT]
    try:
        lifted = semantics.eval_equations(s, entry, free)
        lift_fault = None
    except semantics.EvalFault as exc:
        lifted, lift_fault = None, exc
    m0 = emu.make_state(entry, stack)
    rsp0 = m0.regs["rsp"]
    try:
        m1, nxt = emu.step_gadget(m0, g)
        emu_fault = None
    except emu.DivideError as exc:
        m1, emu_fault = None, exc
    if (lift_fault is None) != (emu_fault is None):
        return f"{g}: lifter fault {lift_fault!r} vs emulator fault {emu_fault!r}"
    if lift_fault is not None:
        return None
    if nxt != NEXT:
        return f"{g}: ret went to {nxt:#x}"
    for r in GPRS:
        if r == "rsp":
            if m1.regs[r] - rsp0 != s.total_stack_consumed:
                return f"{g}: rsp moved {m1.regs[r] - rsp0}, summary says {s.total_stack_consumed}"
        elif lifted[r] != m1.regs[r]:
            return f"{g}: {r} lifter {lifted[r]:#x} emulator {m1.regs[r]:#x}"
    return None


def differential_batch(rng: random.Random, n_gadgets: int, per_gadget: int) -> tuple[int, list[str]]:
    failures, triples = [], 0
    for _ in range(n_gadgets):
        g, s = corpusgen.random_accepted_gadget(rng)
        for _ in range(per_gadget):
            words = [rng.getrandbits(64) for _ in range(s.free_slots)]
            msg = differential(g, s, random_state(rng), words)
            triples += 1
            if msg:
                failures.append(msg)
    return triples, failures


# --- random pre-fold equation lists -------------------------------------------

_FOLD_REGS = ("rax", "rbx", "rcx", "rdx", "rsi", "rdi", "r8", "r12")


def random_rvalue(rng: random.Random, depth: int, nfree: int, temps: list[str]):
    from ropforge.semantics import (BINOPS, BinOp, Const, DivWide, Free, Insert, MulHigh,
                                    Reg, UnOp, ZExt32)
    if depth == 0 or rng.random() < 0.3:
        pick = rng.random()
        if pick < 0.45:
            return Reg(rng.choice(_FOLD_REGS + tuple(temps)))
        if pick < 0.75 or not nfree:
            return Const(rng.choice((0, 1, 2, 0xFF, MASK64, rng.getrandbits(64))))
        return Free(rng.randrange(nfree))
    sub = lambda: random_rvalue(rng, depth - 1, nfree, temps)  # noqa: E731
    kind = rng.random()
    if kind < 0.5:
        op = rng.choice(sorted(BINOPS))
        w = rng.choice((64, 32)) if op in ("shl", "shr", "sar", "rol", "ror") else 64
        return BinOp(op, sub(), sub(), w)
    if kind < 0.62:
        return UnOp(rng.choice(("neg", "not")), sub())
    if kind < 0.74:
        return ZExt32(sub())
    if kind < 0.86:
        w = rng.choice((16, 8))
        return Insert(sub(), sub(), w, "high" if w == 8 and rng.random() < 0.3 else "low")
    if kind < 0.93:
        return MulHigh(sub(), sub(), rng.choice((64, 32)))
    return DivWide(rng.choice(("div", "mod")), sub(), sub(), sub(), rng.choice((64, 32)))


def random_prefold(rng: random.Random, nfree: int = 3):
    """Program-order writes over a few registers and ``$t`` temporaries."""
    from ropforge.semantics import Equation
    temps: list[str] = []
    eqs = []
    for i in range(rng.randrange(1, 8)):
        if rng.random() < 0.2:
            dest = f"$t{i}"
        else:
            dest = rng.choice(_FOLD_REGS)
        eqs.append(Equation(dest, random_rvalue(rng, rng.randrange(0, 4), nfree, temps)))
        if dest.startswith("$"):
            temps.append(dest)
    return eqs


def fold_agrees(eqs, rng: random.Random, states: int = 100, nfree: int = 3) -> str | None:
    """Folded (simultaneous, plus traps) vs unfolded (sequential) evaluation."""
    from ropforge.semantics import EvalFault, collect_traps, eval_sequential, evaluate, fold_equations
    folded = fold_equations(eqs)
    traps = collect_traps(eqs, folded)
    for _ in range(states):
        entry = random_state(rng)
        free = [rng.getrandbits(64) for _ in range(nfree)]
        try:
            seq = eval_sequential(eqs, entry, free)
        except EvalFault:
            seq = None
        try:
            memo: dict = {}
            for t in traps:
                evaluate(t, entry, free, _memo=memo)
            sim = dict(entry)
            for eq in folded:
                sim[eq.dest] = evaluate(eq.rhs, entry, free, _memo=memo)
        except EvalFault:
            sim = None
        if seq != sim:
            return f"{eqs} -> {folded}: sequential {seq} vs folded {sim}"
    return None
