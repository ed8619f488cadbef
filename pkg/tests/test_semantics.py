import random

import pytest
from hypothesis import given, settings, strategies as st

import helpers
from ropforge import asm, corpusgen, semantics
from ropforge.semantics import (BinOp, Const, Equation, Free, Reg, RejectReason, ZExt32,
                                fold_equations, lift_gadget)


def lift(body: str, offset: int = 0x1000):
    (g,) = asm.parse_listing(f"{offset:#x} : {body}").gadgets
    return lift_gadget(g)


ZEROS = {r: 0 for r in asm.GPRS}


def test_push_pop_golden_one():
    s = lift("pop rax ; push rbx ; pop rdx ; pop rcx ; ret")
    assert [(e.dest, e.rhs) for e in s.equations] == [
        ("rax", Free(0)), ("rdx", Reg("rbx")), ("rcx", Free(1))]
    assert s.free_slots == 2
    assert s.render() == "rax = *; rdx = rbx; rcx = *"


def test_push_pop_golden_two():
    s = lift("push r15 ; push r14 ; pop rax ; push r13 ; pop rbx ; pop rcx ; pop rdx ; ret")
    assert [(e.dest, e.rhs) for e in s.equations] == [
        ("rax", Reg("r14")), ("rbx", Reg("r13")), ("rcx", Reg("r15")), ("rdx", Free(0))]
    assert s.free_slots == 1
    assert s.render() == "rax = r14; rbx = r13; rcx = r15; rdx = *"


def test_unbalanced_push():
    r = lift("push rbx ; ret")
    assert isinstance(r, semantics.Rejection) and r.reason is RejectReason.UNBALANCED_PUSH


def test_mov_edx_eax_add_rsp():
    s = lift("mov edx, eax ; add rsp, 0x8 ; ret")
    assert [(e.dest, e.rhs) for e in s.equations] == [("rdx", ZExt32(Reg("rax")))]
    assert s.rsp_adjust == 8 and s.free_slots == 0
    assert s.render() == "edx = eax; rsp = rsp + 8"
    assert s.total_stack_consumed == 16


@pytest.mark.parametrize("body, reason", [
    ("sub rsp, 0x10 ; ret", RejectReason.NEGATIVE_RSP_ADJUST),
    ("add rsp, 0x4 ; ret", RejectReason.RSP_MISALIGNED),
    ("mov rax, rsp ; ret", RejectReason.UNSUPPORTED_INSTRUCTION),
    ("imul bl ; ret", RejectReason.UNSUPPORTED_INSTRUCTION),
])
def test_other_rejections(body, reason):
    r = lift(body)
    assert isinstance(r, semantics.Rejection) and r.reason is reason


def test_memory_gadget_rejected_when_lifted_directly():
    g = asm.Gadget(0x10, (asm.Instruction("mov", (asm.RegisterRef("rax"), asm.MemoryMarker("[rbx]"))),
                          asm.Instruction("ret")))
    r = lift_gadget(g)
    assert r.reason is RejectReason.MEMORY_INSTRUCTION


def test_trigger_lifts_to_empty_summary():
    s = lift("syscall ; ret")
    assert s.is_syscall_trigger and s.equations == ()


def test_fold_constant_flattening():
    eqs = [Equation("rax", Const(0)), Equation("rbx", BinOp("add", Reg("rax"), Const(10)))]
    assert [(e.dest, e.rhs) for e in fold_equations(eqs)] == [("rax", Const(0)), ("rbx", Const(10))]


def test_fold_elides_identity():
    assert fold_equations([Equation("rax", Reg("rax"))]) == []
    assert lift("xchg rax, rax ; ret").equations == ()


def test_fold_same_slot_xor():
    eqs = [Equation("rcx", Free(0)), Equation("rdx", BinOp("xor", Reg("rcx"), Reg("rcx")))]
    folded = fold_equations(eqs)
    assert dict((e.dest, e.rhs) for e in folded)["rdx"] == Const(0)
    rng = random.Random(7)
    for _ in range(1000):
        w = [rng.getrandbits(64)]
        entry = helpers.random_state(rng)
        assert semantics.eval_sequential(eqs, entry, w) == {
            **entry, **{e.dest: semantics.evaluate(e.rhs, entry, w) for e in folded}}


def test_fold_keeps_faulting_subterm():
    # multiplying by zero must not hide a division that traps
    div = BinOp("div", Free(0), Reg("rbx"))
    folded = fold_equations([Equation("rax", BinOp("mul", div, Const(0)))])
    with pytest.raises(semantics.DivisionByZero):
        semantics.evaluate(folded[0].rhs, ZEROS, [5])


def test_dropped_division_still_traps():
    s = lift("idiv rbx ; mov rax, 0x1 ; mov rdx, 0x2 ; ret")
    assert s.traps and s.may_fault
    with pytest.raises(semantics.DivisionByZero):
        semantics.eval_equations(s, ZEROS, [])
    out = semantics.eval_equations(s, {**ZEROS, "rbx": 3, "rax": 9}, [])
    assert (out["rax"], out["rdx"]) == (1, 2)


@pytest.mark.parametrize("body, cat", [
    ("mov eax, 0x1 ; ret", 1),
    ("mov edx, eax ; add rsp, 0x8 ; ret", 2),
    ("ret", 1),
    ("pop rdi ; ret", 1),
    ("xor eax, eax ; ret", 1),
    ("inc rbx ; ret", 2),
])
def test_classify(body, cat):
    s = lift(body)
    assert semantics.classify(s) == cat == s.category


def test_sample_corpus_split():
    corpus = asm.parse_listing(helpers.SAMPLE_LISTING)
    sums = [lift_gadget(g) for g in corpus.regular]
    assert [s.category for s in sums] == [2, 1, 1, 1, 1]
    assert [s.render() for s in sums] == [
        "edx = eax; rsp = rsp + 8", "eax = 1", "eax = 10", "rdi = *", "rsi = *; r15 = *"]


def test_eval_examples():
    s = lift("pop rdi ; ret")
    assert semantics.eval_equations(s, ZEROS, [0x601000]) == {**ZEROS, "rdi": 0x601000}
    s = lift("mov eax, 0xa ; ret")
    assert semantics.eval_equations(s, {**ZEROS, "rax": asm.MASK64}, [])["rax"] == 10
    s = lift("inc rax ; ret")
    assert semantics.eval_equations(s, {**ZEROS, "rax": asm.MASK64}, [])["rax"] == 0


def test_eval_checks_free_length():
    with pytest.raises(ValueError):
        semantics.eval_equations(lift("pop rdi ; ret"), ZEROS, [])


def test_eval_division_by_zero():
    s = lift("idiv rcx ; ret")
    with pytest.raises(semantics.DivisionByZero):
        semantics.eval_equations(s, ZEROS, [])


def test_partial_width_writes():
    s = lift("mov al, 0x12 ; mov ah, 0x34 ; mov bx, 0x5678 ; ret")
    out = semantics.eval_equations(s, {**ZEROS, "rax": asm.MASK64, "rbx": asm.MASK64}, [])
    assert out["rax"] == 0xFFFFFFFFFFFF3412
    assert out["rbx"] == 0xFFFFFFFFFFFF5678


def test_interior_rsp_skip_is_unused_slot():
    s = lift("pop rax ; add rsp, 0x8 ; pop rbx ; ret")
    assert s.free_slots == 3 and s.rsp_adjust == 0
    assert [(e.dest, e.rhs) for e in s.equations] == [("rax", Free(0)), ("rbx", Free(2))]


def test_push_then_rsp_skip_discards_pushed_value():
    s = lift("push rax ; add rsp, 0x8 ; pop rbx ; ret")
    assert [(e.dest, e.rhs) for e in s.equations] == [("rbx", Free(0))]


@settings(max_examples=400, deadline=None)
@given(st.integers(min_value=0, max_value=2**64 - 1))
def test_differential_property(seed):
    rng = random.Random(seed)
    g, s = corpusgen.random_accepted_gadget(rng)
    for _ in range(3):
        words = [rng.getrandbits(64) for _ in range(s.free_slots)]
        assert helpers.differential(g, s, helpers.random_state(rng), words) is None


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=0, max_value=2**64 - 1))
def test_fold_preserves_semantics(seed):
    rng = random.Random(seed)
    assert helpers.fold_agrees(helpers.random_prefold(rng), rng, states=20) is None


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=0, max_value=2**64 - 1))
def test_category_one_ignores_entry_state(seed):
    rng = random.Random(seed)
    g, s = corpusgen.random_accepted_gadget(rng)
    if s.category != 1 or s.may_fault:
        return
    words = [rng.getrandbits(64) for _ in range(s.free_slots)]
    a = semantics.eval_equations(s, helpers.random_state(rng), words)
    b = semantics.eval_equations(s, helpers.random_state(rng), words)
    assert all(a[r] == b[r] for r in s.written)


def test_structured_rvalue():
    s = lift("mov edx, eax ; ret")
    assert semantics.rvalue_to_json(s.equations[0].rhs) == {
        "node": "ZExt32", "args": [{"reg": "rax"}]}
