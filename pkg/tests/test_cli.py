import json
import random

import pytest

import helpers
from ropforge import asm, corpusgen, semantics
from ropforge.cli import main


@pytest.fixture
def files(tmp_path):
    g = tmp_path / "sample.gadgets"
    g.write_text(helpers.SAMPLE_LISTING)
    p = tmp_path / "mprotect.prog"
    p.write_text("mprotect(0x601000, 0x1000, 1)\n")
    return tmp_path, g, p


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_lift_sample(files, capsys):
    _, g, _ = files
    code, out, _ = run(capsys, "lift", "--gadgets", g)
    assert code == 0
    for eq in ("edx = eax; rsp = rsp + 8", "eax = 1", "eax = 10", "rdi = *", "rsi = *; r15 = *"):
        assert f"=>  {eq}\n" in out


def test_lift_empty_file(tmp_path, capsys):
    f = tmp_path / "empty"
    f.write_text("")
    assert run(capsys, "lift", "--gadgets", f) == (0, "", "")


def test_lift_unbalanced(tmp_path, capsys):
    f = tmp_path / "one"
    f.write_text("0x10 : push rbx ; ret\n")
    code, out, _ = run(capsys, "lift", "--gadgets", f)
    assert code == 0 and out.count("\n") == 1 and "UnbalancedPush" in out


def test_lift_duplicate_offset_is_usage_error(tmp_path, capsys):
    f = tmp_path / "dup"
    f.write_text("0x10 : ret\n0x10 : ret\n")
    assert run(capsys, "lift", "--gadgets", f)[0] == 2


def test_missing_file(tmp_path, capsys):
    code, _, err = run(capsys, "stats", "--gadgets", tmp_path / "nope")
    assert code == 2 and "cannot read" in err


def test_bad_flag(capsys):
    assert run(capsys, "chain", "--bogus")[0] == 2


def test_classify(files, capsys):
    _, g, _ = files
    code, out, _ = run(capsys, "classify", "--gadgets", g, "--format", "structured")
    assert code == 0
    assert [r["category"] for r in json.loads(out)] == [2, 1, 1, 1, 1]


def test_stats_sample(files, capsys):
    _, g, _ = files
    code, out, _ = run(capsys, "stats", "--gadgets", g, "--format", "structured")
    stats = json.loads(out)
    assert code == 0
    assert {k: stats[k] for k in ("total", "usable", "category1", "category2")} == {
        "total": 5, "usable": 5, "category1": 4, "category2": 1}


def test_stats_empty(tmp_path, capsys):
    f = tmp_path / "empty"
    f.write_text("")
    stats = json.loads(run(capsys, "stats", "--gadgets", f, "--format", "structured")[1])
    assert stats["total"] == stats["usable"] == stats["category1"] == stats["category2"] == 0
    assert stats["rejectedByReason"] == {}


def test_stats_matches_brute_force(tmp_path, capsys):
    rng = random.Random(11)
    lines = []
    for i in range(100):
        kind = rng.random()
        if kind < 0.15:
            body = corpusgen.unbalanced_gadget_text(rng)
        elif kind < 0.25:
            body = corpusgen.memory_gadget_text(rng)
        else:
            body = corpusgen.random_gadget_text(rng, 6)
        lines.append(f"{0x1000 + 16 * i:#x} : {body}")
    f = tmp_path / "synthetic"
    f.write_text("\n".join(lines) + "\n")
    stats = json.loads(run(capsys, "stats", "--gadgets", f, "--format", "structured")[1])
    # recount with a direct Reg-node scan
    corpus = asm.parse_listing(f.read_text())
    cats = {1: 0, 2: 0}
    for g in corpus.gadgets:
        s = semantics.lift_gadget(g)
        if isinstance(s, semantics.GadgetSummary):
            reads = any(isinstance(n, semantics.Reg) for eq in s.equations for n in semantics.walk(eq.rhs))
            cats[2 if reads else 1] += 1
    assert stats["total"] == 100
    assert (stats["category1"], stats["category2"]) == (cats[1], cats[2])
    assert stats["usable"] == cats[1] + cats[2]


def test_depth_filter(tmp_path, capsys):
    f = tmp_path / "deep"
    f.write_text("0x10 : inc rax ; inc rax ; inc rax ; ret\n0x20 : pop rax ; ret\n")
    stats = json.loads(run(capsys, "stats", "--gadgets", f, "--max-depth", "3",
                           "--format", "structured")[1])
    assert stats["usable"] == 1 and stats["rejectedByReason"] == {"DepthExceeded": 1}


def test_chain_and_verify(files, capsys):
    tmp, g, p = files
    out_bin = tmp / "payload.bin"
    code, out, _ = run(capsys, "chain", "--gadgets", g, "--program", p, "--out", out_bin)
    assert code == 0
    assert len(out_bin.read_bytes()) == 80
    assert "dummy value (rsp+8)" in out and "Gadget # 4" in out
    code, out, _ = run(capsys, "verify", "--gadgets", g, "--program", p, "--payload", out_bin)
    assert (code, out.strip()) == (0, "pass")


def test_verify_corrupted_payload(files, capsys):
    tmp, g, p = files
    out_bin = tmp / "payload.bin"
    run(capsys, "chain", "--gadgets", g, "--program", p, "--out", out_bin)
    data = bytearray(out_bin.read_bytes())
    data[8] ^= 0xFF  # the rdi value word
    out_bin.write_bytes(bytes(data))
    code, out, _ = run(capsys, "verify", "--gadgets", g, "--program", p, "--payload", out_bin)
    assert code == 1 and out.startswith("fail(rdi")


def test_verify_trace(files, capsys):
    tmp, g, p = files
    out_bin = tmp / "payload.bin"
    run(capsys, "chain", "--gadgets", g, "--program", p, "--out", out_bin)
    code, out, _ = run(capsys, "verify", "--gadgets", g, "--program", p, "--payload", out_bin, "--trace")
    doc = json.loads(out)
    assert code == 0 and doc["verdict"] == "pass"
    assert doc["trace"][0]["instruction"] == "pop rdi"
    assert doc["syscalls"] == [{"rax": 10, "rdi": 0x601000, "rsi": 0x1000, "rdx": 1,
                                **{r: doc["syscalls"][0][r] for r in ("r10", "r8", "r9")}}]


def test_unknown_syscall(files, capsys):
    tmp, g, _ = files
    p = tmp / "bad.prog"
    p.write_text("frobnicate(1)\n")
    code, _, err = run(capsys, "chain", "--gadgets", g, "--program", p)
    assert code == 2 and "unknown syscall" in err


def test_missing_trigger(files, capsys):
    tmp, _, p = files
    g = tmp / "notrig"
    g.write_text(helpers.SAMPLE_LISTING.replace("0x0000000000004a6b : syscall ; ret\n", ""))
    code, _, err = run(capsys, "chain", "--gadgets", g, "--program", p)
    assert code == 1 and "MissingTrigger" in err


def test_no_chain(files, capsys):
    tmp, _, p = files
    g = tmp / "nordx"
    g.write_text(helpers.SAMPLE_LISTING.replace("0x00000000000054cf : mov edx, eax ; add rsp, 0x8 ; ret\n", ""))
    code, _, err = run(capsys, "chain", "--gadgets", g, "--program", p)
    assert code == 1 and "rdx" in err


def test_structured_output_is_stable(files, capsys):
    _, g, p = files
    first = run(capsys, "chain", "--gadgets", g, "--program", p, "--format", "structured")
    second = run(capsys, "chain", "--gadgets", g, "--program", p, "--format", "structured")
    assert first == second and first[0] == 0
    assert json.loads(first[1])["payload_bytes"] == 80
