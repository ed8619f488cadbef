"""Stack layout, payload bytes and chain reports."""

from __future__ import annotations

import enum
import json
import struct
from dataclasses import dataclass

from .asm import MASK64
from .semantics import Free, render_equation, render_summary, rvalue_to_json
from .synth import DUMMY, Chain


class WordKind(enum.Enum):
    GADGET_ADDRESS = "GadgetAddress"
    POPPED_VALUE = "PoppedValue"
    RSP_SKIP_DUMMY = "RspSkipDummy"
    TRIGGER_ADDRESS = "TriggerAddress"


@dataclass(frozen=True)
class Word:
    value: int
    kind: WordKind
    annotation: str = ""


@dataclass(frozen=True)
class StackLayout:
    words: tuple[Word, ...]
    base: int = 0

    def values(self) -> list[int]:
        return [w.value for w in self.words]


def _gadget_label(summary) -> str:
    g = summary.gadget
    tag = f"Gadget # {g.number}" if g.number else "Gadget"
    return f"{tag} ({g.offset:#x}): {g}"


def _slot_annotation(summary, slot: int, value: int) -> str:
    targets = [eq.dest for eq in summary.equations if eq.rhs == Free(slot)]
    if not targets:
        return f"value {value:#x} (slot {slot})" if value != DUMMY else f"dummy value (slot {slot})"
    if value == DUMMY:
        return f"dummy value ({', '.join(targets)})"
    return f"{value:#x} (= {', '.join(targets)})"


def layout_stack(c: Chain, base: int = 0) -> StackLayout:
    """Payload words in execution order: each gadget's address, its popped
    values, its rsp-skip dummies, and finally the trigger address."""
    words = []
    for step in c.steps:
        s = step.summary
        words.append(Word((base + s.offset) & MASK64, WordKind.GADGET_ADDRESS, _gadget_label(s)))
        for slot, v in enumerate(step.free_values):
            words.append(Word(v, WordKind.POPPED_VALUE, _slot_annotation(s, slot, v)))
        for _ in range(step.dummy_count):
            words.append(Word(DUMMY, WordKind.RSP_SKIP_DUMMY, f"dummy value (rsp+{s.rsp_adjust})"))
    t = c.trigger
    words.append(Word((base + t.offset) & MASK64, WordKind.TRIGGER_ADDRESS,
                      f"syscall trigger ({t.offset:#x}): {t.gadget}"))
    return StackLayout(tuple(words), base)


def concat_layouts(layouts) -> StackLayout:
    layouts = list(layouts)
    base = layouts[0].base if layouts else 0
    return StackLayout(tuple(w for lay in layouts for w in lay.words), base)


def emit_payload(layout: StackLayout) -> bytes:
    values = layout.values()
    return struct.pack(f"<{len(values)}Q", *values)


def render_report(chains, layout: StackLayout, fmt: str = "text") -> str:
    """Text mirrors a stack diagram (top of stack first); structured is JSON."""
    chains = chains if isinstance(chains, (list, tuple)) else [chains]
    if fmt == "structured":
        return json.dumps(report_document(chains, layout), indent=2, sort_keys=True) + "\n"
    if fmt != "text":
        raise ValueError(f"unknown report format {fmt!r}")
    lines = []
    for k, c in enumerate(chains):
        obj = "; ".join(f"{r} = {v:#x}" for r, v in c.objective.items()) or "(none)"
        lines.append(f"objective {k + 1}: {obj}")
        for i, step in enumerate(c.steps, 1):
            lines.append(f"  step {i}: {step.summary.gadget}  ->  {render_summary(step.summary)}")
    lines.append(f"stack layout ({len(layout.words)} words, {8 * len(layout.words)} bytes, "
                 f"base {layout.base:#x}); first executed at the bottom")
    for i in reversed(range(len(layout.words))):
        w = layout.words[i]
        lines.append(f"  [+{8 * i:#06x}] {w.value:#018x}  {w.annotation}")
    return "\n".join(lines) + "\n"


def report_document(chains, layout: StackLayout) -> dict:
    doc_chains = []
    for c in chains:
        doc_chains.append({
            "objective": {r: v for r, v in c.objective.items()},
            "trigger": {"offset": c.trigger.offset, "instructions": str(c.trigger.gadget)},
            "steps": [{
                "offset": st.summary.offset,
                "instructions": str(st.summary.gadget),
                "equations": [{"text": render_equation(eq), "dest": eq.dest,
                               "rhs": rvalue_to_json(eq.rhs)} for eq in st.summary.equations],
                "rsp_adjust": st.summary.rsp_adjust,
                "free_values": list(st.free_values),
                "dummy_count": st.dummy_count,
            } for st in c.steps],
        })
    return {
        "base": layout.base,
        "chains": doc_chains,
        "words": [{"value": w.value, "kind": w.kind.value, "annotation": w.annotation}
                  for w in layout.words],
        "payload_bytes": 8 * len(layout.words),
    }


def layout_from_document(doc) -> StackLayout:
    if isinstance(doc, str):
        doc = json.loads(doc)
    words = tuple(Word(w["value"], WordKind(w["kind"]), w["annotation"]) for w in doc["words"])
    return StackLayout(words, doc["base"])
