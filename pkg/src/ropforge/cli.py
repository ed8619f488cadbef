"""ropforge command line: lift | classify | chain | verify | stats.

Exit codes: 0 success, 1 domain failure (no chain, verification failed),
2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from dataclasses import dataclass

from . import asm, emit, emu, semantics, synth

log = logging.getLogger("ropforge")

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2


@dataclass
class Config:
    command: str
    gadgets_path: str | None = None
    program_path: str | None = None
    payload_path: str | None = None
    base: int = 0
    max_chain_len: int = 6
    max_depth: int = 10
    output_path: str | None = None
    format: str = "text"
    seed: int = 0
    trace: bool = False
    workers: int = 1

    def __post_init__(self) -> None:
        if self.max_chain_len < 1:
            raise ValueError("--max-chain-len must be >= 1")
        if self.max_depth < 1:
            raise ValueError("--max-depth must be >= 1")

    @property
    def limits(self) -> synth.Limits:
        return synth.Limits(max_chain_len=self.max_chain_len, workers=self.workers)


class UsageError(Exception):
    pass


@dataclass
class Lifted:
    corpus: asm.Corpus
    summaries: list  # usable GadgetSummary, triggers included
    rejections: list  # (Gadget, reason str)
    results: list  # (Gadget, GadgetSummary | Rejection | "DepthExceeded")


def _read(path: str | None, what: str) -> str:
    if not path:
        raise UsageError(f"missing --{what}")
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def lift_corpus(text: str, max_depth: int = 10) -> Lifted:
    try:
        corpus = asm.parse_listing(text)
    except asm.DuplicateOffset as exc:
        raise UsageError(str(exc)) from None
    summaries, rejections, results = [], [], []
    for g in corpus.gadgets:
        if not g.is_trigger and len(g.instructions) > max_depth:
            rejections.append((g, "DepthExceeded"))
            results.append((g, "DepthExceeded"))
            continue
        r = semantics.lift_gadget(g)
        results.append((g, r))
        if isinstance(r, semantics.Rejection):
            rejections.append((g, r.reason.value))
        else:
            summaries.append(r)
    return Lifted(corpus, summaries, rejections, results)


def _emit(cfg: Config, text: str) -> None:
    if cfg.output_path and cfg.command != "chain":
        with open(cfg.output_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_lift(cfg: Config) -> int:
    lifted = lift_corpus(_read(cfg.gadgets_path, "gadgets"), cfg.max_depth)
    if cfg.format == "structured":
        doc = []
        for g, r in lifted.results:
            item = {"offset": g.offset, "instructions": str(g)}
            if isinstance(r, semantics.GadgetSummary):
                item.update(equations=r.render(), category=r.category, free_slots=r.free_slots,
                            rsp_adjust=r.rsp_adjust, trigger=r.is_syscall_trigger)
            else:
                item["rejected"] = r if isinstance(r, str) else r.reason.value
            doc.append(item)
        doc += [{"line": line, "unsupported": why} for line, why in lifted.corpus.unsupported]
        _emit(cfg, json.dumps(doc, indent=2) + "\n")
        return EXIT_OK
    out = []
    for g, r in lifted.results:
        if isinstance(r, semantics.GadgetSummary):
            body = "syscall trigger" if r.is_syscall_trigger else (r.render() or "(no effect)")
        else:
            reason = r if isinstance(r, str) else r.reason.value
            body = f"rejected: {reason}"
        out.append(f"{g.offset:#018x} : {g}  =>  {body}\n")
    for line, why in lifted.corpus.unsupported:
        out.append(f"unsupported: {line.strip()}  ({why})\n")
    _emit(cfg, "".join(out))
    return EXIT_OK


def cmd_classify(cfg: Config) -> int:
    lifted = lift_corpus(_read(cfg.gadgets_path, "gadgets"), cfg.max_depth)
    rows = [(s.gadget, s.category) for s in lifted.summaries if not s.is_syscall_trigger]
    if cfg.format == "structured":
        _emit(cfg, json.dumps([{"offset": g.offset, "instructions": str(g), "category": c}
                               for g, c in rows], indent=2) + "\n")
    else:
        _emit(cfg, "".join(f"{g.offset:#018x} : {g}  =>  Category {c}\n" for g, c in rows))
    return EXIT_OK


def corpus_stats(lifted: Lifted) -> dict:
    regular = [s for s in lifted.summaries if not s.is_syscall_trigger]
    rejected = Counter(reason for _, reason in lifted.rejections)
    nontrigger = [g for g in lifted.corpus.gadgets if not g.is_trigger]
    return {
        "total": len(nontrigger) + len(lifted.corpus.unsupported),
        "usable": len(regular),
        "category1": sum(s.category == 1 for s in regular),
        "category2": sum(s.category == 2 for s in regular),
        "triggers": len(lifted.corpus.triggers),
        "unsupported": len(lifted.corpus.unsupported),
        "malformed": len(lifted.corpus.malformed),
        "rejectedByReason": dict(sorted(rejected.items())),
    }


def cmd_stats(cfg: Config) -> int:
    stats = corpus_stats(lift_corpus(_read(cfg.gadgets_path, "gadgets"), cfg.max_depth))
    if cfg.format == "structured":
        _emit(cfg, json.dumps(stats, indent=2, sort_keys=True) + "\n")
    else:
        lines = [f"{k}: {v}" for k, v in stats.items() if k != "rejectedByReason"]
        lines += [f"rejected[{k}]: {v}" for k, v in stats["rejectedByReason"].items()]
        _emit(cfg, "\n".join(lines) + "\n")
    return EXIT_OK


def _program(cfg: Config) -> synth.ProgramSpec:
    text = _read(cfg.program_path, "program")
    try:
        return synth.parse_program(text, synth.load_syscall_table())
    except (synth.UnknownSyscall, synth.ProgramSyntaxError) as exc:
        raise UsageError(str(exc)) from None


def plan(cfg: Config):
    """Chains and concatenated layout for the configured corpus and program."""
    lifted = lift_corpus(_read(cfg.gadgets_path, "gadgets"), cfg.max_depth)
    program = _program(cfg)
    chains = synth.plan_multicall(program, lifted.summaries, cfg.limits)
    layout = emit.concat_layouts(emit.layout_stack(c, cfg.base) for c in chains)
    return lifted, chains, layout


def cmd_chain(cfg: Config) -> int:
    try:
        _, chains, layout = plan(cfg)
    except synth.NoChain as exc:
        sys.stderr.write(f"NoChain: unsatisfied registers {', '.join(exc.unsatisfied)}\n")
        return EXIT_DOMAIN
    except (synth.MissingTrigger, synth.MissingResumableTrigger) as exc:
        sys.stderr.write(f"{type(exc).__name__}: {exc}\n")
        return EXIT_DOMAIN
    except synth.TooManyArgs as exc:
        raise UsageError(str(exc)) from None
    payload = emit.emit_payload(layout)
    if cfg.output_path:
        try:
            with open(cfg.output_path, "wb") as fh:
                fh.write(payload)
        except OSError as exc:
            raise UsageError(f"cannot write {cfg.output_path}: {exc.strerror}") from None
    sys.stdout.write(emit.render_report(chains, layout, cfg.format))
    return EXIT_OK


def cmd_verify(cfg: Config) -> int:
    lifted = lift_corpus(_read(cfg.gadgets_path, "gadgets"), cfg.max_depth)
    program = _program(cfg)
    if not cfg.payload_path:
        raise UsageError("missing --payload")
    try:
        with open(cfg.payload_path, "rb") as fh:
            payload = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {cfg.payload_path}: {exc.strerror}") from None
    if len(payload) % 8:
        raise UsageError("payload length is not a multiple of 8")
    try:
        objectives = [o.required for o in synth.objective_from_program(program)]
    except synth.TooManyArgs as exc:
        raise UsageError(str(exc)) from None
    verdict = emu.verify_payload(payload, lifted.corpus, objectives, cfg.base, seed=cfg.seed)
    doc = {"verdict": "pass" if verdict.passed else "fail"}
    if not verdict.passed:
        doc.update(register=verdict.register, expected=verdict.expected,
                   actual=verdict.actual, reason=verdict.reason)
    if cfg.trace:
        import random
        init = emu.random_registers(random.Random(cfg.seed))
        try:
            run = emu.execute_payload(payload, lifted.corpus, cfg.base, init, trace=True)
            doc["trace"] = run.trace.to_json()
            doc["syscalls"] = [{r: e.regs[r] for r in emu.SYSCALL_ARG_REGS} for e in run.events]
        except emu.EmuFault as exc:
            doc["trace_error"] = f"{exc.kind}: {exc}"
    if cfg.format == "structured" or cfg.trace:
        _emit(cfg, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    else:
        _emit(cfg, f"{verdict}\n")
    return EXIT_OK if verdict.passed else EXIT_DOMAIN


COMMANDS = {"lift": cmd_lift, "classify": cmd_classify, "chain": cmd_chain,
            "verify": cmd_verify, "stats": cmd_stats}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ropforge", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--gadgets", dest="gadgets_path", required=True, metavar="PATH")
        sp.add_argument("--program", dest="program_path", metavar="PATH")
        sp.add_argument("--payload", dest="payload_path", metavar="PATH")
        sp.add_argument("--base", type=lambda s: int(s, 16), default=0, metavar="HEX")
        sp.add_argument("--max-chain-len", type=int, default=6, metavar="N")
        sp.add_argument("--max-depth", type=int, default=10, metavar="N")
        sp.add_argument("--out", dest="output_path", metavar="PATH")
        sp.add_argument("--format", choices=("text", "structured"), default="text")
        sp.add_argument("--seed", type=int, default=0, metavar="N")
        sp.add_argument("--trace", action="store_true")
        sp.add_argument("--workers", type=int, default=1, metavar="N")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    opts = {k: v for k, v in vars(args).items() if k != "verbose"}
    try:
        cfg = Config(**opts)
        return COMMANDS[cfg.command](cfg)
    except (UsageError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
