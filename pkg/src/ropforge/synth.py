"""Chain search: objective states, the Category-1 state catalog, and
Category-2 back-solving, combined into one ordered gadget chain.
"""

from __future__ import annotations

import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from itertools import chain as iconcat
from typing import Iterable, Mapping, Sequence

from .asm import MASK64
from .semantics import (
    BinOp,
    Const,
    DivWide,
    EvalFault,
    Free,
    GadgetSummary,
    Poison,
    Reg,
    RValue,
    UnknownValue,
    UnOp,
    Var,
    ZExt32,
    children,
    evaluate,
    regs_read,
    substitute,
    walk,
)

MAX_EXPR_NODES = 48
DUMMY = 0x4242424242424242
SYSCALL_ARG_REGS = ("rdi", "rsi", "rdx", "r10", "r8", "r9")
OBJECTIVE_REGS = ("rax",) + SYSCALL_ARG_REGS


class SynthError(Exception):
    pass


class TooManyArgs(SynthError):
    pass


class UnknownSyscall(SynthError):
    pass


class ProgramSyntaxError(SynthError):
    pass


class NoChain(SynthError):
    def __init__(self, unsatisfied: Iterable[str]):
        self.unsatisfied = tuple(unsatisfied)
        super().__init__("no chain for " + ", ".join(self.unsatisfied))


class MissingTrigger(SynthError):
    pass


class MissingResumableTrigger(SynthError):
    pass


class ChainFault(SynthError):
    """Abstract execution found a step that could trap."""


# --- programs and objectives -------------------------------------------------


@dataclass(frozen=True)
class SyscallCall:
    number: int
    args: tuple[int, ...] = ()
    name: str | None = None

    def __str__(self) -> str:
        head = self.name or f"@{self.number}"
        return f"{head}(" + ", ".join(hex(a) if a > 9 else str(a) for a in self.args) + ")"


@dataclass(frozen=True)
class ProgramSpec:
    calls: tuple[SyscallCall, ...]


@dataclass(frozen=True)
class SyscallConvention:
    numbers: Mapping[str, int]
    arg_regs: tuple[str, ...] = SYSCALL_ARG_REGS

    def number(self, name: str) -> int:
        try:
            return self.numbers[name]
        except KeyError:
            raise UnknownSyscall(f"unknown syscall {name!r}") from None


def load_syscall_table(path: str | os.PathLike | None = None) -> SyscallConvention:
    """Read ``name number`` lines; ROPFORGE_SYSCALL_TABLE overrides the shipped table."""
    path = path or os.environ.get("ROPFORGE_SYSCALL_TABLE")
    if path:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = resources.files("ropforge").joinpath("data/syscalls_x86_64.txt").read_text("utf-8")
    numbers = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            name, num = line.split()
            numbers[name] = int(num, 0)
    return SyscallConvention(numbers)


_CALL_RE = re.compile(r"^\s*(@?)([A-Za-z0-9_]+)\s*\((.*)\)\s*;?\s*$")


def parse_program(text: str, convention: SyscallConvention | None = None) -> ProgramSpec:
    convention = convention or load_syscall_table()
    calls = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _CALL_RE.match(line)
        if m is None:
            raise ProgramSyntaxError(f"cannot parse call {raw!r}")
        at, head, body = m.groups()
        if at:
            number, name = int(head, 0), None
        else:
            number, name = convention.number(head), head
        args = []
        for a in (p.strip() for p in body.split(",")) if body.strip() else ():
            try:
                v = int(a, 0)
            except ValueError:
                raise ProgramSyntaxError(f"argument {a!r} is not an integer") from None
            if not -(1 << 63) <= v <= MASK64:
                raise ProgramSyntaxError(f"argument {a!r} does not fit in 64 bits")
            args.append(v)
        calls.append(SyscallCall(number, tuple(args), name))
    if not calls:
        raise ProgramSyntaxError("program has no calls")
    return ProgramSpec(tuple(calls))


@dataclass(frozen=True)
class ObjectiveState:
    required: Mapping[str, int]

    def __post_init__(self) -> None:
        bad = set(self.required) - set(OBJECTIVE_REGS)
        if bad:
            raise ValueError(f"objective names non-syscall registers: {sorted(bad)}")
        ordered = {r: self.required[r] & MASK64 for r in OBJECTIVE_REGS if r in self.required}
        object.__setattr__(self, "required", ordered)

    def __iter__(self):
        return iter(self.required)

    def __len__(self) -> int:
        return len(self.required)

    def items(self):
        return self.required.items()

    def index(self, reg: str) -> int:
        return list(self.required).index(reg)


def objective_from_program(p: ProgramSpec, table: SyscallConvention | None = None) -> list[ObjectiveState]:
    arg_regs = (table.arg_regs if table else SYSCALL_ARG_REGS)
    out = []
    for call in p.calls:
        if len(call.args) > len(arg_regs):
            raise TooManyArgs(f"{call} has {len(call.args)} arguments; at most {len(arg_regs)}")
        req = {"rax": call.number}
        req.update(zip(arg_regs, call.args))
        out.append(ObjectiveState(req))
    return out


# --- limits, steps, chains ----------------------------------------------------


@dataclass(frozen=True)
class Limits:
    max_chain_len: int = 6
    max_states: int = 20_000
    max_candidates: int = 12
    max_cat2_nodes: int = 4_000
    workers: int = 1

    def __post_init__(self) -> None:
        if self.max_chain_len < 1:
            raise ValueError("max_chain_len must be >= 1")


@dataclass(frozen=True)
class Step:
    summary: GadgetSummary
    free_values: tuple[int, ...] = ()

    @property
    def dummy_count(self) -> int:
        return self.summary.rsp_adjust // 8

    @property
    def words(self) -> int:
        return self.summary.payload_words


@dataclass(frozen=True)
class Chain:
    steps: tuple[Step, ...]
    trigger: GadgetSummary
    objective: ObjectiveState

    @property
    def words(self) -> int:
        return sum(s.words for s in self.steps) + 1

    def establish_order(self) -> tuple[int, ...]:
        """Per step, the objective index of the earliest register it finally sets."""
        regs = list(self.objective.required)
        last = {}
        for i, st in enumerate(self.steps):
            for r in st.summary.written:
                if r in self.objective.required:
                    last[r] = i
        out = [len(regs)] * len(self.steps)
        for r, i in last.items():
            out[i] = min(out[i], regs.index(r))
        return tuple(out)

    def sort_key(self) -> tuple:
        """Fewest steps, then fewest payload words, then objective registers
        established in argument order, then smallest offsets."""
        return (len(self.steps), self.words, self.establish_order(),
                tuple(s.summary.offset for s in self.steps))


def schedulable(s: GadgetSummary) -> bool:
    """Usable in a chain: no poison, no dropped divisions, and divisions only
    by nonzero constants."""
    if s.traps:
        return False
    for eq in s.equations:
        for n in walk(eq.rhs):
            if isinstance(n, Poison):
                return False
            if isinstance(n, DivWide) and not (isinstance(n.divisor, Const) and n.divisor.value):
                return False
            if isinstance(n, BinOp) and n.op in ("div", "mod") and not (
                    isinstance(n.right, Const) and n.right.value):
                return False
    return True


def abstract_execute(c: Chain | Sequence[Step], entry: Mapping[str, int] | None = None) -> dict[str, int]:
    """Known register values after running the steps from ``entry``.

    Registers absent from ``entry`` are Unknown and anything computed from
    them stays Unknown (absent from the result). A division whose operands
    are not all Known raises ChainFault, as does a concrete fault.
    """
    steps = c.steps if isinstance(c, Chain) else c
    state = dict(entry or {})
    for step in steps:
        s = step.summary
        new = dict(state)
        for t in s.traps:
            try:
                evaluate(t, state, step.free_values)
            except UnknownValue:
                raise ChainFault(f"division with unknown operand in {s.gadget}") from None
            except EvalFault as exc:
                raise ChainFault(f"{s.gadget}: {exc}") from None
        for eq in s.equations:
            try:
                new[eq.dest] = evaluate(eq.rhs, state, step.free_values)
            except UnknownValue:
                if any(isinstance(n, DivWide) or (isinstance(n, BinOp) and n.op in ("div", "mod"))
                       for n in walk(eq.rhs)):
                    raise ChainFault(f"division with unknown operand in {s.gadget}") from None
                new.pop(eq.dest, None)
            except EvalFault as exc:
                raise ChainFault(f"{s.gadget}: {exc}") from None
        state = new
    return state


def satisfies(state: Mapping[str, int], objective: ObjectiveState) -> bool:
    return all(state.get(r) == v for r, v in objective.items())


# --- back-solving ---------------------------------------------------------------


def _unknown_leaves(node: RValue) -> list[Var]:
    seen = []
    for n in walk(node):
        if isinstance(n, Var) and n not in seen:
            seen.append(n)
    return sorted(seen, key=lambda v: repr(v.key))


def invert(node: RValue, target: int) -> tuple[Var, int] | None:
    """Solve ``node == target`` for its single unknown leaf.

    Handles copies, add/sub/xor with a constant, neg, not and zero-extension.
    """
    target &= MASK64
    if isinstance(node, Var):
        return node, target
    if isinstance(node, ZExt32):
        return invert(node.operand, target) if target <= 0xFFFFFFFF else None
    if isinstance(node, UnOp):
        inv = (-target) & MASK64 if node.op == "neg" else ~target & MASK64
        return invert(node.operand, inv)
    if isinstance(node, BinOp) and node.op in ("add", "sub", "xor"):
        a, b = node.left, node.right
        if isinstance(b, Const):
            c = b.value
            nt = {"add": target - c, "sub": target + c, "xor": target ^ c}[node.op]
            return invert(a, nt)
        if isinstance(a, Const):
            c = a.value
            nt = {"add": target - c, "sub": c - target, "xor": target ^ c}[node.op]
            return invert(b, nt)
    return None


def solve_for(expr: RValue, target: int) -> dict | None:
    """Bindings for the Var leaves of ``expr`` making it equal ``target``.

    Every unknown but one is pinned to DUMMY; each choice of the remaining
    unknown is tried in key order. The result is checked by evaluation.
    """
    leaves = _unknown_leaves(expr)
    if not leaves:
        try:
            return {} if evaluate(expr, {}) == target else None
        except (EvalFault, UnknownValue):
            return None
    for pick in leaves:
        pinned = {v.key: DUMMY for v in leaves if v != pick}
        env_expr = _bind_vars(expr, pinned)
        sol = invert(env_expr, target)
        if sol is None or sol[0] != pick:
            continue
        binding = dict(pinned)
        binding[pick.key] = sol[1]
        try:
            if evaluate(expr, {}, vars=binding) == target:
                return binding
        except (EvalFault, UnknownValue):
            continue
    return None


def _bind_vars(node: RValue, binding: Mapping) -> RValue:
    if isinstance(node, Var):
        return Const(binding[node.key]) if node.key in binding else node
    kids = children(node)
    if not kids:
        return node
    from .semantics import _rebuild, simplify_node
    return simplify_node(_rebuild(node, tuple(_bind_vars(k, binding) for k in kids)))


def _free_to_var(node: RValue, tag) -> RValue:
    if isinstance(node, Free):
        return Var((tag, node.slot))
    kids = children(node)
    if not kids:
        return node
    from .semantics import _rebuild
    return _rebuild(node, tuple(_free_to_var(k, tag) for k in kids))


# --- Category-1 catalog ----------------------------------------------------------


@dataclass(frozen=True)
class FreeRef:
    """An unbound stack word of step ``step``, slot ``slot``; settable at will."""

    step: int
    slot: int

    @property
    def key(self) -> tuple:
        return ("root", self.step, self.slot)


@dataclass(frozen=True)
class CatalogEntry:
    state: Mapping[str, object]  # reg -> int | FreeRef
    sequence: tuple[tuple[GadgetSummary, tuple], ...]  # (summary, per-slot int | None)

    def steps(self, binds: Mapping[tuple, int] | None = None) -> list[Step]:
        binds = binds or {}
        out = []
        for i, (s, slots) in enumerate(self.sequence):
            vals = tuple(v if v is not None else binds.get(("root", i, j), DUMMY)
                         for j, v in enumerate(slots))
            out.append(Step(s, vals))
        return out

    def bound_view(self, objective: ObjectiveState) -> tuple[dict, list[Step]]:
        binds = _objective_binds(self.state, objective, {})
        steps = self.steps(binds)
        state = {}
        for r, v in self.state.items():
            state[r] = v if isinstance(v, int) else binds.get(v.key, DUMMY)
        return state, steps


def _objective_binds(state: Mapping[str, object], objective: ObjectiveState,
                     binds: Mapping[tuple, int]) -> dict:
    out = dict(binds)
    for r, t in objective.items():
        v = state.get(r)
        if isinstance(v, FreeRef) and v.key not in out:
            out[v.key] = t
    return out


@dataclass
class StateCatalog:
    entries: list[CatalogEntry] = field(default_factory=list)
    root: CatalogEntry = field(default_factory=lambda: CatalogEntry({}, ()))
    truncated: bool = False

    def __len__(self) -> int:
        return len(self.entries)

    def matching(self, reg: str, value: int) -> list[CatalogEntry]:
        return [e for e in self.entries if e.state.get(reg) == value
                or isinstance(e.state.get(reg), FreeRef)]


def _gadget_effect(s: GadgetSummary, objective: ObjectiveState):
    """Per-gadget writes: reg -> int or ("free", slot), and the slot bindings."""
    slots: list = [None] * s.free_slots
    pure = {eq.dest: eq.rhs.slot for eq in s.equations if isinstance(eq.rhs, Free)}
    for eq in s.equations:
        if eq.dest in pure or eq.dest not in objective.required:
            continue
        expr = _free_to_var(_bind_slots(eq.rhs, slots), "s")
        sol = solve_for(expr, objective.required[eq.dest])
        if sol:
            for (_, j), v in sol.items():
                slots[j] = v
    for eq in s.equations:
        if eq.dest not in pure:
            for n in walk(eq.rhs):
                if isinstance(n, Free) and slots[n.slot] is None:
                    slots[n.slot] = DUMMY
    writes = {}
    for eq in s.equations:
        if eq.dest in pure and slots[pure[eq.dest]] is None:
            writes[eq.dest] = ("free", pure[eq.dest])
        else:
            try:
                writes[eq.dest] = evaluate(eq.rhs, {}, [DUMMY if v is None else v for v in slots])
            except EvalFault:
                return None
    return writes, tuple(slots)


def _bind_slots(node: RValue, slots: Sequence) -> RValue:
    if isinstance(node, Free) and slots[node.slot] is not None:
        return Const(slots[node.slot])
    kids = children(node)
    if not kids:
        return node
    from .semantics import _rebuild, simplify_node
    return simplify_node(_rebuild(node, tuple(_bind_slots(k, slots) for k in kids)))


def _state_key(state: Mapping[str, object], relevant: Sequence[str]) -> tuple:
    names: dict = {}
    key = []
    for r in relevant:
        if r not in state:
            continue
        v = state[r]
        if isinstance(v, FreeRef):
            v = ("free", names.setdefault(v, len(names)))
        key.append((r, v))
    return tuple(key)


def enumerate_cat1_states(cat1: Sequence[GadgetSummary], objective: ObjectiveState,
                          limits: Limits = Limits(),
                          relevant: Iterable[str] | None = None) -> StateCatalog:
    """Breadth-first enumeration of register states reachable with Category-1 gadgets.

    A state is saved only if no earlier (shorter) sequence reached the same
    state over the ``relevant`` registers.
    """
    relevant = tuple(sorted(set(relevant or ()) | set(objective.required)))
    effects = []
    for s in sorted(cat1, key=lambda s: s.offset):
        eff = _gadget_effect(s, objective)
        if eff is not None and any(r in relevant for r in eff[0]):
            effects.append((s, *eff))
    catalog = StateCatalog()
    if not effects:
        return catalog
    seen = {_state_key({}, relevant)}
    frontier = [catalog.root]

    def extend(parent: CatalogEntry) -> list[CatalogEntry]:
        out = []
        i = len(parent.sequence)
        for s, writes, slots in effects:
            state = dict(parent.state)
            for r, v in writes.items():
                state[r] = FreeRef(i, v[1]) if isinstance(v, tuple) else v
            out.append(CatalogEntry(state, parent.sequence + ((s, slots),)))
        return out

    pool = ThreadPoolExecutor(limits.workers) if limits.workers > 1 else None
    try:
        for _ in range(limits.max_chain_len):
            if pool:
                batches = list(pool.map(extend, frontier))
            else:
                batches = [extend(p) for p in frontier]
            frontier = []
            # merge in (parent, gadget) order so the result is schedule-independent
            for child in iconcat.from_iterable(batches):
                k = _state_key(child.state, relevant)
                if k in seen:
                    continue
                seen.add(k)
                catalog.entries.append(child)
                frontier.append(child)
                if len(catalog.entries) >= limits.max_states:
                    catalog.truncated = True
                    return catalog
            if not frontier:
                break
    finally:
        if pool:
            pool.shutdown()
    return catalog


# --- Category-2 solving -----------------------------------------------------------


@dataclass(frozen=True)
class Candidate:
    steps: tuple[Step, ...]

    @property
    def cost(self) -> tuple:
        return (len(self.steps), sum(s.words for s in self.steps),
                tuple(s.summary.offset for s in self.steps))


def _relabel(s: GadgetSummary, tag) -> dict[str, RValue]:
    return {eq.dest: _free_to_var(eq.rhs, tag) for eq in s.equations}


def solve_register(r: str, target: int, catalog: StateCatalog,
                   cat2: Sequence[GadgetSummary], limits: Limits = Limits(),
                   objective: ObjectiveState | None = None) -> list[Candidate]:
    """Category-2 sequences ending with ``r == target`` from a catalog root.

    Searches backwards from gadgets that write ``r``, composing each
    prepended gadget into the expression, and keeps a sequence when some
    catalog state (tried shortest first) makes the expression hit the target.
    """
    target &= MASK64
    objective = objective or ObjectiveState({})
    cat2 = sorted(cat2, key=lambda s: s.offset)
    roots = [catalog.root] + catalog.entries
    by_need: dict[frozenset, list[CatalogEntry]] = {}
    found: list[Candidate] = []
    # node: (sequence of (summary, tag) in forward order, expression)
    level = [(((s, 0),), _relabel(s, ("c", 0))[r]) for s in cat2 if s.equation_for(r)]
    nodes = 0
    counter = 1
    for depth in range(1, limits.max_chain_len + 1):
        if len(found) >= limits.max_candidates and found[limits.max_candidates - 1].cost[0] <= depth:
            break
        nxt = []
        for seq, expr in level:
            nodes += 1
            if nodes > limits.max_cat2_nodes:
                break
            need = frozenset(regs_read(expr))
            if need not in by_need:
                by_need[need] = [e for e in roots if need <= e.state.keys()]
            matched = 0
            for root in by_need[need]:
                if len(root.sequence) + len(seq) > limits.max_chain_len:
                    continue
                cand = _try_root(root, seq, expr, target, objective)
                if cand is not None:
                    found.append(cand)
                    matched += 1
                    if matched >= limits.max_candidates:
                        break
            if depth < limits.max_chain_len and _size(expr) <= MAX_EXPR_NODES:
                for s in cat2:
                    if not set(s.written) & need:
                        continue
                    if nodes + len(nxt) >= limits.max_cat2_nodes:
                        break
                    tag = ("c", counter)
                    counter += 1
                    env = {d: v for d, v in _relabel(s, tag).items() if d in need}
                    nxt.append((((s, counter - 1),) + seq, substitute(expr, env)))
        found.sort(key=lambda c: c.cost)
        level = nxt
        if not level:
            break
    found.sort(key=lambda c: c.cost)
    return found[: limits.max_candidates]


def _size(node: RValue) -> int:
    return sum(1 for _ in walk(node))


def _try_root(root: CatalogEntry, seq, expr: RValue, target: int,
              objective: ObjectiveState) -> Candidate | None:
    env = {}
    for reg in regs_read(expr):
        v = root.state[reg]
        env[reg] = Var(v.key) if isinstance(v, FreeRef) else Const(v)
    bound = substitute(expr, env)
    binding = solve_for(bound, target)
    if binding is None:
        return None
    binds = _objective_binds(root.state, objective, binding)
    steps = root.steps(binds)
    for s, tagno in seq:
        vals = tuple(binding.get((("c", tagno), j), DUMMY) for j in range(s.free_slots))
        steps.append(Step(s, vals))
    return Candidate(tuple(steps))


# --- chain assembly ----------------------------------------------------------------


@dataclass
class _Block:
    cand: Candidate
    sat: frozenset
    clobbers: frozenset
    duty: frozenset = frozenset()
    priority: int = 0


def _analyse(cand: Candidate, objective: ObjectiveState) -> _Block | None:
    try:
        final = abstract_execute(cand.steps)
    except ChainFault:
        return None
    written = set()
    for st in cand.steps:
        written.update(st.summary.written)
    sat = frozenset(r for r, v in objective.items() if final.get(r) == v)
    clob = frozenset(r for r in objective.required if r in written and r not in sat)
    return _Block(cand, sat, clob)


def _order(blocks: list[_Block]) -> list[_Block] | None:
    """Stable topological order: a block that clobbers another's duty runs first."""
    n = len(blocks)
    before = {i: set() for i in range(n)}
    for i, a in enumerate(blocks):
        for j, b in enumerate(blocks):
            if i != j and a.clobbers & b.duty:
                before[j].add(i)
    done: list[int] = []
    remaining = set(range(n))
    while remaining:
        ready = [i for i in remaining if before[i] <= set(done)]
        if not ready:
            return None
        pick = min(ready, key=lambda i: (blocks[i].priority, i))
        done.append(pick)
        remaining.remove(pick)
    return [blocks[i] for i in done]


def _candidates_for(r: str, target: int, catalog: StateCatalog, cat2, objective,
                    limits: Limits) -> list[Candidate]:
    cands = []
    for e in catalog.matching(r, target):
        binds = _objective_binds(e.state, objective, {})
        cands.append(Candidate(tuple(e.steps(binds))))
    cands.sort(key=lambda c: c.cost)
    if cands:
        return cands[: limits.max_candidates]
    return solve_register(r, target, catalog, cat2, limits, objective)


def pick_trigger(summaries: Iterable[GadgetSummary], resumable: bool = False) -> GadgetSummary:
    triggers = sorted((s for s in summaries if s.is_syscall_trigger), key=lambda s: s.offset)
    if resumable:
        triggers = [t for t in triggers if t.gadget.is_resumable_trigger]
        if not triggers:
            raise MissingResumableTrigger("no `syscall ; ret` gadget for a multi-call program")
    if not triggers:
        raise MissingTrigger("no syscall gadget in the corpus")
    return triggers[0]


def build_chain(objective: ObjectiveState, summaries: Sequence[GadgetSummary],
                limits: Limits = Limits(), trigger: GadgetSummary | None = None) -> Chain:
    """Cheapest valid chain reaching ``objective``, ending with a syscall trigger."""
    trigger = trigger or pick_trigger(summaries)
    if not objective.required:
        return Chain((), trigger, objective)
    usable = [s for s in summaries if not s.is_syscall_trigger and schedulable(s)]
    cat1 = [s for s in usable if s.category == 1]
    cat2 = [s for s in usable if s.category == 2]
    relevant = set(objective.required)
    for s in cat2:
        relevant |= s.reads
    catalog = enumerate_cat1_states(cat1, objective, limits, relevant)

    per_reg: dict[str, list[_Block]] = {}
    for r, t in objective.items():
        blocks = []
        for c in _candidates_for(r, t, catalog, cat2, objective, limits):
            b = _analyse(c, objective)
            if b is not None and r in b.sat:
                blocks.append(b)
        per_reg[r] = blocks
    missing = [r for r, bl in per_reg.items() if not bl]
    if missing:
        raise NoChain(missing)

    regs = list(objective.required)
    best: list = [None]

    def search(i: int, chosen: list[_Block], covered: frozenset, nsteps: int) -> None:
        if best[0] is not None and nsteps > best[0].sort_key()[0]:
            return
        while i < len(regs) and regs[i] in covered:
            i += 1
        if i == len(regs):
            ordered = _order(chosen)
            if ordered is None:
                return
            steps = tuple(iconcat.from_iterable(b.cand.steps for b in ordered))
            chain = Chain(steps, trigger, objective)
            try:
                if not satisfies(abstract_execute(chain), objective):
                    return
            except ChainFault:
                return
            if best[0] is None or chain.sort_key() < best[0].sort_key():
                best[0] = chain
            return
        for b in per_reg[regs[i]]:
            duty = b.sat - covered
            blk = _Block(b.cand, b.sat, b.clobbers, duty, min(objective.index(r) for r in duty))
            search(i + 1, chosen + [blk], covered | b.sat, nsteps + len(b.cand.steps))

    search(0, [], frozenset(), 0)
    if best[0] is None:
        raise NoChain(regs)
    return best[0]


def plan_multicall(p: ProgramSpec, summaries: Sequence[GadgetSummary],
                   limits: Limits = Limits(),
                   convention: SyscallConvention | None = None) -> list[Chain]:
    """One chain per call; every call but the last needs a resumable trigger.

    Each chain is built from an all-Unknown entry state, which covers the
    rcx/r11 clobber of the preceding syscall.
    """
    objectives = objective_from_program(p, convention)
    chains = []
    for k, obj in enumerate(objectives):
        last = k == len(objectives) - 1
        trig = pick_trigger(summaries, resumable=not last)
        chains.append(build_chain(obj, summaries, limits, trig))
    return chains
