"""Machine specs and run trees for bounded-tape and unbounded-tape machines.

Three kinds share one spec type: ``lba`` (endmarked bounded tape, transition
relation, moves -1/0/1), ``tm`` (deterministic, total transition function,
moves -1/1), and ``ntm`` (relation, moves -1/0/1). Final states self-loop in
place; stuck non-final configurations of the relational kinds are leaves.

Unbounded-tape configurations are head-relative: the scanned cell is index 0
and every step re-centers, so two configurations that look alike around the
head are the same configuration.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

from .core import DEFAULT_NODE_CAP, Defect
from .errors import (
    BudgetExceeded,
    InputNotInAlphabet,
    InputTooLong,
    InvalidMachineKind,
    MalformedConfig,
    StuckConfiguration,
    ValidationFailed,
)

KINDS = ("lba", "tm", "ntm")
MOVES = {"lba": (-1, 0, 1), "tm": (-1, 1), "ntm": (-1, 0, 1)}

ACCEPT = "ACCEPT"
REJECT_EXHAUSTED = "REJECT_EXHAUSTED"
NO_ACCEPT_WITHIN_BUDGET = "NO_ACCEPT_WITHIN_BUDGET"

_BAD_SYMBOL_CHARS = set(" \t\n,()=@;.\"'")


@dataclass(frozen=True)
class Transition:
    src: str
    read: str
    dst: str
    write: str
    move: int


@dataclass(frozen=True)
class MachineSpec:
    kind: str
    states: tuple[str, ...]
    initial: str
    finals: frozenset[str]
    input_alphabet: tuple[str, ...]
    transitions: tuple[Transition, ...]
    blank: str = "#"
    left_marker: str = ">"
    right_marker: str = "<"

    @property
    def tape_alphabet(self) -> tuple[str, ...]:
        extras = [self.blank]
        if self.kind == "lba":
            extras += [self.left_marker, self.right_marker]
        return self.input_alphabet + tuple(e for e in extras if e not in self.input_alphabet)

    @cached_property
    def delta(self) -> dict:
        """(state, symbol) -> tuple of transitions, sorted for determinism."""
        table: dict[tuple[str, str], list[Transition]] = {}
        for t in self.transitions:
            table.setdefault((t.src, t.read), []).append(t)
        return {
            k: tuple(sorted(v, key=lambda t: (t.dst, t.write, t.move)))
            for k, v in table.items()
        }

    def fingerprint(self) -> str:
        body = repr(
            (
                self.kind,
                self.states,
                self.initial,
                tuple(sorted(self.finals)),
                self.input_alphabet,
                tuple(sorted((t.src, t.read, t.dst, t.write, t.move) for t in self.transitions)),
                self.blank,
                self.left_marker,
                self.right_marker,
            )
        )
        return "sha256:" + hashlib.sha256(body.encode()).hexdigest()


def _symbol_ok(sym: str) -> bool:
    return isinstance(sym, str) and sym != "" and not (set(sym) & _BAD_SYMBOL_CHARS)


def validate_machine(spec: MachineSpec) -> list[Defect]:
    """Structural checks; empty list means the spec is usable."""
    defects = []
    if spec.kind not in KINDS:
        defects.append(Defect("BadKind", spec.kind, f"kind must be one of {KINDS}"))
        return defects
    if not spec.states:
        defects.append(Defect("NoStates", "states", "empty state set"))
    if len(set(spec.states)) != len(spec.states):
        defects.append(Defect("DuplicateState", "states", "repeated state name"))
    if spec.initial not in spec.states:
        defects.append(Defect("BadInitial", spec.initial, "initial state undeclared"))
    if not spec.finals <= set(spec.states):
        defects.append(Defect("BadFinal", "finals", "final state undeclared"))
    if set(spec.states) == spec.finals:
        defects.append(Defect("AllFinal", "finals", "finals must be a proper subset"))
    for s in spec.states:
        if not _symbol_ok(s):
            defects.append(Defect("BadToken", s, "state names must be plain tokens"))

    specials = {spec.blank} | (
        {spec.left_marker, spec.right_marker} if spec.kind == "lba" else set()
    )
    if len(set(spec.input_alphabet)) != len(spec.input_alphabet):
        defects.append(Defect("DuplicateSymbol", "input_alphabet", "repeated symbol"))
    for sym in tuple(spec.input_alphabet) + tuple(specials):
        if not _symbol_ok(sym):
            defects.append(Defect("BadToken", sym, "symbols must be plain tokens"))
    if set(spec.input_alphabet) & specials:
        defects.append(Defect("SymbolClash", "input_alphabet", "blank or marker used as input"))
    if spec.kind == "lba" and len({spec.blank, spec.left_marker, spec.right_marker}) != 3:
        defects.append(Defect("SymbolClash", "markers", "blank and markers must differ"))

    tape = set(spec.tape_alphabet)
    moves = set(MOVES[spec.kind])
    seen = set()
    for t in spec.transitions:
        name = f"{t.src},{t.read}->{t.dst},{t.write},{t.move}"
        if (t.src, t.read, t.dst, t.write, t.move) in seen:
            defects.append(Defect("DuplicateTransition", name, "listed twice"))
        seen.add((t.src, t.read, t.dst, t.write, t.move))
        if t.src not in spec.states or t.dst not in spec.states:
            defects.append(Defect("UnknownState", name, "transition uses undeclared state"))
            continue
        if t.src in spec.finals:
            defects.append(Defect("DeltaFromFinal", name, "no transitions leave final states"))
        if t.read not in tape or t.write not in tape:
            defects.append(Defect("UnknownSymbol", name, "transition uses undeclared symbol"))
        if t.move not in moves:
            defects.append(Defect("BadMove", name, f"move must be in {sorted(moves)}"))
        if spec.kind == "lba":
            if t.read == spec.left_marker and (t.write != spec.left_marker or t.move == -1):
                defects.append(Defect("MarkerViolation", name, "left marker is a wall"))
            if t.read == spec.right_marker and (t.write != spec.right_marker or t.move == 1):
                defects.append(Defect("MarkerViolation", name, "right marker is a wall"))
            if t.read not in (spec.left_marker, spec.right_marker) and t.write in (
                spec.left_marker,
                spec.right_marker,
            ):
                defects.append(Defect("MarkerViolation", name, "markers cannot be written inward"))

    if spec.kind == "tm":
        for q in spec.states:
            if q in spec.finals:
                continue
            for g in spec.tape_alphabet:
                hits = [t for t in spec.transitions if t.src == q and t.read == g]
                if not hits:
                    defects.append(Defect("MissingDelta", f"{q},{g}", "tm delta must be total"))
                elif len(hits) > 1:
                    defects.append(Defect("NondeterministicDelta", f"{q},{g}", "tm delta must be single-valued"))
    return defects


def require_valid(spec: MachineSpec) -> MachineSpec:
    defects = validate_machine(spec)
    if defects:
        raise ValidationFailed(
            f"machine spec has {len(defects)} defect(s): {defects[0].code} on {defects[0].subject}",
            defects=defects,
        )
    return spec


@dataclass(frozen=True)
class LbaConfig:
    """Absolute-position configuration; tape includes both markers."""

    state: str
    head: int
    tape: tuple[str, ...]


@dataclass(frozen=True)
class TapeConfig:
    """Head-relative configuration: the scanned cell is index 0."""

    state: str
    cells: tuple[tuple[int, str], ...]  # sorted by index, blanks dropped

    def cell(self, index: int, blank: str) -> str:
        for i, sym in self.cells:
            if i == index:
                return sym
        return blank


def _make_tape_config(state: str, cells: dict[int, str], blank: str) -> TapeConfig:
    kept = tuple(sorted((i, s) for i, s in cells.items() if s != blank))
    return TapeConfig(state, kept)


def initial_machine_config(spec: MachineSpec, input_str: str, tape_len: int | None = None):
    """Start configuration for an input string.

    LBA tapes hold ``tape_len`` working cells (default: just enough for the
    input, at least one); the head starts on the left marker. Unbounded tapes
    put the first input symbol under the head and the rest to its right.
    """
    symbols = list(input_str)
    bad = [s for s in symbols if s not in spec.input_alphabet]
    if bad:
        raise InputNotInAlphabet(f"symbols {bad} not in input alphabet")
    if spec.kind == "lba":
        n = tape_len if tape_len is not None else max(len(symbols), 1)
        if len(symbols) > n:
            raise InputTooLong(f"input of length {len(symbols)} on a {n}-cell tape")
        tape = (
            (spec.left_marker,)
            + tuple(symbols)
            + (spec.blank,) * (n - len(symbols))
            + (spec.right_marker,)
        )
        return LbaConfig(spec.initial, 0, tape)
    cells = {i: s for i, s in enumerate(symbols)}
    return _make_tape_config(spec.initial, cells, spec.blank)


def machine_step(spec: MachineSpec, config) -> tuple:
    """Successors as (config, transition, direction) triples.

    Final states self-loop with direction 0. A stuck non-final configuration
    yields the empty tuple for the relational kinds and raises for ``tm``,
    whose transition function is total by validation.
    """
    if spec.kind == "lba":
        if not isinstance(config, LbaConfig):
            raise MalformedConfig(f"lba step on {type(config).__name__}")
        if not (0 <= config.head < len(config.tape)):
            raise MalformedConfig(f"head {config.head} off the tape")
        scanned = config.tape[config.head]
        if config.state in spec.finals:
            loop = Transition(config.state, scanned, config.state, scanned, 0)
            return ((config, loop, 0),)
        out = []
        for t in spec.delta.get((config.state, scanned), ()):
            tape = list(config.tape)
            tape[config.head] = t.write
            out.append((LbaConfig(t.dst, config.head + t.move, tuple(tape)), t, t.move))
        return tuple(out)

    if not isinstance(config, TapeConfig):
        raise MalformedConfig(f"{spec.kind} step on {type(config).__name__}")
    scanned = config.cell(0, spec.blank)
    if config.state in spec.finals:
        loop = Transition(config.state, scanned, config.state, scanned, 0)
        return ((config, loop, 0),)
    entries = spec.delta.get((config.state, scanned), ())
    if not entries and spec.kind == "tm":
        raise StuckConfiguration(f"tm has no move from ({config.state},{scanned})")
    out = []
    for t in entries:
        cells = dict(config.cells)
        cells[0] = t.write
        shifted = {i - t.move: s for i, s in cells.items()}
        out.append((_make_tape_config(t.dst, shifted, spec.blank), t, t.move))
    return tuple(out)


class RunTree:
    """A bounded exploration tree over arbitrary hashable node values.

    ``closed`` marks leaves whose futures are fully known: ``stuck`` (no
    successors) or ``loop`` (every successor equals an ancestor on its own
    branch, so the branch repeats forever). ``loops`` records the skipped
    back-edges as (node, ancestor, label) triples.
    """

    def __init__(self, budget: int):
        self.budget = budget
        self.nodes: list = []
        self.parent: list[int | None] = []
        self.depth_of: list[int] = []
        self.children: list[list[int]] = []
        self.labels: list = []
        self.closed: dict[int, str] = {}
        self.loops: list[tuple[int, int, object]] = []

    def add_root(self, node) -> int:
        assert not self.nodes
        self.nodes.append(node)
        self.parent.append(None)
        self.depth_of.append(0)
        self.children.append([])
        self.labels.append(None)
        return 0

    def add_child(self, parent_id: int, node, label) -> int:
        nid = len(self.nodes)
        self.nodes.append(node)
        self.parent.append(parent_id)
        self.depth_of.append(self.depth_of[parent_id] + 1)
        self.children.append([])
        self.labels.append(label)
        self.children[parent_id].append(nid)
        return nid

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    def ancestor_with(self, nid: int, node) -> int | None:
        cur: int | None = nid
        while cur is not None:
            if self.nodes[cur] == node:
                return cur
            cur = self.parent[cur]
        return None


def closure_run(
    root,
    successors_fn,
    is_final,
    budget: int,
    *,
    node_cap: int = DEFAULT_NODE_CAP,
    sort_key=None,
) -> tuple[RunTree, str]:
    """Expand breadth-first with per-branch loop closure and a verdict.

    ``successors_fn(node) -> [(node, label)]``. Expansion stops at the first
    level containing an accepting node, when every branch is closed, or at
    ``budget`` steps, whichever comes first.
    """
    tree = RunTree(budget)
    tree.add_root(root)
    if is_final(root):
        return tree, ACCEPT
    frontier = [0]
    for _ in range(budget):
        next_frontier = []
        accepted = False
        for nid in frontier:
            succs = list(successors_fn(tree.nodes[nid]))
            if sort_key is not None:
                succs.sort(key=lambda pair: sort_key(pair[0]))
            if not succs:
                tree.closed[nid] = "stuck"
                continue
            fresh = 0
            seen_here = set()
            for child, label in succs:
                if child in seen_here:
                    continue
                seen_here.add(child)
                back = tree.ancestor_with(nid, child)
                if back is not None:
                    tree.loops.append((nid, back, label))
                    continue
                if tree.node_count >= node_cap:
                    raise BudgetExceeded(f"node cap {node_cap} hit in run tree", partial=tree)
                cid = tree.add_child(nid, child, label)
                fresh += 1
                next_frontier.append(cid)
                if is_final(child):
                    accepted = True
            if fresh == 0:
                tree.closed[nid] = "loop"
        frontier = next_frontier
        if accepted:
            return tree, ACCEPT
        if not frontier:
            return tree, REJECT_EXHAUSTED
    return tree, NO_ACCEPT_WITHIN_BUDGET


def plain_run(
    root,
    successors_fn,
    depth: int,
    *,
    node_cap: int = DEFAULT_NODE_CAP,
    sort_key=None,
) -> RunTree:
    """Expand to exactly ``depth`` steps with sibling dedup, no loop closure."""
    tree = RunTree(depth)
    tree.add_root(root)
    frontier = [0]
    for _ in range(depth):
        next_frontier = []
        for nid in frontier:
            succs = list(successors_fn(tree.nodes[nid]))
            if sort_key is not None:
                succs.sort(key=lambda pair: sort_key(pair[0]))
            seen_here = set()
            for child, label in succs:
                if child in seen_here:
                    continue
                seen_here.add(child)
                if tree.node_count >= node_cap:
                    raise BudgetExceeded(f"node cap {node_cap} hit in run tree", partial=tree)
                next_frontier.append(tree.add_child(nid, child, label))
        frontier = next_frontier
    return tree


def _config_sort_key(config) -> tuple:
    if isinstance(config, LbaConfig):
        return (config.state, config.head, config.tape)
    return (config.state, config.cells)


def run_machine(
    spec: MachineSpec,
    input_str: str,
    budget: int,
    *,
    tape_len: int | None = None,
    node_cap: int = DEFAULT_NODE_CAP,
) -> tuple[RunTree, str]:
    """Run tree plus acceptance verdict for an input string.

    ACCEPT: some reachable configuration is in a final state within budget.
    REJECT_EXHAUSTED: the whole tree closed (stuck or looping) without one.
    NO_ACCEPT_WITHIN_BUDGET: open branches remained when the budget ran out.
    """
    require_valid(spec)
    root = initial_machine_config(spec, input_str, tape_len)
    return closure_run(
        root,
        lambda cfg: [(c, (t, d)) for c, t, d in machine_step(spec, cfg)],
        lambda cfg: cfg.state in spec.finals,
        budget,
        node_cap=node_cap,
        sort_key=_config_sort_key,
    )


def machine_tree(
    spec: MachineSpec,
    input_str: str,
    depth: int,
    *,
    tape_len: int | None = None,
    node_cap: int = DEFAULT_NODE_CAP,
) -> RunTree:
    """Depth-exact run tree (final states keep self-looping); for comparison."""
    require_valid(spec)
    root = initial_machine_config(spec, input_str, tape_len)
    return plain_run(
        root,
        lambda cfg: [(c, (t, d)) for c, t, d in machine_step(spec, cfg)],
        depth,
        node_cap=node_cap,
        sort_key=_config_sort_key,
    )
