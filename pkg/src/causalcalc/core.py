"""Temporal causal models with nondeterministic one-step equations.

A model assigns every variable a finite range and one equation over the
previous step's values of its domain variables. Equations return *sets* of
admissible next values; a computation tree branches over every combination of
choices. Variables come in two forms: plain named variables, and indexed
families (``X_3``, ``X_-1``) with a default value so configurations can keep
finite support over an unbounded index set.
"""

from __future__ import annotations

import itertools
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from .errors import (
    BudgetExceeded,
    MissingDomainValue,
    OutOfRangeValue,
    StepBeyondDepth,
    UnknownVariable,
    ValidationFailed,
)

Value = Union[str, int, tuple]

DEFAULT_NODE_CAP = 1_000_000


def render_value(value: Value) -> str:
    """Canonical single-token rendering, used for sorting and text output."""
    if isinstance(value, tuple):
        return "(" + ",".join(render_value(v) for v in value) + ")"
    return str(value)


def value_key(value: Value):
    return (render_value(value), value.__class__.__name__)


@dataclass(frozen=True)
class VarId:
    """A variable identity: plain name, or family name plus member index."""

    name: str
    index: int | None = None

    def render(self) -> str:
        if self.index is None:
            return self.name
        return f"{self.name}_{self.index}"

    @property
    def key(self):
        return (self.name, self.index if self.index is not None else 0)


class LazyRange:
    """A range too large to enumerate; supports membership and size only."""

    def __contains__(self, value: Value) -> bool:
        raise NotImplementedError

    def size(self) -> int:
        raise NotImplementedError

    def members(self) -> Iterable[Value]:
        from .errors import RangeTooLarge

        raise RangeTooLarge(f"range of size {self.size()} is not enumerable")


@dataclass(frozen=True)
class PlainVar:
    name: str
    values: frozenset | LazyRange


@dataclass(frozen=True)
class Family:
    """An indexed variable family; ``lo``/``hi`` of None mean unbounded.

    ``overrides`` gives individual members a different range; overridden
    members must always be assigned explicitly (the default does not apply
    to them).
    """

    name: str
    lo: int | None
    hi: int | None
    values: frozenset
    default: Value
    overrides: Mapping[int, frozenset] = field(default_factory=dict)

    def covers(self, index: int) -> bool:
        if self.lo is not None and index < self.lo:
            return False
        if self.hi is not None and index > self.hi:
            return False
        return True

    def member_range(self, index: int) -> frozenset:
        return self.overrides.get(index, self.values)

    @property
    def bounded(self) -> bool:
        return self.lo is not None and self.hi is not None


class Signature:
    """Variable declarations plus explicit domains for plain variables."""

    def __init__(
        self,
        plain: Iterable[PlainVar] = (),
        families: Iterable[Family] = (),
        domains: Mapping[str, Sequence[VarId]] | None = None,
    ):
        self.plain = tuple(plain)
        self.families = tuple(families)
        self.domains = {k: tuple(v) for k, v in (domains or {}).items()}
        self._plain_by_name = {p.name: p for p in self.plain}
        self._family_by_name = {f.name: f for f in self.families}
        dupes = set(self._plain_by_name) & set(self._family_by_name)
        if dupes or len(self._plain_by_name) != len(self.plain) or len(
            self._family_by_name
        ) != len(self.families):
            raise ValueError(f"duplicate variable names in signature: {sorted(dupes)}")

    def __eq__(self, other):
        return (
            isinstance(other, Signature)
            and self.plain == other.plain
            and self.families == other.families
            and self.domains == other.domains
        )

    def __repr__(self):
        return f"Signature(plain={len(self.plain)}, families={len(self.families)})"

    def family(self, name: str) -> Family | None:
        return self._family_by_name.get(name)

    def is_declared(self, var: VarId) -> bool:
        if var.index is None:
            return var.name in self._plain_by_name
        fam = self._family_by_name.get(var.name)
        return fam is not None and fam.covers(var.index)

    def range_of(self, var: VarId) -> frozenset | LazyRange:
        if var.index is None:
            p = self._plain_by_name.get(var.name)
            if p is None:
                raise UnknownVariable(var.render())
            return p.values
        fam = self._family_by_name.get(var.name)
        if fam is None or not fam.covers(var.index):
            raise UnknownVariable(var.render())
        return fam.member_range(var.index)

    def resolve(self, text: str) -> VarId:
        """Parse a rendered variable name back to a VarId."""
        if text in self._plain_by_name:
            return VarId(text)
        base, sep, suffix = text.rpartition("_")
        if sep and base in self._family_by_name:
            try:
                return VarId(base, int(suffix))
            except ValueError:
                pass
        raise UnknownVariable(text)


class Configuration:
    """A total assignment with finite support.

    Family members not listed carry their family default; plain variables and
    overridden members must always be assigned. Equality and hashing use the
    normalized support only, so two configurations that agree everywhere are
    equal regardless of how they were written down.
    """

    __slots__ = ("signature", "_map", "_key", "_hash")

    def __init__(self, signature: Signature, normalized: dict):
        self.signature = signature
        self._map = normalized
        self._key = tuple(
            (var.name, var.index if var.index is not None else 0, render_value(val))
            for var, val in sorted(normalized.items(), key=lambda kv: kv[0].key)
        )
        self._hash = hash(self._key)

    @classmethod
    def make(cls, signature: Signature, assignment: Mapping[VarId, Value]) -> "Configuration":
        normalized = {}
        for var, val in assignment.items():
            if not signature.is_declared(var):
                raise UnknownVariable(var.render())
            if val not in signature.range_of(var):
                raise OutOfRangeValue(f"{var.render()} = {render_value(val)}")
            fam = signature.family(var.name)
            if fam is not None and var.index not in fam.overrides and val == fam.default:
                continue
            normalized[var] = val
        for p in signature.plain:
            if VarId(p.name) not in normalized:
                raise MissingDomainValue(f"plain variable {p.name} unassigned")
        for fam in signature.families:
            for idx in fam.overrides:
                if VarId(fam.name, idx) not in normalized:
                    raise MissingDomainValue(f"{fam.name}_{idx} must be assigned")
        return cls(signature, normalized)

    def get(self, var: VarId) -> Value:
        try:
            return self._map[var]
        except KeyError:
            pass
        if not self.signature.is_declared(var):
            raise UnknownVariable(var.render())
        if var.index is not None:
            fam = self.signature.family(var.name)
            if var.index not in fam.overrides:
                return fam.default
        raise MissingDomainValue(var.render())

    @property
    def support(self) -> tuple[tuple[VarId, Value], ...]:
        return tuple(sorted(self._map.items(), key=lambda kv: kv[0].key))

    def family_support(self, name: str) -> list[int]:
        return sorted(v.index for v in self._map if v.name == name and v.index is not None)

    @property
    def sort_key(self):
        return self._key

    def __eq__(self, other):
        return isinstance(other, Configuration) and self._key == other._key

    def __hash__(self):
        return self._hash

    def __repr__(self):
        body = ",".join(f"{v.render()}={render_value(x)}" for v, x in self.support)
        return f"<cfg {body}>"


class TableEquation:
    """An explicit next-value table over the target's declared domain."""

    def __init__(self, rows: Mapping[tuple, Iterable[Value]]):
        self.rows = {tuple(k): frozenset(v) for k, v in rows.items()}

    def __eq__(self, other):
        return isinstance(other, TableEquation) and self.rows == other.rows

    @property
    def deterministic(self) -> bool:
        return all(len(out) == 1 for out in self.rows.values())


class RuleEquation:
    """A computed equation; used for compiled models and row surgery.

    Subclasses provide the domain per member index (None for plain targets)
    and the output set for a restriction of the previous configuration.
    """

    deterministic = False

    def domain_of(self, index: int | None) -> tuple[VarId, ...]:
        raise NotImplementedError

    def outputs(self, index: int | None, view: Mapping[VarId, Value]) -> frozenset:
        raise NotImplementedError


class OverrideEquation(RuleEquation):
    """Wraps an equation, forcing chosen (index, domain row) pairs.

    ``overrides`` maps (index, row) to a replacement output set, where the row
    is the tuple of domain values in domain order. Used to model single-row
    corruption without touching the underlying rule.
    """

    def __init__(self, model: "Model", name: str, overrides: Mapping[tuple, Iterable[Value]]):
        self._model = model
        self._name = name
        self.base = model.equations[name]
        self.overrides = {k: frozenset(v) for k, v in overrides.items()}

    @property
    def deterministic(self) -> bool:
        return self.base.deterministic and all(
            len(v) == 1 for v in self.overrides.values()
        )

    def domain_of(self, index):
        if isinstance(self.base, RuleEquation):
            return self.base.domain_of(index)
        return self._model.signature.domains[self._name]

    def outputs(self, index, view):
        domain = self.domain_of(index)
        row = tuple(view[d] for d in domain)
        hit = self.overrides.get((index, row))
        if hit is not None:
            return hit
        if isinstance(self.base, RuleEquation):
            return self.base.outputs(index, view)
        return self.base.rows[row]


@dataclass
class Model:
    signature: Signature
    equations: Mapping[str, Union[TableEquation, RuleEquation]]

    def domain_of(self, var: VarId) -> tuple[VarId, ...]:
        if not self.signature.is_declared(var):
            raise UnknownVariable(var.render())
        eq = self.equations.get(var.name)
        if isinstance(eq, RuleEquation):
            return eq.domain_of(var.index)
        if var.index is not None:
            raise ValidationFailed(
                f"family {var.name} has a table equation; families need rule equations"
            )
        return self.signature.domains[var.name]

    def configuration(self, assignment: Mapping[VarId, Value]) -> Configuration:
        return Configuration.make(self.signature, assignment)

    @property
    def deterministic(self) -> bool:
        return all(eq.deterministic for eq in self.equations.values())


@dataclass(frozen=True)
class Defect:
    code: str
    subject: str
    detail: str


def _context_rows(signature: Signature, domain, probe_vars):
    """Enumerate assignments for domain variables outside the probe set."""
    fixed = [d for d in domain if d not in probe_vars]
    pools = []
    for d in fixed:
        rng = signature.range_of(d)
        if isinstance(rng, LazyRange):
            return None
        pools.append(sorted(rng, key=value_key))
    for combo in itertools.product(*pools):
        yield dict(zip(fixed, combo))


def validate_model(model: Model) -> list[Defect]:
    """Structural checks; an empty list means the model is well-formed."""
    defects = []
    sig = model.signature

    for p in sig.plain:
        n = p.values.size() if isinstance(p.values, LazyRange) else len(p.values)
        if n == 0:
            defects.append(Defect("EmptyRange", p.name, "range has no values"))
        if isinstance(p.values, frozenset):
            renders = {render_value(v) for v in p.values}
            if len(renders) != len(p.values):
                defects.append(Defect("AmbiguousRendering", p.name, "two values render alike"))
    for fam in sig.families:
        if not fam.values:
            defects.append(Defect("EmptyRange", fam.name, "family range has no values"))
        if fam.default not in fam.values:
            defects.append(Defect("BadDefault", fam.name, "default not in family range"))
        if (fam.lo is None) != (fam.hi is None):
            defects.append(Defect("HalfBounded", fam.name, "one-sided index range"))
        for idx, rng in fam.overrides.items():
            if not fam.covers(idx):
                defects.append(Defect("OverrideOutOfBounds", f"{fam.name}_{idx}", "index outside family"))
            if not rng:
                defects.append(Defect("EmptyRange", f"{fam.name}_{idx}", "override range empty"))

    names = {p.name for p in sig.plain} | {f.name for f in sig.families}
    for name in names:
        if name not in model.equations:
            defects.append(Defect("MissingEquation", name, "no equation assigned"))
    for name in model.equations:
        if name not in names:
            defects.append(Defect("UnknownEquationTarget", name, "equation for undeclared variable"))

    for name, eq in model.equations.items():
        if name not in names:
            continue
        fam = sig.family(name)
        if isinstance(eq, TableEquation):
            if fam is not None:
                defects.append(Defect("TableOnFamily", name, "families need rule equations"))
                continue
            domain = sig.domains.get(name)
            if domain is None:
                defects.append(Defect("MissingDomain", name, "no domain declared"))
                continue
            bad_domain = False
            for d in domain:
                if not sig.is_declared(d):
                    defects.append(Defect("UnknownDomainVariable", name, d.render()))
                    bad_domain = True
                elif isinstance(sig.range_of(d), LazyRange):
                    defects.append(Defect("TableOverLazyRange", name, d.render()))
                    bad_domain = True
            if bad_domain:
                continue
            target_range = sig.range_of(VarId(name))
            pools = [sorted(sig.range_of(d), key=value_key) for d in domain]
            expected = {tuple(row) for row in itertools.product(*pools)}
            got = set(eq.rows)
            for row in expected - got:
                defects.append(Defect("MissingRow", name, render_value(tuple(row))))
            for row in got - expected:
                defects.append(Defect("UnknownRow", name, render_value(tuple(row))))
            for row, out in eq.rows.items():
                if not out:
                    defects.append(Defect("EmptyOutput", name, render_value(tuple(row))))
                elif isinstance(target_range, frozenset) and not out <= target_range:
                    defects.append(Defect("OutputOutOfRange", name, render_value(tuple(row))))
        else:
            probe_indices = [0] if fam is None else _family_probe_indices(fam)
            for idx in probe_indices:
                target = VarId(name, idx) if fam is not None else VarId(name)
                try:
                    domain = eq.domain_of(target.index)
                except Exception as exc:  # defect, not crash: rule must answer
                    defects.append(Defect("DomainRuleError", target.render(), str(exc)))
                    continue
                for d in domain:
                    if not sig.is_declared(d):
                        defects.append(Defect("UnknownDomainVariable", target.render(), d.render()))
            if fam is not None and not fam.bounded:
                defects.extend(_check_default_context(model, fam, eq))

    return defects


def _family_probe_indices(fam: Family) -> list[int]:
    if fam.bounded:
        picks = {fam.lo, fam.hi, 0, fam.lo + 1, fam.hi - 1}
        return sorted(i for i in picks if fam.covers(i))
    far = max([abs(i) for i in fam.overrides] + [1]) + 7
    return sorted(set(fam.overrides) | {-far, 0, far})


def _check_default_context(model: Model, fam: Family, eq: RuleEquation) -> list[Defect]:
    """Far from all activity, an unbounded family member must stay default."""
    defects = []
    far = max([abs(i) for i in fam.overrides] + [1]) + 9
    for idx in (far, -far):
        target = VarId(fam.name, idx)
        domain = eq.domain_of(idx)
        probe = {d for d in domain if d.name == fam.name and d.index not in fam.overrides}
        rows = _context_rows(model.signature, domain, probe)
        if rows is None:
            defects.append(Defect("DefaultCheckSkipped", target.render(), "lazy range in domain"))
            continue
        for ctx in rows:
            view = {d: ctx.get(d, fam.default) for d in domain}
            out = eq.outputs(idx, view)
            if out and out != frozenset([fam.default]):
                defects.append(
                    Defect("DefaultLeak", target.render(), f"context {ctx} gives {sorted(map(render_value, out))}")
                )
                break
    return defects


def eval_equation(model: Model, target: VarId, assignment) -> frozenset:
    """Output set of the target's equation under the previous-step values.

    ``assignment`` is a Configuration or a mapping covering the target's
    domain. Returns a frozenset; an empty set means the configuration is dead
    at this variable (only rule equations may produce that).
    """
    eq = model.equations.get(target.name)
    if eq is None or not model.signature.is_declared(target):
        raise UnknownVariable(target.render())
    domain = model.domain_of(target)
    if isinstance(assignment, Configuration):
        view = {d: assignment.get(d) for d in domain}
    else:
        view = {}
        for d in domain:
            if d not in assignment:
                raise MissingDomainValue(f"{target.render()} needs {d.render()}")
            view[d] = assignment[d]
    if isinstance(eq, TableEquation):
        row = tuple(view[d] for d in domain)
        try:
            return eq.rows[row]
        except KeyError:
            raise OutOfRangeValue(
                f"no table row for {target.render()} under {render_value(row)}"
            ) from None
    return eq.outputs(target.index, view)


def active_variables(model: Model, config: Configuration) -> list[VarId]:
    """Variables whose next value may differ from the default.

    Plain variables and bounded family members always count. Unbounded
    families contribute the support window widened by one index on each side
    and anchored at index 0, where the compiled step rules write.
    """
    out = [VarId(p.name) for p in model.signature.plain]
    for fam in model.signature.families:
        if fam.bounded:
            out.extend(VarId(fam.name, i) for i in range(fam.lo, fam.hi + 1))
        else:
            anchors = set(fam.overrides) | {0}
            idxs = set(config.family_support(fam.name)) | anchors
            lo, hi = min(idxs) - 1, max(idxs) + 1
            out.extend(VarId(fam.name, i) for i in range(lo, hi + 1))
    out.sort(key=lambda v: v.key)
    return out


def successor_choices(model: Model, config: Configuration):
    """Per-variable choice sets for the next step, or None for a dead config."""
    choices = []
    for var in active_variables(model, config):
        vals = eval_equation(model, var, config)
        if not vals:
            return None
        choices.append((var, tuple(sorted(vals, key=value_key))))
    return choices


def successors(model: Model, config: Configuration) -> tuple[Configuration, ...]:
    """All one-step successors, deduplicated and canonically ordered."""
    choices = successor_choices(model, config)
    if choices is None:
        return ()
    return expand_choices(model.signature, choices)


def expand_choices(signature: Signature, choices) -> tuple[Configuration, ...]:
    variables = [var for var, _ in choices]
    seen = {}
    for combo in itertools.product(*(vals for _, vals in choices)):
        child = Configuration.make(signature, dict(zip(variables, combo)))
        seen.setdefault(child.sort_key, child)
    return tuple(seen[k] for k in sorted(seen))


class ComputationTree:
    """A depth-bounded computation tree with canonical node order.

    Nodes get BFS ids; the children of each node are sorted by configuration
    key, so equal expansions produce identical trees. Branches can end early
    when a configuration has no successors.
    """

    def __init__(self, depth: int):
        self.depth = depth
        self.nodes: list[Configuration] = []
        self.parent: list[int | None] = []
        self.depth_of: list[int] = []
        self.children: list[list[int]] = []
        self.labels: list[object] = []  # label of the edge into each node

    def add_root(self, config: Configuration) -> int:
        assert not self.nodes
        self.nodes.append(config)
        self.parent.append(None)
        self.depth_of.append(0)
        self.children.append([])
        self.labels.append(None)
        return 0

    def add_child(self, parent_id: int, config: Configuration, label=None) -> int:
        cid = len(self.nodes)
        self.nodes.append(config)
        self.parent.append(parent_id)
        self.depth_of.append(self.depth_of[parent_id] + 1)
        self.children.append([])
        self.labels.append(label)
        self.children[parent_id].append(cid)
        return cid

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    def nodes_at(self, step: int) -> list[int]:
        return [i for i, d in enumerate(self.depth_of) if d == step]

    def branches(self) -> Iterator[list[int]]:
        """Root-to-leaf node id paths, in canonical order."""
        stack = [[0]]
        while stack:
            path = stack.pop()
            kids = self.children[path[-1]]
            if not kids:
                yield path
            else:
                for c in reversed(kids):
                    stack.append(path + [c])

    def label_path(self, node_id: int) -> tuple:
        out = []
        while self.parent[node_id] is not None:
            out.append(self.labels[node_id])
            node_id = self.parent[node_id]
        return tuple(reversed(out))

    def __eq__(self, other):
        return (
            isinstance(other, ComputationTree)
            and self.depth == other.depth
            and self.nodes == other.nodes
            and self.parent == other.parent
            and self.labels == other.labels
        )

    def __repr__(self):
        return f"<tree depth={self.depth} nodes={self.node_count}>"


Labeler = Callable[[Configuration, Configuration], object]
ChoicesFn = Callable[[int, Configuration], Optional[list]]


def expand_tree(
    model: Model,
    root: Configuration,
    depth: int,
    *,
    node_cap: int = DEFAULT_NODE_CAP,
    labeler: Labeler | None = None,
    choices_fn: ChoicesFn | None = None,
) -> ComputationTree:
    """Breadth-first expansion to exactly ``depth`` steps.

    ``choices_fn(step, parent)`` can replace the per-variable choice sets for
    the children born at ``step``; interventions are implemented that way.
    Raises BudgetExceeded (carrying the partial tree) past ``node_cap`` nodes.
    """
    tree = ComputationTree(depth)
    tree.add_root(root)
    frontier = [0]
    for step in range(1, depth + 1):
        next_frontier = []
        for nid in frontier:
            parent_cfg = tree.nodes[nid]
            if choices_fn is not None:
                choices = choices_fn(step, parent_cfg)
            else:
                choices = successor_choices(model, parent_cfg)
            if choices is None:
                continue
            for child in expand_choices(model.signature, choices):
                if tree.node_count >= node_cap:
                    raise BudgetExceeded(
                        f"node budget {node_cap} exhausted at step {step}", partial=tree
                    )
                label = labeler(parent_cfg, child) if labeler else None
                next_frontier.append(tree.add_child(nid, child, label))
        frontier = next_frontier
    return tree


TimedAssignment = tuple[VarId, int, Value]


@dataclass
class HoldsReport:
    holds: bool
    mode: str
    witnesses: list[tuple[int, ...]]  # node id paths


def holds_at(
    tree: ComputationTree,
    timed: Sequence[TimedAssignment],
    mode: str = "some",
) -> HoldsReport:
    """Check timed assignments over complete branches of the tree.

    ``some`` asks for at least one branch satisfying every (var, step, value)
    triple; ``all`` asks for every branch. A branch that dies before a
    referenced step does not satisfy. Witnesses are the satisfying branches
    for ``some`` and the violating ones for ``all``.
    """
    if mode not in ("some", "all"):
        raise ValueError(f"mode must be 'some' or 'all', got {mode!r}")
    for var, step, _ in timed:
        if step > tree.depth:
            raise StepBeyondDepth(f"{var.render()}@{step} exceeds depth {tree.depth}")
    hits, misses = [], []
    for path in tree.branches():
        ok = all(
            step < len(path) and tree.nodes[path[step]].get(var) == value
            for var, step, value in timed
        )
        (hits if ok else misses).append(tuple(path))
    if mode == "some":
        return HoldsReport(bool(hits), mode, hits)
    return HoldsReport(not misses, mode, misses)
