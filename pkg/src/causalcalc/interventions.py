"""Interventions, equation rewrites, and but-for cause queries.

A value intervention pins variables to values at given steps on every branch;
the root is overridden directly for step-0 atoms. A structure intervention
rewrites single equation rows from a given step onward: a row rewritten at
step n governs every later step until a newer rewrite targets the same row.
"""

from __future__ import annotations

import itertools
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

from .core import (
    DEFAULT_NODE_CAP,
    ComputationTree,
    Configuration,
    Labeler,
    Model,
    TimedAssignment,
    Value,
    VarId,
    active_variables,
    eval_equation,
    expand_tree,
    holds_at,
    render_value,
    successor_choices,
    value_key,
)
from .errors import (
    BudgetExceeded,
    DuplicateAtom,
    OutOfRangeValue,
    RowDomainMismatch,
    StepBeyondDepth,
    UnknownVariable,
)


@dataclass(frozen=True)
class Atom:
    """Pin ``var`` to ``value`` at ``step``."""

    var: VarId
    step: int
    value: Value

    def render(self) -> str:
        return f"{self.var.render()}@{self.step}={render_value(self.value)}"


@dataclass(frozen=True)
class RewriteAtom:
    """From ``step`` on, the equation row ``row`` of ``var`` outputs ``value``.

    ``row`` assigns every domain variable of ``var``, stored sorted by
    variable key.
    """

    var: VarId
    step: int
    row: tuple[tuple[VarId, Value], ...]
    value: Value

    def render(self) -> str:
        inner = ",".join(f"{v.render()}={render_value(x)}" for v, x in self.row)
        return f"{self.var.render()}@{self.step}({inner})={render_value(self.value)}"


class InterventionSpec:
    def __init__(self, atoms: Iterable[Atom]):
        self.atoms = tuple(atoms)
        seen = set()
        for a in self.atoms:
            if a.step < 0:
                raise StepBeyondDepth(f"negative step in {a.render()}")
            key = (a.var, a.step)
            if key in seen:
                raise DuplicateAtom(a.render())
            seen.add(key)

    def by_step(self) -> dict[int, dict[VarId, Value]]:
        out: dict[int, dict[VarId, Value]] = {}
        for a in self.atoms:
            out.setdefault(a.step, {})[a.var] = a.value
        return out

    @property
    def max_step(self) -> int:
        return max((a.step for a in self.atoms), default=0)

    def render(self) -> str:
        return ",".join(a.render() for a in self.atoms)


class StructureInterventionSpec:
    def __init__(self, atoms: Iterable[RewriteAtom]):
        self.atoms = tuple(atoms)
        seen = set()
        for a in self.atoms:
            if a.step < 0:
                raise StepBeyondDepth(f"negative step in {a.render()}")
            key = (a.var, a.step, a.row)
            if key in seen:
                raise DuplicateAtom(a.render())
            seen.add(key)

    @property
    def max_step(self) -> int:
        return max((a.step for a in self.atoms), default=0)


def _check_atom(model: Model, atom: Atom):
    if not model.signature.is_declared(atom.var):
        raise UnknownVariable(atom.var.render())
    if atom.value not in model.signature.range_of(atom.var):
        raise OutOfRangeValue(atom.render())


def _check_rewrite(model: Model, atom: RewriteAtom):
    if not model.signature.is_declared(atom.var):
        raise UnknownVariable(atom.var.render())
    if atom.value not in model.signature.range_of(atom.var):
        raise OutOfRangeValue(atom.render())
    domain = model.domain_of(atom.var)
    row_vars = [v for v, _ in atom.row]
    if sorted(row_vars, key=lambda v: v.key) != sorted(set(domain), key=lambda v: v.key):
        raise RowDomainMismatch(
            f"row of {atom.render()} must assign exactly {[d.render() for d in domain]}"
        )
    for v, x in atom.row:
        if x not in model.signature.range_of(v):
            raise OutOfRangeValue(f"{v.render()}={render_value(x)} in {atom.render()}")


def _override_root(model: Model, root: Configuration, pins: Mapping[VarId, Value]) -> Configuration:
    assignment = dict(root.support)
    assignment.update(pins)
    return model.configuration(assignment)


def apply_intervention(
    model: Model,
    root: Configuration,
    spec: InterventionSpec,
    depth: int,
    *,
    node_cap: int = DEFAULT_NODE_CAP,
    labeler: Labeler | None = None,
) -> ComputationTree:
    """Expand the intervened computation tree to ``depth`` steps."""
    for atom in spec.atoms:
        _check_atom(model, atom)
        if atom.step > depth:
            raise StepBeyondDepth(f"{atom.render()} exceeds depth {depth}")
    by_step = spec.by_step()
    root = _override_root(model, root, by_step.get(0, {}))

    def choices_fn(step: int, parent: Configuration):
        base = successor_choices(model, parent)
        pins = by_step.get(step)
        if base is None or not pins:
            return base
        pinned = set(pins)
        out = [(var, (pins[var],)) if var in pinned else (var, vals) for var, vals in base]
        covered = {var for var, _ in base}
        for var in sorted(pinned - covered, key=lambda v: v.key):
            out.append((var, (pins[var],)))
        return out

    return expand_tree(
        model, root, depth, node_cap=node_cap, labeler=labeler, choices_fn=choices_fn
    )


def apply_structure_intervention(
    model: Model,
    root: Configuration,
    spec: StructureInterventionSpec,
    depth: int,
    *,
    node_cap: int = DEFAULT_NODE_CAP,
    labeler: Labeler | None = None,
) -> ComputationTree:
    """Expand the tree under rewritten equations.

    Children born at tree step i use the equation stack accumulated through
    step i-1, so a rewrite at step n first shows in values at step n+1.
    """
    for atom in spec.atoms:
        _check_rewrite(model, atom)
    by_var: dict[VarId, list[RewriteAtom]] = {}
    for atom in spec.atoms:
        by_var.setdefault(atom.var, []).append(atom)

    def rewrite_for(var: VarId, parent: Configuration, upto: int) -> RewriteAtom | None:
        best = None
        for atom in by_var.get(var, ()):
            if atom.step > upto:
                continue
            if all(parent.get(v) == x for v, x in atom.row):
                if best is None or atom.step > best.step:
                    best = atom
        return best

    def choices_fn(step: int, parent: Configuration):
        upto = step - 1
        targets = active_variables(model, parent)
        seen = set(targets)
        extra = {a.var for a in spec.atoms if a.step <= upto and a.var not in seen}
        targets = targets + sorted(extra, key=lambda v: v.key)
        choices = []
        for var in targets:
            hit = rewrite_for(var, parent, upto)
            if hit is not None:
                vals: tuple = (hit.value,)
            else:
                out = eval_equation(model, var, parent)
                if not out:
                    return None
                vals = tuple(sorted(out, key=value_key))
            choices.append((var, vals))
        return choices

    return expand_tree(
        model, root, depth, node_cap=node_cap, labeler=labeler, choices_fn=choices_fn
    )


@dataclass
class CauseVerdict:
    is_cause: bool
    failing_condition: int | None = None
    # for a positive verdict: the canonically first preventing alternative and
    # one branch witnessing actuality; for condition 3: the smaller sufficient
    # subset with its own preventing alternative
    witness: dict = field(default_factory=dict)


def _alternatives(model: Model, atoms: Sequence[Atom]):
    """All value vectors over the atoms' coordinates, actual vector excluded."""
    actual = tuple(a.value for a in atoms)
    pools = [sorted(model.signature.range_of(a.var), key=value_key) for a in atoms]
    for combo in itertools.product(*pools):
        if combo != actual:
            yield combo


def _prevents(
    model: Model,
    root: Configuration,
    atoms: Sequence[Atom],
    outcome: Sequence[Atom],
    node_cap: int,
) -> dict | None:
    """First alternative vector whose intervention kills the outcome everywhere."""
    depth = max([a.step for a in atoms] + [a.step for a in outcome])
    timed = [(a.var, a.step, a.value) for a in outcome]
    for combo in _alternatives(model, atoms):
        spec = InterventionSpec(
            [Atom(a.var, a.step, v) for a, v in zip(atoms, combo)]
        )
        tree = apply_intervention(model, root, spec, depth, node_cap=node_cap)
        if not holds_at(tree, timed, "some").holds:
            return {a.render(): render_value(v) for a, v in zip(atoms, combo)}
    return None


def is_cause(
    model: Model,
    root: Configuration,
    candidate: Sequence[Atom],
    outcome: Sequence[Atom],
    *,
    same_branch: bool = True,
    node_cap: int = DEFAULT_NODE_CAP,
) -> CauseVerdict:
    """But-for cause check.

    (1) candidate and outcome are actual (by default on one common branch;
    ``same_branch=False`` lets each find its own branch); (2) some alternative
    assignment to all candidate coordinates makes the outcome fail on every
    branch; (3) no proper non-empty sub-assignment already manages (2).
    """
    candidate = list(candidate)
    outcome = list(outcome)
    if not candidate or not outcome:
        raise ValueError("candidate and outcome must be non-empty")
    InterventionSpec(candidate)  # step/duplicate checks
    for a in list(candidate) + list(outcome):
        _check_atom(model, a)

    horizon = max(a.step for a in candidate + outcome)
    base = expand_tree(model, root, horizon, node_cap=node_cap)
    cand_t = [(a.var, a.step, a.value) for a in candidate]
    out_t = [(a.var, a.step, a.value) for a in outcome]
    if same_branch:
        actual = holds_at(base, cand_t + out_t, "some")
    else:
        actual = holds_at(base, out_t, "some")
        if not holds_at(base, cand_t, "some").holds:
            return CauseVerdict(False, failing_condition=1)
    if not actual.holds:
        return CauseVerdict(False, failing_condition=1)

    preventing = _prevents(model, root, candidate, outcome, node_cap)
    if preventing is None:
        return CauseVerdict(False, failing_condition=2)

    n = len(candidate)
    for size in range(1, n):
        for subset in itertools.combinations(range(n), size):
            sub = [candidate[i] for i in subset]
            alt = _prevents(model, root, sub, outcome, node_cap)
            if alt is not None:
                return CauseVerdict(
                    False,
                    failing_condition=3,
                    witness={
                        "sufficient_subset": [a.render() for a in sub],
                        "preventing": alt,
                    },
                )
    return CauseVerdict(
        True,
        witness={
            "preventing": preventing,
            "actual_branch": list(actual.witnesses[0]),
        },
    )


@dataclass
class SweepRow:
    atoms: tuple[Atom, ...]
    outcome_holds: bool
    classification: str  # "critical" | "inert"


@dataclass
class SweepReport:
    baseline_holds: bool
    mode: str
    rows: list[SweepRow]
    truncated: bool = False

    def by_var(self) -> dict[str, str]:
        """Cell-level view: a variable is critical if any of its rows is."""
        out: dict[str, str] = {}
        for row in self.rows:
            for a in row.atoms:
                name = a.var.render()
                if row.classification == "critical":
                    out[name] = "critical"
                else:
                    out.setdefault(name, "inert")
        return out


def sweep(
    model: Model,
    root: Configuration,
    *,
    variables: Sequence[VarId],
    steps: Sequence[int],
    outcome: Sequence[TimedAssignment],
    mode: str = "some",
    k_faults: int = 1,
    node_cap: int = DEFAULT_NODE_CAP,
) -> SweepReport:
    """Fault-injection sweep: try every value at every (variable, step) cell.

    Each row pins ``k_faults`` cells to alternative values and reports whether
    the outcome predicate still holds; a row is critical when the verdict
    differs from the unintervened baseline. On budget exhaustion the report is
    returned truncated with the rows finished so far.
    """
    if k_faults not in (1, 2):
        raise ValueError("k_faults must be 1 or 2")
    if not variables:
        raise UnknownVariable("sweep variable set is empty")
    for var in variables:
        if not model.signature.is_declared(var):
            raise UnknownVariable(var.render())
    horizon = max(s for _, s, _ in outcome)
    base = expand_tree(model, root, horizon, node_cap=node_cap)
    baseline = holds_at(base, outcome, mode).holds

    cells = [
        (var, step)
        for var in sorted(variables, key=lambda v: v.key)
        for step in sorted(steps)
    ]
    singles = [
        Atom(var, step, value)
        for var, step in cells
        for value in sorted(model.signature.range_of(var), key=value_key)
    ]
    if k_faults == 1:
        combos = [(a,) for a in singles]
    else:
        combos = [
            (a, b)
            for a, b in itertools.combinations(singles, 2)
            if (a.var, a.step) != (b.var, b.step)
        ]

    rows: list[SweepRow] = []
    truncated = False
    for atoms in combos:
        depth = max(horizon, max(a.step for a in atoms))
        try:
            tree = apply_intervention(
                model, root, InterventionSpec(atoms), depth, node_cap=node_cap
            )
        except BudgetExceeded:
            truncated = True
            break
        verdict = holds_at(tree, outcome, mode).holds
        rows.append(
            SweepRow(
                atoms=tuple(atoms),
                outcome_holds=verdict,
                classification="critical" if verdict != baseline else "inert",
            )
        )
    return SweepReport(baseline, mode, rows, truncated)
