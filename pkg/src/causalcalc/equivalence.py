"""Bounded-depth equivalence between a machine and its compiled calculator.

The deterministic kind walks the single run and compares the translated
machine configuration against the calculator configuration step by step. The
branching kinds walk both trees in lockstep, matching children by (move label,
decoded machine configuration); since both sides are deduplicated the match
must be a bijection at every node. A fraction of visited calculator nodes is
re-expanded through the independent reference interpreter as a cross-check on
the successor computation itself.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .core import DEFAULT_NODE_CAP, Configuration, successors
from .compilers import (
    CalculatorModel,
    calc_accepts,
    decode_config,
    edge_label,
    encode_tm_config,
    initial_calc_config,
)
from .errors import KindMismatch, UndecodableConfig
from .machines import MachineSpec, initial_machine_config, machine_step, require_valid, run_machine
from . import reference

MACHINE_KIND_OF = {"lba": "lba", "ntm": "ntm", "tm": "tm", "lba_mono": "lba"}


@dataclass
class Counterexample:
    kind: str
    path: tuple[int, ...]
    detail: str
    machine_config: object = None
    calc_config: object = None

    def path_text(self) -> str:
        return ".".join(str(d) for d in self.path) if self.path else "<root>"


@dataclass
class EquivReport:
    equivalent: bool
    kind: str
    input: str
    depth: int
    machine_nodes: list[int] = field(default_factory=list)  # per level
    calc_nodes: list[int] = field(default_factory=list)
    rechecked: int = 0
    counterexample: Counterexample | None = None


def _compat(spec: MachineSpec, calc: CalculatorModel):
    require_valid(spec)
    if MACHINE_KIND_OF.get(calc.kind) != spec.kind:
        raise KindMismatch(f"{calc.kind} calculator cannot simulate a {spec.kind} machine")
    if calc.machine_hash != spec.fingerprint():
        raise KindMismatch("calculator was compiled from a different machine")


def _recheck(calc: CalculatorModel, visited: list[Configuration], fraction: float, seed: int):
    """Compare main-route and reference-route successors on a random sample."""
    if not visited:
        return 0, None
    rng = random.Random(seed)
    k = max(1, int(len(visited) * fraction))
    sample = rng.sample(visited, min(k, len(visited)))
    for cfg in sample:
        if frozenset(successors(calc.model, cfg)) != reference.successor_set(calc, cfg):
            return len(sample), Counterexample(
                "reference_disagreement",
                (),
                "two successor routes differ on a visited configuration",
                calc_config=cfg,
            )
    return len(sample), None


def check_equivalence(
    spec: MachineSpec,
    calc: CalculatorModel,
    input_str: str,
    depth: int,
    *,
    recheck_fraction: float = 0.1,
    seed: int = 0,
    node_cap: int = DEFAULT_NODE_CAP,
) -> EquivReport:
    _compat(spec, calc)
    if calc.kind == "tm":
        return _check_deterministic(spec, calc, input_str, depth, recheck_fraction, seed)
    return _check_branching(
        spec, calc, input_str, depth, recheck_fraction, seed, node_cap
    )


def _check_deterministic(spec, calc, input_str, depth, recheck_fraction, seed) -> EquivReport:
    report = EquivReport(True, calc.kind, input_str, depth)
    m = initial_machine_config(spec, input_str)
    c = initial_calc_config(calc, input_str)
    visited = []
    path: list[int] = []
    for step in range(depth + 1):
        report.machine_nodes.append(1)
        report.calc_nodes.append(1)
        visited.append(c)
        if encode_tm_config(calc, m) != c:
            report.equivalent = False
            report.counterexample = Counterexample(
                "translation_mismatch",
                tuple(path),
                f"translated machine configuration differs at step {step}",
                machine_config=m,
                calc_config=c,
            )
            return report
        if step == depth:
            break
        (m, _, move), = machine_step(spec, m)
        succ = successors(calc.model, c)
        if len(succ) != 1:
            report.equivalent = False
            report.counterexample = Counterexample(
                "branching_mismatch",
                tuple(path),
                f"calculator offers {len(succ)} successors on a deterministic run",
                machine_config=m,
                calc_config=c,
            )
            return report
        c = succ[0]
        path.append(move)
    report.rechecked, bad = _recheck(calc, visited, recheck_fraction, seed)
    if bad is not None:
        report.equivalent = False
        report.counterexample = bad
    return report


def _check_branching(spec, calc, input_str, depth, recheck_fraction, seed, node_cap) -> EquivReport:
    report = EquivReport(True, calc.kind, input_str, depth)
    tape_len = calc.tape_len if spec.kind == "lba" else None
    mroot = initial_machine_config(spec, input_str, tape_len)
    croot = initial_calc_config(calc, input_str)
    visited = [croot]

    def fail(kind, path, detail, m=None, c=None):
        report.equivalent = False
        report.counterexample = Counterexample(kind, tuple(path), detail, m, c)
        return report

    if decode_config(calc, croot, ()) != mroot:
        return fail("translation_mismatch", (), "root decodes wrong", mroot, croot)

    pairs = [(mroot, croot, ())]
    report.machine_nodes.append(1)
    report.calc_nodes.append(1)
    for _ in range(depth):
        nxt = []
        for m, c, labels in pairs:
            mkeys = {(d, child) for child, _, d in machine_step(spec, m)}
            ckeys = {}
            for child in successors(calc.model, c):
                d = edge_label(calc, c, child)
                try:
                    decoded = decode_config(calc, child, labels + (d,))
                except UndecodableConfig as exc:
                    return fail("undecodable", labels + (d,), str(exc), m, child)
                ckeys[(d, decoded)] = child
            if len(visited) + len(ckeys) > node_cap:
                return fail("node_cap", labels, f"walk exceeds {node_cap} nodes")
            if mkeys != set(ckeys):
                missing = sorted(str(k) for k in mkeys - set(ckeys))
                extra = sorted(str(k) for k in set(ckeys) - mkeys)
                return fail(
                    "successor_mismatch",
                    labels,
                    f"machine-only children {missing}; calculator-only {extra}",
                    m,
                    c,
                )
            for (d, mchild), cchild in sorted(
                ckeys.items(), key=lambda kv: (kv[0][0], str(kv[0][1]))
            ):
                visited.append(cchild)
                nxt.append((mchild, cchild, labels + (d,)))
        pairs = nxt
        report.machine_nodes.append(len(pairs))
        report.calc_nodes.append(len(pairs))
        if not pairs:
            break
    report.rechecked, bad = _recheck(calc, visited, recheck_fraction, seed)
    if bad is not None:
        report.equivalent = False
        report.counterexample = bad
    return report


@dataclass
class MatrixRow:
    input: str
    machine_verdict: str
    calc_verdict: str

    @property
    def agree(self) -> bool:
        return self.machine_verdict == self.calc_verdict


@dataclass
class MatrixReport:
    rows: list[MatrixRow]

    @property
    def all_agree(self) -> bool:
        return all(r.agree for r in self.rows)


def check_acceptance_matrix(
    spec: MachineSpec,
    calc: CalculatorModel,
    inputs,
    budget: int,
    *,
    node_cap: int = DEFAULT_NODE_CAP,
) -> MatrixReport:
    """Acceptance verdicts computed on both sides, input by input."""
    _compat(spec, calc)
    tape_len = calc.tape_len if spec.kind == "lba" else None
    rows = []
    for s in inputs:
        _, mv = run_machine(spec, s, budget, tape_len=tape_len, node_cap=node_cap)
        _, cv = calc_accepts(calc, s, budget, node_cap=node_cap)
        rows.append(MatrixRow(s, mv, cv))
    return MatrixReport(rows)
