"""Compile machine specs into causal calculator models.

Four targets:

* ``lba``: one bounded cell family ``X`` over a window wide enough for every
  head-relative frame; ``X_0`` carries (state, written symbol, move) triples.
* ``tm``: a plain state variable ``S`` plus an unbounded symbol family ``X``
  in head-relative coordinates.
* ``ntm``: like ``lba`` but unbounded and without wall cells.
* ``lba_mono``: a single variable whose values are whole machine
  configurations packed into flat tuples.

The windowed encodings keep the frame centered on the *previous* head
position: the triple at ``X_0`` records the transition just taken, its move
component says where the head now is relative to the frame, and every step
shifts the frame by the parent's recorded move. Decoding therefore needs the
path's move labels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .core import (
    DEFAULT_NODE_CAP,
    Configuration,
    Family,
    LazyRange,
    Model,
    PlainVar,
    RuleEquation,
    Signature,
    VarId,
    successors,
)
from .errors import (
    InvalidMachineKind,
    MalformedConfig,
    RangeTooLarge,
    StuckConfiguration,
    UndecodableConfig,
)
from .machines import (
    LbaConfig,
    MachineSpec,
    RunTree,
    TapeConfig,
    closure_run,
    initial_machine_config,
    require_valid,
)

CELL = "X"
STATE = "S"
WHOLE = "V"


def delta_f_image(spec: MachineSpec, state: str, symbol: str) -> tuple:
    """Transition outputs with final states frozen into self-loops."""
    if state in spec.finals:
        return ((state, symbol, 0),)
    return tuple((t.dst, t.write, t.move) for t in spec.delta.get((state, symbol), ()))


def _head_triples(spec: MachineSpec) -> frozenset:
    return frozenset(
        (q, g, d) for q in spec.states for g in spec.tape_alphabet for d in (-1, 0, 1)
    )


@dataclass
class CalculatorModel:
    """A compiled model together with its provenance."""

    model: Model
    kind: str  # lba | tm | ntm | lba_mono
    machine: MachineSpec
    tape_len: int | None
    machine_hash: str

    def initial(self, input_str: str) -> Configuration:
        return initial_calc_config(self, input_str)

    def accepting(self, config: Configuration) -> bool:
        if self.kind == "tm":
            return config.get(VarId(STATE)) in self.machine.finals
        if self.kind == "lba_mono":
            return config.get(VarId(WHOLE))[0] in self.machine.finals
        return config.get(VarId(CELL, 0))[0] in self.machine.finals


class _MachineRule(RuleEquation):
    """Shared identity plumbing for compiled equations."""

    builtin = ""

    def __init__(self, spec: MachineSpec):
        self.spec = spec
        self._det = all(len(ts) == 1 for ts in spec.delta.values()) and all(
            (q, g) in spec.delta
            for q in spec.states
            if q not in spec.finals
            for g in spec.tape_alphabet
        )

    @property
    def deterministic(self) -> bool:
        return self._det

    def _identity(self) -> tuple:
        return (type(self), self.spec.fingerprint())

    def __eq__(self, other):
        return isinstance(other, _MachineRule) and self._identity() == other._identity()


class LbaWindowRule(_MachineRule):
    """Def-style window equations over the bounded cell family."""

    builtin = "lba_window_step"

    def __init__(self, spec: MachineSpec, tape_len: int):
        super().__init__(spec)
        self.n = tape_len

    def _identity(self):
        return (type(self), self.spec.fingerprint(), self.n)

    def domain_of(self, index: int | None) -> tuple[VarId, ...]:
        w = self.n + 1
        if index is None or not -w <= index <= w:
            raise ValueError(f"{CELL}_{index} outside the window")
        if index == 0:
            return (VarId(CELL, -1), VarId(CELL, 0), VarId(CELL, 1))
        if index == w:
            return (VarId(CELL, 0), VarId(CELL, w - 1), VarId(CELL, w))
        if index == -w:
            return (VarId(CELL, 0), VarId(CELL, -w), VarId(CELL, -w + 1))
        return (VarId(CELL, 0), VarId(CELL, index - 1), VarId(CELL, index), VarId(CELL, index + 1))

    def outputs(self, index, view) -> frozenset:
        state, written, move = view[VarId(CELL, 0)]
        if index == 0:
            neighbor = view[VarId(CELL, move)]
            scanned = written if move == 0 else neighbor
            return frozenset(delta_f_image(self.spec, state, scanned))
        w = self.n + 1
        j = index + move
        if not -w <= j <= w:
            # wall cells have no outer neighbor; their stale content is never
            # inside the decodable frame again, so they may keep it
            j = index
        if j == 0:
            return frozenset([written])
        return frozenset([view[VarId(CELL, j)]])


class NtmWindowRule(_MachineRule):
    """Unbounded variant of the window equations; no wall cells."""

    builtin = "ntm_window_step"

    def domain_of(self, index: int | None) -> tuple[VarId, ...]:
        if index is None:
            raise ValueError(f"{CELL} is a family; a member index is required")
        if index == 0:
            return (VarId(CELL, -1), VarId(CELL, 0), VarId(CELL, 1))
        out = [VarId(CELL, 0)]
        for j in (index - 1, index, index + 1):
            if j != 0:
                out.append(VarId(CELL, j))
        return tuple(out)

    def outputs(self, index, view) -> frozenset:
        state, written, move = view[VarId(CELL, 0)]
        if index == 0:
            neighbor = view[VarId(CELL, move)]
            scanned = written if move == 0 else neighbor
            return frozenset(delta_f_image(self.spec, state, scanned))
        j = index + move
        if j == 0:
            return frozenset([written])
        return frozenset([view[VarId(CELL, j)]])


class TmStateRule(_MachineRule):
    builtin = "tm_state_step"

    def domain_of(self, index):
        if index is not None:
            raise ValueError(f"{STATE} is plain")
        return (VarId(STATE), VarId(CELL, 0))

    def outputs(self, index, view) -> frozenset:
        state = view[VarId(STATE)]
        if state in self.spec.finals:
            return frozenset([state])
        scanned = view[VarId(CELL, 0)]
        entries = self.spec.delta.get((state, scanned), ())
        if not entries:
            raise StuckConfiguration(f"no move from ({state},{scanned})")
        return frozenset(t.dst for t in entries)


class TmCellRule(_MachineRule):
    """Head-relative cell shift; the machine frame re-centers every step."""

    builtin = "tm_cell_step"

    def domain_of(self, index: int | None) -> tuple[VarId, ...]:
        if index is None:
            raise ValueError(f"{CELL} is a family; a member index is required")
        out = [VarId(CELL, 0), VarId(STATE)]
        for j in (index - 1, index, index + 1):
            if j != 0:
                out.append(VarId(CELL, j))
        return tuple(out)

    def outputs(self, index, view) -> frozenset:
        state = view[VarId(STATE)]
        if state in self.spec.finals:
            return frozenset([view[VarId(CELL, index)]])
        scanned = view[VarId(CELL, 0)]
        entries = self.spec.delta.get((state, scanned), ())
        if not entries:
            raise StuckConfiguration(f"no move from ({state},{scanned})")
        t = entries[0]
        if index == -t.move:
            # the cell just written lands opposite the move after re-centering
            return frozenset([t.write])
        return frozenset([view[VarId(CELL, index + t.move)]])


class WholeConfigRange(LazyRange):
    """All (state, head, tape...) tuples for a fixed machine and tape length."""

    def __init__(self, spec: MachineSpec, tape_len: int):
        self.spec = spec
        self.n = tape_len

    def __eq__(self, other):
        return (
            isinstance(other, WholeConfigRange)
            and self.spec.fingerprint() == other.spec.fingerprint()
            and self.n == other.n
        )

    def __hash__(self):
        return hash((self.spec.fingerprint(), self.n))

    def __contains__(self, value) -> bool:
        spec, n = self.spec, self.n
        if not isinstance(value, tuple) or len(value) != n + 4:
            return False
        state, head, tape = value[0], value[1], value[2:]
        return (
            state in spec.states
            and isinstance(head, int)
            and not isinstance(head, bool)
            and 0 <= head <= n + 1
            and tape[0] == spec.left_marker
            and tape[-1] == spec.right_marker
            and all(g in spec.tape_alphabet for g in tape[1:-1])
        )

    def size(self) -> int:
        return len(self.spec.states) * (self.n + 2) * len(self.spec.tape_alphabet) ** self.n


class WholeConfigRule(_MachineRule):
    builtin = "lba_whole_config_step"

    def __init__(self, spec: MachineSpec, tape_len: int):
        super().__init__(spec)
        self.n = tape_len

    def _identity(self):
        return (type(self), self.spec.fingerprint(), self.n)

    def domain_of(self, index):
        if index is not None:
            raise ValueError(f"{WHOLE} is plain")
        return (VarId(WHOLE),)

    def outputs(self, index, view) -> frozenset:
        value = view[VarId(WHOLE)]
        state, head, tape = value[0], value[1], list(value[2:])
        out = []
        for q, g, d in delta_f_image(self.spec, state, tape[head]):
            nxt = list(tape)
            nxt[head] = g
            out.append((q, head + d, *nxt))
        return frozenset(out)


def compile_lba(spec: MachineSpec, tape_len: int) -> CalculatorModel:
    require_valid(spec)
    if spec.kind != "lba":
        raise InvalidMachineKind(f"expected an lba spec, got {spec.kind}")
    if tape_len < 1:
        raise ValueError("tape_len must be at least 1")
    w = tape_len + 1
    fam = Family(
        CELL,
        lo=-w,
        hi=w,
        values=frozenset(spec.tape_alphabet),
        default=spec.blank,
        overrides={0: _head_triples(spec)},
    )
    model = Model(Signature(families=[fam]), {CELL: LbaWindowRule(spec, tape_len)})
    return CalculatorModel(model, "lba", spec, tape_len, spec.fingerprint())


def compile_ntm(spec: MachineSpec) -> CalculatorModel:
    require_valid(spec)
    if spec.kind != "ntm":
        raise InvalidMachineKind(f"expected an ntm spec, got {spec.kind}")
    fam = Family(
        CELL,
        lo=None,
        hi=None,
        values=frozenset(spec.tape_alphabet),
        default=spec.blank,
        overrides={0: _head_triples(spec)},
    )
    model = Model(Signature(families=[fam]), {CELL: NtmWindowRule(spec)})
    return CalculatorModel(model, "ntm", spec, None, spec.fingerprint())


def compile_tm(spec: MachineSpec) -> CalculatorModel:
    require_valid(spec)
    if spec.kind != "tm":
        raise InvalidMachineKind(f"expected a tm spec, got {spec.kind}")
    state = PlainVar(STATE, frozenset(spec.states))
    fam = Family(
        CELL, lo=None, hi=None, values=frozenset(spec.tape_alphabet), default=spec.blank
    )
    sig = Signature(plain=[state], families=[fam])
    model = Model(sig, {STATE: TmStateRule(spec), CELL: TmCellRule(spec)})
    return CalculatorModel(model, "tm", spec, None, spec.fingerprint())


def compile_lba_monolithic(
    spec: MachineSpec, tape_len: int, *, max_range_size: int = 10**8
) -> CalculatorModel:
    require_valid(spec)
    if spec.kind != "lba":
        raise InvalidMachineKind(f"expected an lba spec, got {spec.kind}")
    if tape_len < 1:
        raise ValueError("tape_len must be at least 1")
    rng = WholeConfigRange(spec, tape_len)
    if rng.size() > max_range_size:
        raise RangeTooLarge(
            f"whole-config range has {rng.size()} values (cap {max_range_size})"
        )
    sig = Signature(plain=[PlainVar(WHOLE, rng)])
    model = Model(sig, {WHOLE: WholeConfigRule(spec, tape_len)})
    return CalculatorModel(model, "lba_mono", spec, tape_len, spec.fingerprint())


def compile_machine(spec: MachineSpec, *, tape_len: int | None = None, monolithic: bool = False) -> CalculatorModel:
    """Dispatch on the spec's kind; lba compiles need a tape length."""
    if spec.kind == "lba":
        if tape_len is None:
            raise ValueError("an lba compile needs tape_len")
        if monolithic:
            return compile_lba_monolithic(spec, tape_len)
        return compile_lba(spec, tape_len)
    if monolithic:
        raise InvalidMachineKind("only lba specs have a monolithic form")
    if spec.kind == "tm":
        return compile_tm(spec)
    if spec.kind == "ntm":
        return compile_ntm(spec)
    raise InvalidMachineKind(spec.kind)


def initial_calc_config(calc: CalculatorModel, input_str: str) -> Configuration:
    spec = calc.machine
    if calc.kind == "lba":
        m = initial_machine_config(spec, input_str, calc.tape_len)
        assign = {VarId(CELL, 0): (spec.initial, m.tape[0], 0)}
        for i, g in enumerate(m.tape):
            if i > 0:
                assign[VarId(CELL, i)] = g
        return calc.model.configuration(assign)
    if calc.kind == "lba_mono":
        m = initial_machine_config(spec, input_str, calc.tape_len)
        return calc.model.configuration({VarId(WHOLE): (m.state, m.head, *m.tape)})
    if calc.kind == "tm":
        m = initial_machine_config(spec, input_str)
        return encode_tm_config(calc, m)
    m = initial_machine_config(spec, input_str)
    assign = {VarId(CELL, 0): (spec.initial, m.cell(0, spec.blank), 0)}
    for i, g in m.cells:
        if i != 0:
            assign[VarId(CELL, i)] = g
    return calc.model.configuration(assign)


def encode_tm_config(calc: CalculatorModel, m: TapeConfig) -> Configuration:
    if calc.kind != "tm":
        raise MalformedConfig(f"tm encoding asked of a {calc.kind} calculator")
    assign = {VarId(STATE): m.state}
    for i, g in m.cells:
        assign[VarId(CELL, i)] = g
    return calc.model.configuration(assign)


def decode_config(calc: CalculatorModel, config: Configuration, labels: tuple = ()):
    """Recover the machine configuration a calculator node denotes.

    ``labels`` are the move labels along the path from the root; the windowed
    encodings need them to locate the frame. Raises UndecodableConfig when the
    node cannot be a reachable run configuration under those labels.
    """
    spec = calc.machine
    if calc.kind == "tm":
        state = config.get(VarId(STATE))
        cells = {
            var.index: val
            for var, val in config.support
            if var.name == CELL and val != spec.blank
        }
        return TapeConfig(state, tuple(sorted(cells.items())))

    if calc.kind == "lba_mono":
        value = config.get(VarId(WHOLE))
        return LbaConfig(value[0], value[1], tuple(value[2:]))

    triple = config.get(VarId(CELL, 0))
    state, written, move = triple
    if labels and labels[-1] != move:
        raise UndecodableConfig(
            f"head triple move {move} disagrees with last path label {labels[-1]}"
        )
    if calc.kind == "lba":
        offset = sum(labels[:-1])
        head = sum(labels)
        w = calc.tape_len + 1
        if not (0 <= offset <= w and 0 <= head <= w):
            raise UndecodableConfig(f"labels place the frame at {offset}, head at {head}")
        tape = []
        for k in range(w + 1):
            i = k - offset
            tape.append(written if i == 0 else config.get(VarId(CELL, i)))
        return LbaConfig(state, head, tuple(tape))

    # ntm: the frame lags the head by exactly the last move
    shift = labels[-1] if labels else 0
    cells = {-shift: written}
    for var, val in config.support:
        if var.name == CELL and var.index != 0:
            cells[var.index - shift] = val
    kept = tuple(sorted((k, g) for k, g in cells.items() if g != spec.blank))
    return TapeConfig(state, kept)


def edge_label(calc: CalculatorModel, parent: Configuration, child: Configuration) -> int:
    """The move taken on this tree edge."""
    if calc.kind in ("lba", "ntm"):
        return child.get(VarId(CELL, 0))[2]
    if calc.kind == "lba_mono":
        return child.get(VarId(WHOLE))[1] - parent.get(VarId(WHOLE))[1]
    state = parent.get(VarId(STATE))
    if state in calc.machine.finals:
        return 0
    scanned = parent.get(VarId(CELL, 0))
    return calc.machine.delta[(state, scanned)][0].move


def calc_labeler(calc: CalculatorModel):
    return lambda parent, child: edge_label(calc, parent, child)


def calc_accepts(
    calc: CalculatorModel,
    input_str: str,
    budget: int,
    *,
    node_cap: int = DEFAULT_NODE_CAP,
) -> tuple[RunTree, str]:
    """Acceptance verdict computed entirely on the calculator side."""
    root = initial_calc_config(calc, input_str)
    return closure_run(
        root,
        lambda cfg: [(c, edge_label(calc, cfg, c)) for c in successors(calc.model, cfg)],
        calc.accepting,
        budget,
        node_cap=node_cap,
    )
