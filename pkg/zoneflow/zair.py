"""ZAIR programs: instruction types, JSON (de)serialisation and replay validation."""
from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Set, Tuple, Union

from .arch import TOL, Architecture, TrapKey
from .circuit import StagedCircuit
from .errors import ReplayError
from .hardware import HardwareParams, movement_time
from .routing import AodLine, MachineInst

logger = logging.getLogger(__name__)

MACHINE_KINDS = ("activate", "parkMove", "move", "deactivate")


@dataclass(frozen=True)
class QLoc:
    q: int
    a: int
    r: int
    c: int

    @property
    def trap(self) -> TrapKey:
        return (self.a, self.r, self.c)

    def to_list(self) -> List[int]:
        return [self.q, self.a, self.r, self.c]


@dataclass(frozen=True)
class RydbergGate:
    gate_id: int
    q0: int
    q1: int


@dataclass
class InitInst:
    locs: List[QLoc]
    begin_time: Optional[float] = None
    end_time: Optional[float] = None
    kind: str = field(default="init", init=False)

    @property
    def qubits(self) -> List[int]:
        return [loc.q for loc in self.locs]


@dataclass
class OneQGateInst:
    unitary: Tuple[float, float, float]
    locs: List[QLoc]
    gate_id: Optional[int] = None
    begin_time: Optional[float] = None
    end_time: Optional[float] = None
    kind: str = field(default="1qGate", init=False)

    @property
    def qubits(self) -> List[int]:
        return [loc.q for loc in self.locs]


@dataclass
class RydbergInst:
    zone_id: int
    gates: List[RydbergGate] = field(default_factory=list)
    begin_time: Optional[float] = None
    end_time: Optional[float] = None
    kind: str = field(default="rydberg", init=False)

    @property
    def qubits(self) -> List[int]:
        return sorted(q for g in self.gates for q in (g.q0, g.q1))


@dataclass
class RearrangeJobInst:
    aod_id: int
    begin_locs: List[List[QLoc]]
    end_locs: List[List[QLoc]]
    insts: List[MachineInst] = field(default_factory=list)
    begin_time: Optional[float] = None
    end_time: Optional[float] = None
    kind: str = field(default="rearrangeJob", init=False)

    @property
    def qubits(self) -> List[int]:
        return sorted(loc.q for row in self.begin_locs for loc in row)


ZairInstruction = Union[InitInst, OneQGateInst, RydbergInst, RearrangeJobInst]


@dataclass
class ZairProgram:
    instructions: List[ZairInstruction] = field(default_factory=list)
    name: str = ""

    @property
    def init(self) -> Optional[InitInst]:
        if self.instructions and isinstance(self.instructions[0], InitInst):
            return self.instructions[0]
        return None

    @property
    def body(self) -> List[ZairInstruction]:
        return self.instructions[1:] if self.init is not None else list(self.instructions)

    def machine_instruction_count(self) -> int:
        return sum(len(i.insts) for i in self.instructions if isinstance(i, RearrangeJobInst))

    def count(self, kind: str) -> int:
        return sum(1 for i in self.instructions if i.kind == kind)


# -- serialisation ---------------------------------------------------------


def _lines_to_doc(lines: Sequence[AodLine]) -> List[Dict[str, float]]:
    return [{"id": line.index, "begin": line.begin, "end": line.end} for line in lines]


def _machine_to_doc(inst: MachineInst) -> Dict[str, Any]:
    return {
        "kind": inst.kind,
        "rows": _lines_to_doc(inst.rows),
        "cols": _lines_to_doc(inst.cols),
        "begin_time": inst.begin_time,
        "end_time": inst.end_time,
    }


def _timed(doc: Dict[str, Any], inst: ZairInstruction) -> Dict[str, Any]:
    if inst.begin_time is not None:
        doc["begin_time"] = inst.begin_time
    if inst.end_time is not None:
        doc["end_time"] = inst.end_time
    return doc


def instruction_to_doc(inst: ZairInstruction) -> Dict[str, Any]:
    if isinstance(inst, InitInst):
        doc: Dict[str, Any] = {"kind": inst.kind, "init_locs": [loc.to_list() for loc in inst.locs]}
    elif isinstance(inst, OneQGateInst):
        doc = {"kind": inst.kind, "unitary": list(inst.unitary), "locs": [loc.to_list() for loc in inst.locs]}
        if inst.gate_id is not None:
            doc["gate_id"] = inst.gate_id
    elif isinstance(inst, RydbergInst):
        doc = {
            "kind": inst.kind,
            "zone_id": inst.zone_id,
            "gates": [{"id": g.gate_id, "q0": g.q0, "q1": g.q1} for g in inst.gates],
        }
    elif isinstance(inst, RearrangeJobInst):
        doc = {
            "kind": inst.kind,
            "aod_id": inst.aod_id,
            "begin_locs": [[loc.to_list() for loc in row] for row in inst.begin_locs],
            "end_locs": [[loc.to_list() for loc in row] for row in inst.end_locs],
            "insts": [_machine_to_doc(m) for m in inst.insts],
        }
    else:
        raise TypeError(f"not a ZAIR instruction: {inst!r}")
    return _timed(doc, inst)


def serialize(program: ZairProgram) -> str:
    doc = {"name": program.name, "instructions": [instruction_to_doc(i) for i in program.instructions]}
    return json.dumps(doc, indent=2) + "\n"


def _qloc(value: Any, where: str) -> QLoc:
    try:
        q, a, r, c = (int(v) for v in value)
    except (TypeError, ValueError):
        raise ValueError(f"{where}: qloc must be four integers (q, a, r, c)") from None
    return QLoc(q, a, r, c)


def _lines(value: Any, where: str) -> Tuple[AodLine, ...]:
    try:
        return tuple(AodLine(int(d["id"]), float(d["begin"]), float(d["end"])) for d in value)
    except (KeyError, TypeError, ValueError):
        raise ValueError(f"{where}: malformed AOD line list") from None


def _machine(doc: Mapping[str, Any], where: str) -> MachineInst:
    kind = doc.get("kind")
    if kind not in MACHINE_KINDS:
        raise ValueError(f"{where}: unknown machine instruction kind '{kind}'")
    try:
        return MachineInst(
            kind,
            _lines(doc.get("rows", []), where),
            _lines(doc.get("cols", []), where),
            float(doc["begin_time"]),
            float(doc["end_time"]),
        )
    except KeyError as exc:
        raise ValueError(f"{where}: missing field {exc}") from None


def _times(doc: Mapping[str, Any]) -> Dict[str, Optional[float]]:
    return {
        "begin_time": float(doc["begin_time"]) if "begin_time" in doc else None,
        "end_time": float(doc["end_time"]) if "end_time" in doc else None,
    }


def instruction_from_doc(doc: Mapping[str, Any], index: int) -> ZairInstruction:
    where = f"instruction {index}"
    kind = doc.get("kind") if isinstance(doc, Mapping) else None
    try:
        if kind == "init":
            return InitInst([_qloc(v, where) for v in doc["init_locs"]], **_times(doc))
        if kind == "1qGate":
            unitary = tuple(float(v) for v in doc["unitary"])
            if len(unitary) != 3:
                raise ValueError(f"{where}: unitary must be a (theta, phi, lambda) triple")
            gate_id = int(doc["gate_id"]) if "gate_id" in doc else None
            return OneQGateInst(unitary, [_qloc(v, where) for v in doc["locs"]], gate_id, **_times(doc))
        if kind == "rydberg":
            gates = [RydbergGate(int(g["id"]), int(g["q0"]), int(g["q1"])) for g in doc.get("gates", [])]
            return RydbergInst(int(doc["zone_id"]), gates, **_times(doc))
        if kind == "rearrangeJob":
            begin = [[_qloc(v, where) for v in row] for row in doc["begin_locs"]]
            end = [[_qloc(v, where) for v in row] for row in doc["end_locs"]]
            insts = [_machine(m, f"{where}.insts[{i}]") for i, m in enumerate(doc.get("insts", []))]
            return RearrangeJobInst(int(doc["aod_id"]), begin, end, insts, **_times(doc))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{where}: malformed field ({exc})") from None
    raise ValueError(f"{where}: unknown instruction kind '{kind}'")


def parse_zair(text: Union[str, bytes]) -> ZairProgram:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"ZAIR program is not valid JSON: {exc}") from None
    if not isinstance(doc, Mapping) or not isinstance(doc.get("instructions"), list):
        raise ValueError("ZAIR document needs an 'instructions' list")
    return ZairProgram(
        [instruction_from_doc(item, i) for i, item in enumerate(doc["instructions"])],
        name=str(doc.get("name", "")),
    )


# -- replay ----------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    index: int
    kind: str
    message: str

    def as_dict(self) -> Dict[str, Any]:
        return {"index": self.index, "kind": self.kind, "message": self.message}


@dataclass
class ReplayCounters:
    num_qubits: int = 0
    g1: int = 0
    g2: int = 0
    n_exc: int = 0
    n_tran: int = 0
    transfers: Dict[int, int] = field(default_factory=dict)
    busy: Dict[int, float] = field(default_factory=dict)
    idle: Dict[int, float] = field(default_factory=dict)
    makespan: float = 0.0
    realized: Dict[int, int] = field(default_factory=dict)
    violations: List[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def as_dict(self) -> Dict[str, Any]:
        return {
            "num_qubits": self.num_qubits,
            "g1": self.g1,
            "g2": self.g2,
            "n_exc": self.n_exc,
            "n_tran": self.n_tran,
            "makespan": self.makespan,
            "violations": [v.as_dict() for v in self.violations],
        }


class _Replay:
    """Geometry state machine over one program."""

    def __init__(self, program: ZairProgram, arch: Architecture, hw: HardwareParams):
        self.program = program
        self.arch = arch
        self.hw = hw
        self.where: Dict[int, TrapKey] = {}
        self.occupant: Dict[TrapKey, int] = {}
        self.counters = ReplayCounters()
        self.index = 0

    def flag(self, kind: str, message: str) -> None:
        self.counters.violations.append(Violation(self.index, kind, message))

    def transfer(self, q: int) -> None:
        self.counters.n_tran += 1
        self.counters.transfers[q] = self.counters.transfers.get(q, 0) + 1
        self.counters.busy[q] = self.counters.busy.get(q, 0.0) + self.hw.t_tran

    def run(self) -> ReplayCounters:
        for self.index, inst in enumerate(self.program.instructions):
            if isinstance(inst, InitInst):
                self.init(inst)
            elif self.index == 0 or self.program.init is None:
                self.flag("malformed", "program must start with a single init instruction")
                return self.counters
            elif isinstance(inst, OneQGateInst):
                self.oneq(inst)
            elif isinstance(inst, RydbergInst):
                self.rydberg(inst)
            elif isinstance(inst, RearrangeJobInst):
                self.job(inst)
        return self.counters

    def init(self, inst: InitInst) -> None:
        if self.index != 0:
            self.flag("malformed", "init may only appear once, first")
            return
        for loc in inst.locs:
            if loc.q in self.where:
                self.flag("malformed", f"qubit {loc.q} initialised twice")
                continue
            if not self.arch.has_trap(*loc.trap):
                self.flag("unknown_trap", f"qubit {loc.q} placed on missing trap {loc.trap}")
                continue
            if loc.trap in self.occupant:
                self.flag("occupancy", f"qubits {self.occupant[loc.trap]} and {loc.q} share trap {loc.trap}")
                continue
            self.where[loc.q] = loc.trap
            self.occupant[loc.trap] = loc.q
        self.counters.num_qubits = len(inst.locs)
        for q in self.where:
            self.counters.busy.setdefault(q, 0.0)
            self.counters.transfers.setdefault(q, 0)

    def oneq(self, inst: OneQGateInst) -> None:
        for loc in inst.locs:
            if self.where.get(loc.q) != loc.trap:
                self.flag("location", f"1Q gate expects qubit {loc.q} at {loc.trap}, found {self.where.get(loc.q)}")
            self.counters.busy[loc.q] = self.counters.busy.get(loc.q, 0.0) + self.hw.t_1q
            self.counters.g1 += 1

    def rydberg(self, inst: RydbergInst) -> None:
        try:
            zone = self.arch.zone(inst.zone_id)
        except ValueError:
            zone = None
        if zone is None or zone.kind != "entanglement":
            self.flag("zone", f"rydberg on zone {inst.zone_id}, which is not an entanglement zone")
            return
        listed: Dict[int, RydbergGate] = {}
        for gate in inst.gates:
            listed[gate.q0] = gate
            listed[gate.q1] = gate
        paired: Set[int] = set()
        for gate in inst.gates:
            traps = [self.where.get(gate.q0), self.where.get(gate.q1)]
            sites = [self.arch.site_of(self.arch.trap(*k)) if k is not None else None for k in traps]
            if None in sites or sites[0][0].key != sites[1][0].key or sites[0][0].zone_id != inst.zone_id:
                self.flag("unrealized_gate", f"gate {gate.gate_id} qubits ({gate.q0},{gate.q1}) are not at one site")
                continue
            if gate.gate_id in self.counters.realized:
                self.flag("duplicate_gate", f"gate {gate.gate_id} executed twice")
            self.counters.realized[gate.gate_id] = self.index
            self.counters.g2 += 1
            paired.update((gate.q0, gate.q1))
            for q in (gate.q0, gate.q1):
                self.counters.busy[q] = self.counters.busy.get(q, 0.0) + self.hw.t_ryd
        for site in self.arch.sites_in_zone(inst.zone_id):
            occupants = [self.occupant[t.key] for t in site.traps if t.key in self.occupant]
            strays = [q for q in occupants if q not in paired]
            if len(strays) == 2:
                self.flag("unintended_pairing", f"qubits {strays[0]} and {strays[1]} share site {site.key} unscheduled")
            self.counters.n_exc += len(strays)

    def job(self, inst: RearrangeJobInst) -> None:
        try:
            aod = self.arch.aod(inst.aod_id)
        except ValueError:
            self.flag("aod", f"unknown aod_id {inst.aod_id}")
            return
        if [len(r) for r in inst.begin_locs] != [len(r) for r in inst.end_locs]:
            self.flag("shape", "begin_locs and end_locs differ in shape")
            return
        expected: Dict[int, TrapKey] = {}
        for row in inst.begin_locs:
            for loc in row:
                if self.where.get(loc.q) != loc.trap:
                    self.flag("location", f"job expects qubit {loc.q} at {loc.trap}, found {self.where.get(loc.q)}")
                expected[loc.q] = loc.trap
        self._check_grid(inst.begin_locs, "begin")
        self._check_grid(inst.end_locs, "end")

        rows: Dict[int, float] = {}
        cols: Dict[int, float] = {}
        held: Dict[Tuple[int, int], int] = {}
        clock = 0.0
        for m in inst.insts:
            if m.begin_time < clock - TOL or m.end_time < m.begin_time - TOL:
                self.flag("timing", f"machine instruction {m.kind} overlaps its predecessor")
            clock = m.end_time
            if m.kind == "activate":
                self._activate(m, rows, cols, held, expected, aod.min_sep)
            elif m.kind == "deactivate":
                self._deactivate(m, rows, cols, held)
            else:
                self._move(m, rows, cols, held, aod.min_sep)
        if held or rows or cols:
            self.flag("malformed", "job ends with AOD lines still active")
            for q in held.values():
                self.where.pop(q, None)
        for row in inst.end_locs:
            for loc in row:
                if self.where.get(loc.q) != loc.trap:
                    self.flag("location", f"job should leave qubit {loc.q} at {loc.trap}, found {self.where.get(loc.q)}")
        if inst.begin_time is not None and inst.end_time is not None and inst.insts:
            if abs((inst.end_time - inst.begin_time) - inst.insts[-1].end_time) > 1e-6:
                self.flag("timing", "job duration disagrees with its machine instructions")

    def _check_grid(self, grid: List[List[QLoc]], label: str) -> None:
        for row in grid:
            xs = []
            for loc in row:
                if not self.arch.has_trap(*loc.trap):
                    self.flag("unknown_trap", f"{label} loc of qubit {loc.q} names missing trap {loc.trap}")
                    return
                trap = self.arch.trap(*loc.trap)
                xs.append(trap.x)
            if any(b <= a + TOL for a, b in zip(xs, xs[1:])):
                self.flag("ordering", f"{label} grid row is not sorted by x")
        row_y = [self.arch.trap(*row[0].trap).y for row in grid if row]
        if any(b <= a + TOL for a, b in zip(row_y, row_y[1:])):
            self.flag("ordering", f"{label} grid rows are not sorted by y")

    def _check_order(self, lines: Dict[int, float], min_sep: float, what: str) -> None:
        ordered = [lines[k] for k in sorted(lines)]
        for a, b in zip(ordered, ordered[1:]):
            if b - a < min_sep - TOL:
                self.flag("ordering", f"active AOD {what}s out of order or closer than {min_sep:g} um")
                return

    def _activate(self, m, rows, cols, held, expected, min_sep) -> None:
        new_rows, new_cols = [], []
        for line, store, bucket in [(l, rows, new_rows) for l in m.rows] + [(l, cols, new_cols) for l in m.cols]:
            if line.index in store or abs(line.begin - line.end) > TOL:
                self.flag("malformed", f"bad activation of AOD line {line.index}")
                continue
            store[line.index] = line.begin
            bucket.append(line.index)
        self._check_order(rows, min_sep, "row")
        self._check_order(cols, min_sep, "column")
        self._check_duration(m, self.hw.t_tran)
        crossings = {(r, c) for r in new_rows for c in cols} | {(r, c) for r in rows for c in new_cols}
        for r, c in sorted(crossings):
            trap = self.arch.trap_at(cols[c], rows[r])
            if trap is None or trap.key not in self.occupant:
                continue
            q = self.occupant.pop(trap.key)
            if expected.get(q) != trap.key:
                self.flag("unintended_pickup", f"activation picks up qubit {q} at {trap.key}")
            del self.where[q]
            held[(r, c)] = q
            self.transfer(q)

    def _deactivate(self, m, rows, cols, held) -> None:
        off_rows = set()
        off_cols = set()
        for line, store, bucket in [(l, rows, off_rows) for l in m.rows] + [(l, cols, off_cols) for l in m.cols]:
            if line.index not in store or abs(store[line.index] - line.begin) > TOL:
                self.flag("malformed", f"bad deactivation of AOD line {line.index}")
                continue
            bucket.add(line.index)
        self._check_duration(m, self.hw.t_tran)
        for (r, c), q in sorted(held.items()):
            if r not in off_rows and c not in off_cols:
                continue
            trap = self.arch.trap_at(cols[c], rows[r])
            del held[(r, c)]
            if trap is None:
                self.flag("alignment", f"qubit {q} released at ({cols[c]:g},{rows[r]:g}) away from any trap")
                continue
            if trap.key in self.occupant:
                self.flag("occupancy", f"qubit {q} dropped onto trap {trap.key} held by {self.occupant[trap.key]}")
                continue
            self.occupant[trap.key] = q
            self.where[q] = trap.key
            self.transfer(q)
        for r in off_rows:
            rows.pop(r, None)
        for c in off_cols:
            cols.pop(c, None)

    def _move(self, m, rows, cols, held, min_sep) -> None:
        shift_r = {}
        shift_c = {}
        for line, store, shift in [(l, rows, shift_r) for l in m.rows] + [(l, cols, shift_c) for l in m.cols]:
            if line.index not in store or abs(store[line.index] - line.begin) > TOL:
                self.flag("malformed", f"{m.kind} moves inactive or misplaced AOD line {line.index}")
                continue
            shift[line.index] = (line.begin, line.end)
        for frac in (0.5, 1.0):
            self._check_order({k: _lerp(shift_r.get(k), v, frac) for k, v in rows.items()}, min_sep, "row")
            self._check_order({k: _lerp(shift_c.get(k), v, frac) for k, v in cols.items()}, min_sep, "column")
        longest = 0.0
        for (r, c) in held:
            y0, y1 = shift_r.get(r, (rows[r], rows[r]))
            x0, x1 = shift_c.get(c, (cols[c], cols[c]))
            longest = max(longest, ((x1 - x0) ** 2 + (y1 - y0) ** 2) ** 0.5)
        self._check_duration(m, movement_time(longest, self.hw))
        for k, (_, end) in shift_r.items():
            rows[k] = end
        for k, (_, end) in shift_c.items():
            cols[k] = end

    def _check_duration(self, m: MachineInst, expected: float) -> None:
        if abs(m.duration - expected) > 1e-6:
            self.flag("timing", f"{m.kind} lasts {m.duration:.6f} us, expected {expected:.6f} us")


def _lerp(shift: Optional[Tuple[float, float]], current: float, frac: float) -> float:
    if shift is None:
        return current
    return shift[0] + (shift[1] - shift[0]) * frac


def _check_timing(program: ZairProgram, counters: ReplayCounters) -> None:
    per_aod: Dict[int, List[Tuple[float, float, int]]] = defaultdict(list)
    per_qubit: Dict[int, List[Tuple[float, float, int]]] = defaultdict(list)
    for index, inst in enumerate(program.instructions):
        if inst.begin_time is None or inst.end_time is None or isinstance(inst, InitInst):
            continue
        span = (inst.begin_time, inst.end_time, index)
        if isinstance(inst, RearrangeJobInst):
            per_aod[inst.aod_id].append(span)
        for q in inst.qubits:
            per_qubit[q].append(span)
        counters.makespan = max(counters.makespan, inst.end_time)
    for label, table in (("AOD", per_aod), ("qubit", per_qubit)):
        for key, spans in sorted(table.items()):
            spans.sort()
            for (_, end_a, ia), (start_b, _, ib) in zip(spans, spans[1:]):
                if start_b < end_a - 1e-6:
                    counters.violations.append(
                        Violation(ib, "timing", f"{label} {key}: instruction {ib} overlaps instruction {ia}")
                    )


def validate_replay(
    program: ZairProgram,
    arch: Architecture,
    hw: Optional[HardwareParams] = None,
    circuit: Optional[StagedCircuit] = None,
) -> ReplayCounters:
    """Replay a program against the architecture; violations are collected, not raised."""
    replay = _Replay(program, arch, hw or HardwareParams())
    counters = replay.run()
    _check_timing(program, counters)
    if circuit is not None:
        end = len(program.instructions)
        expected = {g.index for g in circuit.gates() if g.is_two_qubit}
        for gate_id in sorted(expected - set(counters.realized)):
            counters.violations.append(Violation(end, "unrealized_gate", f"gate {gate_id} never executed"))
        for gate_id in sorted(set(counters.realized) - expected):
            counters.violations.append(Violation(end, "unknown_gate", f"gate {gate_id} is not in the circuit"))
        if program.init is not None and len(program.init.locs) != circuit.num_qubits:
            counters.violations.append(Violation(0, "malformed", "init does not cover every qubit exactly once"))
    counters.num_qubits = max(counters.num_qubits, circuit.num_qubits if circuit is not None else 0)
    for q in range(counters.num_qubits):
        counters.busy.setdefault(q, 0.0)
        counters.transfers.setdefault(q, 0)
        counters.idle[q] = max(counters.makespan - counters.busy[q], 0.0)
    if counters.violations:
        logger.warning("[REPLAY] %d violation(s); first: %s", len(counters.violations), counters.violations[0].message)
    else:
        logger.info("[REPLAY] ok: g2=%d n_tran=%d n_exc=%d", counters.g2, counters.n_tran, counters.n_exc)
    return counters


def require_clean(counters: ReplayCounters) -> ReplayCounters:
    if counters.violations:
        raise ReplayError(
            f"replay found {len(counters.violations)} violation(s)", [v.as_dict() for v in counters.violations]
        )
    return counters
