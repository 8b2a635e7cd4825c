"""Rearrangement jobs: movement extraction, MIS batching and AOD instruction expansion."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

import networkx as nx

from .arch import TOL, Architecture, TrapKey, TrapRef
from .errors import CompilerBugError
from .hardware import HardwareParams, movement_time
from .placement import StagePlan

logger = logging.getLogger(__name__)

TO_ENTANGLEMENT = "to_entanglement"
TO_STORAGE = "to_storage"


@dataclass(frozen=True)
class Movement:
    qubit: int
    src: TrapRef
    dst: TrapRef

    def __post_init__(self) -> None:
        if self.src.key == self.dst.key:
            raise ValueError(f"movement of qubit {self.qubit} does not move")

    @property
    def displacement(self) -> float:
        return math.hypot(self.dst.x - self.src.x, self.dst.y - self.src.y)


@dataclass(frozen=True)
class AodLine:
    """One AOD row (position = y) or column (position = x) going from `begin` to `end`."""

    index: int
    begin: float
    end: float


@dataclass(frozen=True)
class MachineInst:
    kind: str  # activate | parkMove | move | deactivate
    rows: Tuple[AodLine, ...]
    cols: Tuple[AodLine, ...]
    begin_time: float
    end_time: float

    @property
    def duration(self) -> float:
        return self.end_time - self.begin_time


@dataclass
class RearrangementJob:
    job_id: int
    rows: List[List[Movement]]
    stage: int = 0
    direction: str = TO_ENTANGLEMENT
    aod_id: int = -1
    insts: List[MachineInst] = field(default_factory=list)
    pickup_time: float = 0.0
    move_time: float = 0.0
    dropoff_time: float = 0.0

    @property
    def movements(self) -> List[Movement]:
        return [m for row in self.rows for m in row]

    @property
    def qubits(self) -> List[int]:
        return sorted(m.qubit for m in self.movements)

    @property
    def vacated(self) -> Set[TrapKey]:
        return {m.src.key for m in self.movements}

    @property
    def filled(self) -> Set[TrapKey]:
        return {m.dst.key for m in self.movements}

    @property
    def pickup_finish(self) -> float:
        return self.pickup_time

    @property
    def move_finish(self) -> float:
        return self.pickup_time + self.move_time

    @property
    def duration(self) -> float:
        return self.pickup_time + self.move_time + self.dropoff_time

    @property
    def begin_locs(self) -> List[List[Tuple[int, int, int, int]]]:
        return [[(m.qubit, m.src.slm_id, m.src.row, m.src.col) for m in row] for row in self.rows]

    @property
    def end_locs(self) -> List[List[Tuple[int, int, int, int]]]:
        return [[(m.qubit, m.dst.slm_id, m.dst.row, m.dst.col) for m in row] for row in self.rows]


def movements_for_stage(plan: StagePlan) -> Tuple[List[Movement], List[Movement]]:
    to_entanglement = [
        Movement(q, plan.before[q], plan.at_rydberg[q])
        for q in plan.at_rydberg
        if plan.before[q].key != plan.at_rydberg[q].key
    ]
    to_storage = [
        Movement(q, plan.at_rydberg[q], plan.after[q])
        for q in plan.after
        if plan.at_rydberg[q].key != plan.after[q].key
    ]
    return to_entanglement, to_storage


def _sign(value: float) -> int:
    if value > TOL:
        return 1
    if value < -TOL:
        return -1
    return 0


def compatible(a: Movement, b: Movement, min_sep: float = 0.0) -> bool:
    """True iff one AOD can carry both movements without lines crossing or merging."""
    if a.qubit == b.qubit:
        return False
    if len({a.src.key, a.dst.key, b.src.key, b.dst.key}) < 4:
        return False
    for begin, end in ((a.src.x - b.src.x, a.dst.x - b.dst.x), (a.src.y - b.src.y, a.dst.y - b.dst.y)):
        if _sign(begin) != _sign(end):
            return False
        if min_sep > 0 and _sign(begin) != 0 and min(abs(begin), abs(end)) < min_sep - TOL:
            return False
    return True


def job_limits(arch: Architecture) -> Tuple[float, int, int]:
    """(min_sep, max rows, max cols) that every AOD of the architecture honours."""
    return (
        max(a.min_sep for a in arch.aods),
        min(a.max_num_row for a in arch.aods),
        min(a.max_num_col for a in arch.aods),
    )


def _grid(moves: Sequence[Movement]) -> List[List[Movement]]:
    rows: List[List[Movement]] = []
    for m in sorted(moves, key=lambda m: (m.src.y, m.src.x)):
        if rows and abs(rows[-1][0].src.y - m.src.y) <= TOL:
            rows[-1].append(m)
        else:
            rows.append([m])
    return rows


def _distinct(values: Sequence[float]) -> List[float]:
    out: List[float] = []
    for v in sorted(values):
        if not out or v - out[-1] > TOL:
            out.append(v)
    return out


def batch_movements(
    moves: Sequence[Movement],
    min_sep: float = 0.0,
    max_rows: Optional[int] = None,
    max_cols: Optional[int] = None,
    stage: int = 0,
    direction: str = TO_ENTANGLEMENT,
    first_id: int = 0,
) -> List[RearrangementJob]:
    """Split movements into jobs by repeatedly taking a greedy maximal independent set."""
    moves = sorted(moves, key=lambda m: m.qubit)
    conflicts = nx.Graph()
    conflicts.add_nodes_from(range(len(moves)))
    for i in range(len(moves)):
        for j in range(i + 1, len(moves)):
            if not compatible(moves[i], moves[j], min_sep):
                conflicts.add_edge(i, j)

    pending = set(range(len(moves)))
    jobs: List[RearrangementJob] = []
    while pending:
        candidates = set(pending)
        chosen: List[int] = []
        while candidates:
            node = min(
                candidates,
                key=lambda i: (sum(1 for nb in conflicts[i] if nb in candidates), moves[i].qubit),
            )
            candidates.discard(node)
            trial = [moves[i] for i in chosen] + [moves[node]]
            if max_rows is not None and len(_distinct([m.src.y for m in trial])) > max_rows:
                continue
            if max_cols is not None and len(_distinct([m.src.x for m in trial])) > max_cols:
                continue
            chosen.append(node)
            candidates.difference_update(conflicts[node])
        if not chosen:
            raise CompilerBugError("AOD capacity admits no movement at all")
        pending.difference_update(chosen)
        jobs.append(
            RearrangementJob(
                job_id=first_id + len(jobs),
                rows=_grid([moves[i] for i in chosen]),
                stage=stage,
                direction=direction,
            )
        )
    return jobs


def _max_atom_shift(
    held: Sequence[Tuple[int, int]], rows: Dict[int, Tuple[float, float]], cols: Dict[int, Tuple[float, float]]
) -> float:
    best = 0.0
    for i, j in held:
        y0, y1 = rows.get(i, (0.0, 0.0))
        x0, x1 = cols.get(j, (0.0, 0.0))
        best = max(best, math.hypot(x1 - x0, y1 - y0))
    return best


def _check_order(lines: Dict[int, float], min_sep: float, what: str, job_id: int) -> None:
    ordered = [lines[k] for k in sorted(lines)]
    for a, b in zip(ordered, ordered[1:]):
        if b - a < min_sep - TOL:
            raise CompilerBugError(f"job {job_id}: AOD {what} ordering broken during expansion")


def expand_job(job: RearrangementJob, arch: Architecture, hw: HardwareParams) -> RearrangementJob:
    """Fill `job.insts`: row-by-row pickup with parking, one big move, row-by-row dropoff."""
    min_sep, _, _ = job_limits(arch)
    park = min_sep / 2.0
    moves = job.movements
    row_y = _distinct([m.src.y for m in moves])
    col_x = _distinct([m.src.x for m in moves])

    def row_of(m: Movement) -> int:
        return next(i for i, y in enumerate(row_y) if abs(y - m.src.y) <= TOL)

    def col_of(m: Movement) -> int:
        return next(j for j, x in enumerate(col_x) if abs(x - m.src.x) <= TOL)

    wanted: Dict[int, Set[int]] = {i: set() for i in range(len(row_y))}
    end_y: Dict[int, float] = {}
    end_x: Dict[int, float] = {}
    for m in moves:
        i, j = row_of(m), col_of(m)
        wanted[i].add(j)
        end_y[i] = m.dst.y
        end_x[j] = m.dst.x

    def hazard(x: float, y: float) -> bool:
        return arch.trap_at(x, y) is not None

    insts: List[MachineInst] = []
    clock = 0.0
    row_pos: Dict[int, float] = {}
    col_pos: Dict[int, float] = {}
    for i, y in enumerate(row_y):
        new_cols = sorted(wanted[i] - set(col_pos))
        row_shift: Dict[int, Tuple[float, float]] = {}
        col_shift: Dict[int, Tuple[float, float]] = {}
        for j, x in col_pos.items():
            exact = abs(x - col_x[j]) <= TOL
            if j in wanted[i] and not exact:
                col_shift[j] = (x, col_x[j])
            elif j not in wanted[i] and exact and hazard(x, y):
                col_shift[j] = (x, x + park)
        for k, yk in row_pos.items():
            if abs(yk - row_y[k]) <= TOL and any(hazard(col_x[j], yk) for j in new_cols):
                row_shift[k] = (yk, yk + park)
        if row_shift or col_shift:
            held = [(k, j) for k in row_pos for j in wanted[k]]
            duration = movement_time(_max_atom_shift(held, row_shift, col_shift), hw)
            insts.append(
                MachineInst(
                    "parkMove",
                    tuple(AodLine(k, a, b) for k, (a, b) in sorted(row_shift.items())),
                    tuple(AodLine(j, a, b) for j, (a, b) in sorted(col_shift.items())),
                    clock,
                    clock + duration,
                )
            )
            clock += duration
            row_pos.update({k: b for k, (_, b) in row_shift.items()})
            col_pos.update({j: b for j, (_, b) in col_shift.items()})
        insts.append(
            MachineInst(
                "activate",
                (AodLine(i, y, y),),
                tuple(AodLine(j, col_x[j], col_x[j]) for j in new_cols),
                clock,
                clock + hw.t_tran,
            )
        )
        clock += hw.t_tran
        row_pos[i] = y
        col_pos.update({j: col_x[j] for j in new_cols})
        _check_order(row_pos, min_sep, "row", job.job_id)
        _check_order(col_pos, min_sep, "column", job.job_id)
    pickup = clock

    row_move = {i: (row_pos[i], end_y[i]) for i in row_pos}
    col_move = {j: (col_pos[j], end_x[j]) for j in col_pos}
    held = [(i, j) for i in wanted for j in wanted[i]]
    travel = movement_time(_max_atom_shift(held, row_move, col_move), hw)
    insts.append(
        MachineInst(
            "move",
            tuple(AodLine(i, a, b) for i, (a, b) in sorted(row_move.items())),
            tuple(AodLine(j, a, b) for j, (a, b) in sorted(col_move.items())),
            clock,
            clock + travel,
        )
    )
    clock += travel
    _check_order(end_y, min_sep, "row", job.job_id)
    _check_order(end_x, min_sep, "column", job.job_id)

    last_row = {j: max(i for i in wanted if j in wanted[i]) for j in col_pos}
    for i in range(len(row_y)):
        closing = sorted(j for j, last in last_row.items() if last == i)
        insts.append(
            MachineInst(
                "deactivate",
                (AodLine(i, end_y[i], end_y[i]),),
                tuple(AodLine(j, end_x[j], end_x[j]) for j in closing),
                clock,
                clock + hw.t_tran,
            )
        )
        clock += hw.t_tran

    job.insts = insts
    job.pickup_time = pickup
    job.move_time = travel
    job.dropoff_time = len(row_y) * hw.t_tran
    return job


def route_plan(
    plan: StagePlan, arch: Architecture, hw: HardwareParams, first_id: int = 0
) -> Tuple[List[RearrangementJob], List[RearrangementJob]]:
    """Batch and expand the to-entanglement and to-storage jobs of one stage plan."""
    min_sep, max_rows, max_cols = job_limits(arch)
    to_ent, to_sto = movements_for_stage(plan)
    inbound = batch_movements(to_ent, min_sep, max_rows, max_cols, plan.t, TO_ENTANGLEMENT, first_id)
    outbound = batch_movements(to_sto, min_sep, max_rows, max_cols, plan.t, TO_STORAGE, first_id + len(inbound))
    for job in inbound + outbound:
        expand_job(job, arch, hw)
    logger.debug(
        "[ROUTE] stage %d: %d+%d movements in %d+%d jobs",
        plan.t,
        len(to_ent),
        len(to_sto),
        len(inbound),
        len(outbound),
    )
    return inbound, outbound
