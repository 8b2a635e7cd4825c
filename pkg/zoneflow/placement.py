"""Initial placement (simulated annealing) and per-stage reuse-aware placement."""
from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .arch import TOL, Architecture, Point, RydbergSite, TrapKey, TrapRef, distance
from .circuit import Gate, StagedCircuit
from .config import CompilerConfig
from .errors import CapacityError

logger = logging.getLogger(__name__)

_FORBIDDEN = 1e12


class Placement(Mapping[int, TrapRef]):
    """Qubit -> trap map at one point of the compilation."""

    def __init__(self, mapping: Mapping[int, TrapRef]):
        self._map: Dict[int, TrapRef] = dict(sorted(mapping.items()))

    def __getitem__(self, qubit: int) -> TrapRef:
        return self._map[qubit]

    def __iter__(self) -> Iterator[int]:
        return iter(self._map)

    def __len__(self) -> int:
        return len(self._map)

    def __repr__(self) -> str:
        return f"Placement({self._map!r})"

    def position(self, qubit: int) -> Point:
        return self._map[qubit].position

    def occupied(self) -> Set[TrapKey]:
        return {trap.key for trap in self._map.values()}

    def is_injective(self) -> bool:
        return len(self.occupied()) == len(self._map)

    def updated(self, changes: Mapping[int, TrapRef]) -> "Placement":
        merged = dict(self._map)
        merged.update(changes)
        return Placement(merged)


@dataclass
class Matching:
    """A min-weight full matching: agent -> target plus the weight of each chosen edge."""

    assignment: Dict = field(default_factory=dict)
    weights: Dict = field(default_factory=dict)

    @property
    def total(self) -> float:
        return float(sum(self.weights.values()))


@dataclass
class StagePlan:
    t: int
    gate_sites: Dict[Gate, RydbergSite]
    reuse: Dict[Gate, RydbergSite]
    returns: Dict[int, TrapRef]
    before: Placement
    at_rydberg: Placement
    after: Placement
    inherited: Tuple[Gate, ...] = ()
    kept: Tuple[int, ...] = ()
    gate_cost: float = 0.0
    return_cost: float = 0.0
    reuse_used: bool = False

    @property
    def cost(self) -> float:
        return self.gate_cost + self.return_cost

    def summary(self) -> Dict[str, object]:
        return {
            "t": self.t,
            "gates": len(self.gate_sites),
            "inherited": len(self.inherited),
            "kept_qubits": list(self.kept),
            "reuse_used": self.reuse_used,
            "gate_cost": round(self.gate_cost, 9),
            "return_cost": round(self.return_cost, 9),
        }


# -- cost model ------------------------------------------------------------


def stage_weight(t: int) -> float:
    return max(0.1, 1.0 - 0.1 * (t - 1))


def g_cost(gate: Gate, site: RydbergSite, placement: Mapping[int, TrapRef]) -> float:
    q, p = gate.qubits
    mq, mp = placement[q], placement[p]
    dq = math.sqrt(distance(site.position, mq.position))
    dp = math.sqrt(distance(site.position, mp.position))
    if abs(mq.y - mp.y) <= TOL:
        # Same row: both qubits ride one AOD row in parallel.
        return max(dq, dp)
    return dq + dp


def nearest_site_for_gate(gate: Gate, placement: Mapping[int, TrapRef], arch: Architecture) -> RydbergSite:
    q, p = gate.qubits
    a = arch.nearest_site(placement[q].position)
    b = arch.nearest_site(placement[p].position)
    if a.zone_id != b.zone_id:
        return min((a, b), key=lambda s: (g_cost(gate, s, placement), s.zone_id))
    site = arch.site(a.zone_id, (a.row + b.row) // 2, (a.col + b.col) // 2)
    if site is None:
        mid = ((a.position[0] + b.position[0]) / 2, (a.position[1] + b.position[1]) / 2)
        site = arch.nearest_site(mid, zone_id=a.zone_id)
    return site


def initial_placement_cost(placement: Mapping[int, TrapRef], circuit: StagedCircuit, arch: Architecture) -> float:
    total = 0.0
    for t, stage in enumerate(circuit.rydberg_stages, start=1):
        w = stage_weight(t)
        for gate in stage.gates:
            total += w * g_cost(gate, nearest_site_for_gate(gate, placement, arch), placement)
    return total


# -- initial placement -----------------------------------------------------


def seed_placement(circuit: StagedCircuit, arch: Architecture) -> Placement:
    """Qubits in index order along the storage row closest to the first entanglement zone."""
    if circuit.num_qubits > len(arch.storage_traps):
        raise CapacityError(
            f"{circuit.num_qubits} qubits do not fit into {len(arch.storage_traps)} storage traps",
            context={"qubits": circuit.num_qubits},
        )
    _, zy0, _, zy1 = arch.entanglement_zones[0].bounds()

    def row_gap(y: float) -> float:
        return max(zy0 - y, y - zy1, 0.0)

    ordered = sorted(arch.storage_traps, key=lambda t: (row_gap(t.y), t.y, t.x))
    return Placement({q: ordered[q] for q in range(circuit.num_qubits)})


def anneal_initial_placement(circuit: StagedCircuit, arch: Architecture, config: CompilerConfig) -> Placement:
    seed = seed_placement(circuit, arch)
    if not config.sa_enabled or circuit.g2 == 0 or config.sa_iteration_limit == 0:
        return seed

    rng = random.Random(config.sa_seed)
    weighted: List[Tuple[Gate, float]] = [
        (gate, stage_weight(t)) for t, stage in enumerate(circuit.rydberg_stages, start=1) for gate in stage.gates
    ]
    touching: Dict[int, List[int]] = {q: [] for q in range(circuit.num_qubits)}
    for i, (gate, _) in enumerate(weighted):
        for q in gate.qubits:
            touching[q].append(i)

    current: Dict[int, TrapRef] = dict(seed)
    holder: Dict[TrapKey, int] = {trap.key: q for q, trap in current.items()}

    def gate_cost(i: int) -> float:
        gate, w = weighted[i]
        return w * g_cost(gate, nearest_site_for_gate(gate, current, arch), current)

    costs = [gate_cost(i) for i in range(len(weighted))]
    cost = sum(costs)
    seed_cost = cost
    best_cost, best = cost, dict(current)
    temperature = cost / 10.0
    if temperature <= 0:
        return seed
    logger.info("[SA] start cost=%.4f gates=%d qubits=%d", cost, len(weighted), circuit.num_qubits)

    storage = arch.storage_traps
    n_q = circuit.num_qubits
    rejected = 0
    iterations = 0
    for iterations in range(1, config.sa_iteration_limit + 1):
        changes: Dict[int, TrapRef] = {}
        if n_q >= 2 and (rng.random() < 0.5 or len(storage) == n_q):
            a, b = rng.sample(range(n_q), 2)
            changes = {a: current[b], b: current[a]}
        else:
            q = rng.randrange(n_q)
            target = storage[rng.randrange(len(storage))]
            if target.key in holder:
                rejected += 1
                temperature *= config.sa_cooling
                if rejected >= config.sa_convergence_window:
                    break
                continue
            changes = {q: target}

        previous = {q: current[q] for q in changes}
        affected = sorted({i for q in changes for i in touching[q]})
        current.update(changes)
        new_costs = {i: gate_cost(i) for i in affected}
        delta = sum(new_costs[i] - costs[i] for i in affected)
        accept = delta <= 0 or (temperature > 0 and rng.random() < math.exp(-delta / temperature))
        if accept:
            for q, trap in previous.items():
                holder.pop(trap.key, None)
            for q, trap in changes.items():
                holder[trap.key] = q
            for i, value in new_costs.items():
                costs[i] = value
            cost += delta
            rejected = 0
            if cost < best_cost - 1e-9:
                best_cost, best = cost, dict(current)
        else:
            current.update(previous)
            rejected += 1
        temperature *= config.sa_cooling
        if rejected >= config.sa_convergence_window:
            break

    result = Placement(best)
    final_cost = initial_placement_cost(result, circuit, arch)
    if final_cost > initial_placement_cost(seed, circuit, arch):
        result, final_cost = seed, seed_cost
    logger.info("[SA] done iterations=%d cost %.4f -> %.4f", iterations, seed_cost, final_cost)
    return result


# -- matchings --------------------------------------------------------------


def _min_weight_matching(
    agents: Sequence, candidates: Mapping[object, Sequence], weight: Callable[[object, object], float], key
) -> Optional[Matching]:
    """Min-weight full matching of every agent to one of its candidates (None if infeasible)."""
    columns = sorted({c for agent in agents for c in candidates[agent]}, key=key)
    if len(columns) < len(agents):
        return None
    index = {key(c): j for j, c in enumerate(columns)}
    cost = np.full((len(agents), len(columns)), _FORBIDDEN)
    for i, agent in enumerate(agents):
        for c in candidates[agent]:
            cost[i, index[key(c)]] = weight(agent, c)
    rows, cols = linear_sum_assignment(cost)
    if len(rows) < len(agents) or np.any(cost[rows, cols] >= _FORBIDDEN):
        return None
    result = Matching()
    for i, j in zip(rows, cols):
        result.assignment[agents[i]] = columns[j]
        result.weights[agents[i]] = float(cost[i, j])
    return result


def reuse_pairs(stage_gates: Sequence[Gate], next_gates: Sequence[Gate]) -> Dict[Gate, Gate]:
    """Maximum-cardinality matching between gates of consecutive stages sharing a qubit."""
    rows, cols = [], []
    for i, g in enumerate(stage_gates):
        for j, h in enumerate(next_gates):
            if set(g.qubits) & set(h.qubits):
                rows.append(i)
                cols.append(j)
    if not rows:
        return {}
    graph = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(stage_gates), len(next_gates)))
    matched = maximum_bipartite_matching(graph, perm_type="column")
    return {stage_gates[i]: next_gates[j] for i, j in enumerate(matched) if j >= 0}


def match_reuse(
    stage_gates: Sequence[Gate], next_gates: Sequence[Gate], gate_sites: Mapping[Gate, RydbergSite]
) -> Dict[Gate, RydbergSite]:
    """Next-stage gate -> the site it inherits from its matched stage-t gate."""
    return {h: gate_sites[g] for g, h in reuse_pairs(stage_gates, next_gates).items()}


def place_gates(
    gates: Sequence[Gate],
    placement: Mapping[int, TrapRef],
    arch: Architecture,
    config: CompilerConfig,
    reserved: Iterable[RydbergSite] = (),
    lookahead: Optional[Mapping[Gate, int]] = None,
) -> Matching:
    """Assign gates to free Rydberg sites by a min-weight full matching."""
    gates = list(gates)
    if not gates:
        return Matching()
    lookahead = lookahead or {}
    taken = {site.key for site in reserved}
    free = [s for s in arch.sites if s.key not in taken]
    if len(gates) > len(free):
        raise CapacityError(f"{len(gates)} gates but only {len(free)} free Rydberg sites", context={"gates": len(gates)})

    def weight(gate: Gate, site: RydbergSite) -> float:
        value = g_cost(gate, site, placement)
        if gate in lookahead:
            value += math.sqrt(distance(site.position, placement[lookahead[gate]].position))
        return value

    anchors = {g: nearest_site_for_gate(g, placement, arch) for g in gates}
    cap = max(max(arch.zone_shape(z.zone_id)) for z in arch.entanglement_zones)
    delta = config.delta
    while True:
        candidates = {
            g: [
                s
                for s in free
                if s.zone_id == anchors[g].zone_id
                and max(abs(s.row - anchors[g].row), abs(s.col - anchors[g].col)) <= delta
            ]
            for g in gates
        }
        found = _min_weight_matching(gates, candidates, weight, key=lambda s: s.key)
        if found is not None:
            return found
        if delta >= cap:
            break
        delta = min(delta * 2, cap)
        logger.debug("[PLACE] widening gate candidates to delta=%d", delta)
    found = _min_weight_matching(gates, {g: free for g in gates}, weight, key=lambda s: s.key)
    if found is None:
        raise CapacityError("no full gate-to-site matching exists", context={"gates": len(gates)})
    return found


def return_box(
    q: int,
    placement: Mapping[int, TrapRef],
    arch: Architecture,
    config: CompilerConfig,
    homes: Mapping[int, TrapRef],
    related: Optional[Mapping[int, int]] = None,
) -> Tuple[float, float, float, float]:
    """(x0, y0, x1, y1) spanning the home trap, the storage near q and the storage near its next partner."""
    anchors = [homes[q]]
    near = arch.nearest_storage_trap(placement[q].position)
    anchors.append(near)
    anchors.extend(arch.storage_neighbors(near, config.neighbor_hops))
    if related and q in related:
        anchors.append(arch.nearest_storage_trap(placement[related[q]].position))
    xs = [a.x for a in anchors]
    ys = [a.y for a in anchors]
    return (min(xs), min(ys), max(xs), max(ys))


def place_returns(
    qubits: Sequence[int],
    placement: Mapping[int, TrapRef],
    arch: Architecture,
    config: CompilerConfig,
    homes: Mapping[int, TrapRef],
    related: Optional[Mapping[int, int]] = None,
    occupied: Optional[Set[TrapKey]] = None,
) -> Matching:
    """Send qubits leaving the entanglement zone to empty storage traps (min-weight full matching)."""
    qubits = sorted(qubits)
    if not qubits:
        return Matching()
    related = related or {}
    if occupied is None:
        occupied = {trap.key for trap in placement.values() if arch.is_storage(trap)}
    alpha = config.lookahead_weight

    def weight(q: int, trap: TrapRef) -> float:
        value = math.sqrt(distance(trap.position, placement[q].position))
        if q in related:
            value += alpha * math.sqrt(distance(trap.position, placement[related[q]].position))
        return value

    boxes = {q: return_box(q, placement, arch, config, homes, related) for q in qubits}
    full = arch.storage_extent()
    pitch = max(max(s.sep) for z in arch.storage_zones for s in z.slms)
    margin = 0.0
    while True:
        candidates = {}
        for q in qubits:
            x0, y0, x1, y1 = boxes[q]
            box = arch.storage_in_box(x0 - margin, y0 - margin, x1 + margin, y1 + margin)
            candidates[q] = [t for t in box if t.key not in occupied]
        found = _min_weight_matching(qubits, candidates, weight, key=lambda t: (t.row, t.col, t.slm_id))
        if found is not None:
            return found
        covers = all(
            b[0] - margin <= full[0] and b[1] - margin <= full[1] and b[2] + margin >= full[2] and b[3] + margin >= full[3]
            for b in boxes.values()
        )
        if covers:
            raise CapacityError("no empty storage traps left for returning qubits", context={"qubits": len(qubits)})
        margin = pitch if margin == 0 else margin * 2
        logger.debug("[PLACE] widening return candidates by %.1f um", margin)


# -- per-stage planning -----------------------------------------------------


def _site_traps(
    gates: Sequence[Gate], gate_sites: Mapping[Gate, RydbergSite], placement: Placement, arch: Architecture
) -> Dict[int, TrapRef]:
    """Trap of each gate qubit at Rydberg time; qubits already at the site stay put."""
    result: Dict[int, TrapRef] = {}
    for gate in gates:
        site = gate_sites[gate]
        staying = {q: placement[q] for q in gate.qubits if placement[q].key in (site.left.key, site.right.key)}
        movers = sorted((q for q in gate.qubits if q not in staying), key=lambda q: (placement[q].x, q))
        free = [trap for trap in site.traps if trap.key not in {t.key for t in staying.values()}]
        result.update(staying)
        for q, trap in zip(movers, free):
            result[q] = trap
    return result


def _build_plan(
    t: int,
    circuit: StagedCircuit,
    placement: Placement,
    arch: Architecture,
    config: CompilerConfig,
    inherited: Mapping[Gate, RydbergSite],
    pairs: Mapping[Gate, Gate],
    homes: Mapping[int, TrapRef],
) -> StagePlan:
    stage = circuit.rydberg_stage(t)
    free_gates = [g for g in stage.gates if g not in inherited]
    lookahead: Dict[Gate, int] = {}
    for g, h in pairs.items():
        newcomers = [q for q in h.qubits if q not in g.qubits]
        if g not in inherited and newcomers:
            lookahead[g] = newcomers[0]
    placed = place_gates(free_gates, placement, arch, config, reserved=inherited.values(), lookahead=lookahead)
    gate_sites: Dict[Gate, RydbergSite] = dict(inherited)
    gate_sites.update(placed.assignment)
    at_rydberg = placement.updated(_site_traps(stage.gates, gate_sites, placement, arch))

    reuse: Dict[Gate, RydbergSite] = {}
    kept: Set[int] = set()
    for g, h in pairs.items():
        reuse[h] = gate_sites[g]
        kept.update(set(g.qubits) & set(h.qubits))

    next_gates = circuit.rydberg_stage(t + 1).gates if t < circuit.num_rydberg_stages else ()
    partner = {q: h.other(q) for h in next_gates for q in h.qubits}
    leaving = [q for g in stage.gates for q in g.qubits if q not in kept]
    related = {q: partner[q] for q in leaving if q in partner}
    if config.dynamic_placement_enabled:
        returned = place_returns(leaving, at_rydberg, arch, config, homes, related)
    else:
        returned = Matching()
        for q in sorted(leaving):
            returned.assignment[q] = homes[q]
            returned.weights[q] = math.sqrt(distance(homes[q].position, at_rydberg.position(q)))
    after = at_rydberg.updated(returned.assignment)
    return StagePlan(
        t=t,
        gate_sites={g: gate_sites[g] for g in stage.gates},
        reuse=reuse,
        returns=dict(sorted(returned.assignment.items())),
        before=placement,
        at_rydberg=at_rydberg,
        after=after,
        inherited=tuple(g for g in stage.gates if g in inherited),
        kept=tuple(sorted(kept)),
        gate_cost=placed.total,
        return_cost=returned.total,
        reuse_used=bool(pairs),
    )


def stage_variants(
    t: int,
    circuit: StagedCircuit,
    placement: Placement,
    config: CompilerConfig,
    arch: Architecture,
    previous: Optional[StagePlan] = None,
    homes: Optional[Mapping[int, TrapRef]] = None,
) -> List[StagePlan]:
    """Candidate plans for stage t: the reuse plan (when allowed and any gate pairs up) and the no-reuse plan."""
    inherited = dict(previous.reuse) if previous is not None else {}
    homes = dict(homes) if homes is not None else dict(placement)
    stage = circuit.rydberg_stage(t)
    variants = []
    if config.reuse_enabled and t < circuit.num_rydberg_stages:
        pairs = reuse_pairs(stage.gates, circuit.rydberg_stage(t + 1).gates)
        if pairs:
            variants.append(_build_plan(t, circuit, placement, arch, config, inherited, pairs, homes))
    variants.append(_build_plan(t, circuit, placement, arch, config, inherited, {}, homes))
    return variants


def plan_stage(
    t: int,
    circuit: StagedCircuit,
    placement: Placement,
    config: CompilerConfig,
    arch: Architecture,
    previous: Optional[StagePlan] = None,
    homes: Optional[Mapping[int, TrapRef]] = None,
) -> StagePlan:
    """Plan stage t with and without reuse into stage t+1 and commit the cheaper plan.

    The reuse plan pays a lookahead term for the newcomer of every reused gate, so on
    shallow chains and stars it is often dearer than returning both qubits.
    """
    variants = stage_variants(t, circuit, placement, config, arch, previous, homes)
    committed = min(variants, key=lambda plan: (plan.cost, not plan.reuse_used))
    logger.debug(
        "[PLACE] stage %d: %s plan committed (cost %.3f of %s)",
        t,
        "reuse" if committed.reuse_used else "no-reuse",
        committed.cost,
        ", ".join(f"{p.cost:.3f}" for p in variants),
    )
    return committed


def plan_circuit(
    circuit: StagedCircuit, arch: Architecture, config: CompilerConfig, initial: Placement
) -> List[StagePlan]:
    plans: List[StagePlan] = []
    placement = initial
    homes: Dict[int, TrapRef] = dict(initial)
    previous: Optional[StagePlan] = None
    for t in range(1, circuit.num_rydberg_stages + 1):
        plan = plan_stage(t, circuit, placement, config, arch, previous=previous, homes=homes)
        if not plan.at_rydberg.is_injective() or not plan.after.is_injective():
            raise CapacityError(f"stage {t} plan puts two qubits on one trap", context={"stage": t})
        if config.dynamic_placement_enabled:
            homes.update(plan.returns)
        plans.append(plan)
        placement = plan.after
        previous = plan
    reused = sum(len(p.kept) for p in plans)
    logger.info("[PLACE] planned %d stages, %d qubit reuses", len(plans), reused)
    return plans
