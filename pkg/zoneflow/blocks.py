"""Logical-block mode: compile code blocks as single units on a coarsened architecture.

A block shape (br, bc) groups br x bc physical traps of every SLM into one
coarse trap. Logical qubit q owns physical qubits q*br*bc .. q*br*bc+br*bc-1,
and physical qubit k of a block sits at row offset k // bc, column offset
k % bc inside the block. Transversal gates act on matching k.
"""
from __future__ import annotations

import logging
from typing import Dict, List, Sequence, Tuple

from .arch import Architecture, RydbergSite, TrapRef, parse_architecture
from .circuit import Gate, ParsedCircuit, StagedCircuit
from .errors import ArchitectureError, CompilerBugError
from .placement import Placement, StagePlan

logger = logging.getLogger(__name__)

BlockShape = Tuple[int, int]


def coarsen_architecture(arch: Architecture, shape: BlockShape) -> Architecture:
    rows, cols = shape
    doc = arch.to_dict()
    for zone in doc["zones"]:
        for slm in zone["slms"]:
            if slm["num_row"] < rows or slm["num_col"] < cols:
                raise ArchitectureError(
                    f"SLM {slm['slm_id']} ({slm['num_row']}x{slm['num_col']}) is smaller than a {rows}x{cols} block"
                )
            slm["num_row"] //= rows
            slm["num_col"] //= cols
            slm["sep"] = [slm["sep"][0] * cols, slm["sep"][1] * rows]
    coarse = parse_architecture(doc)
    logger.info("[PLACE] coarsened architecture by %dx%d blocks: %s", rows, cols, coarse.summary())
    return coarse


def block_size(shape: BlockShape) -> int:
    return shape[0] * shape[1]


def expand_circuit(circuit: ParsedCircuit, shape: BlockShape) -> ParsedCircuit:
    """Replace each logical gate by its transversal physical copies, keeping source order."""
    size = block_size(shape)
    gates: List[Gate] = []
    for gate in sorted(circuit.gates, key=lambda g: g.index):
        for k in range(size):
            qubits = tuple(q * size + k for q in gate.qubits)
            gates.append(Gate(gate.kind, qubits, gate.params, len(gates)))
    return ParsedCircuit(circuit.num_qubits * size, gates)


class BlockMapper:
    """Maps coarse traps, sites, placements and plans back onto the physical architecture."""

    def __init__(self, physical: Architecture, shape: BlockShape):
        self.physical = physical
        self.shape = shape
        self.size = block_size(shape)

    def trap(self, coarse: TrapRef, k: int) -> TrapRef:
        rows, cols = self.shape
        return self.physical.trap(coarse.slm_id, coarse.row * rows + k // cols, coarse.col * cols + k % cols)

    def site(self, coarse: RydbergSite, k: int) -> RydbergSite:
        found = self.physical.site_of(self.trap(coarse.left, k))
        if found is None or found[1] != 0:
            raise CompilerBugError(f"coarse site {coarse.key} does not map onto physical sites")
        return found[0]

    def placement(self, coarse: Placement) -> Placement:
        return Placement(
            {q * self.size + k: self.trap(trap, k) for q, trap in coarse.items() for k in range(self.size)}
        )

    def plans(
        self, plans: Sequence[StagePlan], logical: StagedCircuit, physical: StagedCircuit
    ) -> List[StagePlan]:
        by_index: Dict[int, Gate] = {g.index: g for g in physical.gates()}
        out = []
        for plan in plans:

            def gates_of(logical_gate: Gate) -> List[Gate]:
                return [by_index[logical_gate.index * self.size + k] for k in range(self.size)]

            gate_sites = {}
            for gate, site in plan.gate_sites.items():
                for k, phys in enumerate(gates_of(gate)):
                    gate_sites[phys] = self.site(site, k)
            reuse = {}
            for gate, site in plan.reuse.items():
                for k, phys in enumerate(gates_of(gate)):
                    reuse[phys] = self.site(site, k)
            out.append(
                StagePlan(
                    t=plan.t,
                    gate_sites=gate_sites,
                    reuse=reuse,
                    returns={
                        q * self.size + k: self.trap(trap, k) for q, trap in plan.returns.items() for k in range(self.size)
                    },
                    before=self.placement(plan.before),
                    at_rydberg=self.placement(plan.at_rydberg),
                    after=self.placement(plan.after),
                    inherited=tuple(p for g in plan.inherited for p in gates_of(g)),
                    kept=tuple(sorted(q * self.size + k for q in plan.kept for k in range(self.size))),
                    gate_cost=plan.gate_cost,
                    return_cost=plan.return_cost,
                    reuse_used=plan.reuse_used,
                )
            )
        return out
