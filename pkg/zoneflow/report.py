from __future__ import annotations

import json
from dataclasses import asdict
from typing import TYPE_CHECKING, Any, Dict, List, Mapping

if TYPE_CHECKING:
    from .config import RunConfig
    from .state import CompileState


def _timeline(state: "CompileState") -> List[Dict[str, Any]]:
    rows = []
    for item in state.schedule.items if state.schedule else []:
        inst = item.inst
        rows.append(
            {
                "index": inst.index,
                "kind": inst.kind,
                "stage": inst.stage,
                "phase": inst.phase,
                "start_us": item.start,
                "end_us": item.end,
                "aod_id": item.aod_id,
                "qubits": list(inst.qubits),
            }
        )
    return rows


def _stages(state: "CompileState") -> List[Dict[str, Any]]:
    jobs = {stage.t: stage.summary() for stage in state.jobs}
    merged = []
    for plan in state.plans:
        row = plan.summary()
        row.update({k: v for k, v in jobs.get(plan.t, {}).items() if k != "t"})
        merged.append(row)
    return merged


def build_report(state: "CompileState", config: "RunConfig") -> Dict[str, Any]:
    """JSON-ready report; holds no paths or clock readings so reruns compare byte for byte."""
    fidelity = state.report.as_dict() if state.report else {"fidelity": 1.0}
    return {
        "circuit": config.circuit.name if config.circuit else None,
        "architecture": config.arch.name,
        "architecture_summary": state.arch.summary() if state.arch else None,
        "blocks": list(config.blocks) if config.blocks else None,
        "compiler": asdict(config.compiler),
        "variant": state.stats.get("variant"),
        "variants": list(state.stats.get("variants", [])),
        "hardware": state.hw.as_dict(),
        "qubits": state.circuit.num_qubits if state.circuit else 0,
        "rydberg_stages": state.circuit.num_rydberg_stages if state.circuit else 0,
        "fidelity": fidelity,
        "replay": state.counters.as_dict() if state.counters else None,
        "stages": _stages(state),
        "instructions": dict(state.stats.get("instructions", {})),
        "warnings": list(state.stats.get("architecture_warnings", [])),
        "timeline": _timeline(state),
    }


def emit_report(report: Mapping[str, Any]) -> str:
    return json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def parse_report(text: str) -> Dict[str, Any]:
    doc = json.loads(text)
    if not isinstance(doc, dict) or "fidelity" not in doc:
        raise ValueError("not a zoneflow report")
    return doc
