#!/usr/bin/env python3
"""Compile one circuit across several architecture files and AOD counts; write a JSON comparison table."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from zoneflow.config import PRESETS, RunConfig
from zoneflow.errors import ZoneflowError
from zoneflow.logs import configure_logging
from zoneflow.pipeline import run_compile

logger = logging.getLogger("zoneflow.sweep")


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description="Sweep zoned layouts and AOD counts for one circuit.")
    parser.add_argument("--circuit", required=True, help="Circuit file (OpenQASM 2 subset or json-gates).")
    parser.add_argument(
        "--arch",
        nargs="+",
        default=["architectures/reference.json", "architectures/two_zone.json"],
        help="Architecture JSON files to compare.",
    )
    parser.add_argument("--aods", nargs="+", type=int, default=[1], help="AOD counts to try on every layout.")
    parser.add_argument("--preset", choices=sorted(PRESETS), default="full")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", help="Write the table here instead of stdout.")
    parser.add_argument("--log-file", help="Also append logs to this file.")
    return parser.parse_args()


def run_one(circuit: Path, arch: Path, aods: int, preset: str, seed: int) -> Dict[str, Any]:
    cfg = RunConfig()
    cfg.arch = arch
    cfg.circuit = circuit
    cfg.num_aods = aods
    cfg.compiler.apply_preset(preset)
    cfg.compiler.sa_seed = seed
    row: Dict[str, Any] = {"architecture": arch.name, "aods": aods}
    try:
        state = run_compile(cfg)
    except ZoneflowError as exc:
        logger.error("[ERR] %s on %s with %d AOD(s)", exc.describe(), arch.name, aods)
        row["error"] = exc.describe()
        return row
    report = state.report
    row.update(
        {
            "fidelity": report.fidelity,
            "duration_us": report.duration,
            "n_tran": report.n_tran,
            "n_exc": report.n_exc,
            "jobs": sum(len(s.inbound) + len(s.outbound) for s in state.jobs),
            "bounds": dict(report.bounds),
        }
    )
    return row


def main() -> None:
    args = parse_args()
    configure_logging(Path(args.log_file) if args.log_file else None)
    circuit = Path(args.circuit)
    table: List[Dict[str, Any]] = []
    for arch in args.arch:
        for aods in args.aods:
            table.append(run_one(circuit, Path(arch), aods, args.preset, args.seed))
    text = json.dumps({"circuit": circuit.name, "preset": args.preset, "runs": table}, indent=2)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n", encoding="utf-8")
        logger.info("[PIPELINE] Sweep table written to %s", out)
    else:
        print(text)


if __name__ == "__main__":
    main()
