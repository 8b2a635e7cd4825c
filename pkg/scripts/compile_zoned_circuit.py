#!/usr/bin/env python3
"""Compile a {CZ, U3} circuit onto a zoned neutral-atom architecture and emit ZAIR plus a fidelity report."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from zoneflow.config import PRESETS, RunConfig, parse_block_shape
from zoneflow.errors import ZoneflowError
from zoneflow.logs import configure_logging
from zoneflow.pipeline import run_compile

logger = logging.getLogger("zoneflow.cli")


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description="Compile a circuit for a zoned neutral-atom architecture.")
    parser.add_argument("--arch", default="architectures/reference.json", help="Architecture JSON file.")
    parser.add_argument("--circuit", required=True, help="Circuit file (OpenQASM 2 subset or json-gates).")
    parser.add_argument("--format", choices=["qasm2-subset", "json-gates"], help="Circuit format (default: by suffix).")
    parser.add_argument("--out-zair", help="Where to write the ZAIR program (.zair.json).")
    parser.add_argument("--out-report", help="Where to write the JSON report.")
    parser.add_argument("--hw-params", help="JSON object overriding hardware constants.")
    parser.add_argument("--log-file", help="Also append logs to this file.")
    parser.add_argument("--verbose", action="store_true", help="Log per-stage placement and routing detail.")

    # Placement
    parser.add_argument("--preset", choices=sorted(PRESETS), help="Set SA/dynamic/reuse flags together.")
    parser.add_argument("--seed", type=int, default=0, help="Simulated annealing seed.")
    parser.add_argument("--sa-iters", type=int, default=1000, help="Simulated annealing iteration limit.")
    parser.add_argument("--no-sa", action="store_true", help="Keep the trivial initial placement.")
    parser.add_argument("--no-reuse", action="store_true", help="Always return qubits to storage between stages.")
    parser.add_argument("--static-placement", action="store_true", help="Return qubits to their initial traps.")
    parser.add_argument("--k", type=int, default=1, help="Storage-neighbour hops in return candidates.")
    parser.add_argument("--delta", type=int, default=2, help="Initial Chebyshev radius of gate candidates.")
    parser.add_argument("--alpha", type=float, default=0.1, help="Weight of the related-qubit term in returns.")

    # Architecture overrides
    parser.add_argument("--aods", type=int, help="Use N identical copies of the first AOD.")
    parser.add_argument("--blocks", help="Logical-block mode with RxC blocks, e.g. 2x4.")
    return parser.parse_args()


def main() -> None:
    args = parse_args()
    configure_logging(Path(args.log_file) if args.log_file else None, args.verbose)
    try:
        cfg = RunConfig()
        cfg.arch = Path(args.arch)
        cfg.circuit = Path(args.circuit)
        cfg.circuit_format = args.format
        cfg.hw_params = Path(args.hw_params) if args.hw_params else None
        cfg.num_aods = args.aods
        cfg.blocks = parse_block_shape(args.blocks) if args.blocks else None
        if args.out_zair:
            cfg.outputs.zair = Path(args.out_zair)
        if args.out_report:
            cfg.outputs.report = Path(args.out_report)

        if args.preset:
            cfg.compiler.apply_preset(args.preset)
        cfg.compiler.sa_seed = args.seed
        cfg.compiler.sa_iteration_limit = args.sa_iters
        cfg.compiler.neighbor_hops = args.k
        cfg.compiler.delta = args.delta
        cfg.compiler.lookahead_weight = args.alpha
        if args.no_sa:
            cfg.compiler.sa_enabled = False
        if args.no_reuse:
            cfg.compiler.reuse_enabled = False
        if args.static_placement:
            cfg.compiler.dynamic_placement_enabled = False

        state = run_compile(cfg)
    except ZoneflowError as exc:
        logger.error("[ERR] %s", exc.describe())
        raise SystemExit(exc.exit_code) from None

    print(json.dumps(state.as_dict()["fidelity"], ensure_ascii=False, indent=2))


if __name__ == "__main__":
    main()
