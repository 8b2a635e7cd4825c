#!/usr/bin/env python3
"""Replay a ZAIR program against an architecture and print the violation list as JSON."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from zoneflow.arch import load_architecture
from zoneflow.errors import ZoneflowError
from zoneflow.hardware import HardwareParams
from zoneflow.zair import parse_zair, validate_replay


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description="Validate a ZAIR program by replaying it on an architecture.")
    parser.add_argument("--arch", required=True, help="Architecture JSON file.")
    parser.add_argument("--program", required=True, help="ZAIR program (.zair.json).")
    parser.add_argument("--hw-params", help="JSON object overriding hardware constants (for timing checks).")
    return parser.parse_args()


def main() -> None:
    args = parse_args()
    program_path = Path(args.program)
    if not program_path.exists():
        print(f"[ERR] Missing program file: {program_path}", file=sys.stderr)
        raise SystemExit(2)
    try:
        arch = load_architecture(args.arch)
        hw = HardwareParams.load(Path(args.hw_params) if args.hw_params else None)
        program = parse_zair(program_path.read_text(encoding="utf-8"))
    except ZoneflowError as exc:
        print(f"[ERR] {exc.describe()}", file=sys.stderr)
        raise SystemExit(exc.exit_code) from None
    except ValueError as exc:
        print(f"[ERR] zair: {exc}", file=sys.stderr)
        raise SystemExit(2) from None

    counters = validate_replay(program, arch, hw)
    print(json.dumps([v.as_dict() for v in counters.violations], indent=2))
    if counters.violations:
        raise SystemExit(4)


if __name__ == "__main__":
    main()
