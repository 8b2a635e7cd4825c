from __future__ import annotations

import logging
import sys
from pathlib import Path
from typing import Optional

FORMAT = "%(message)s"


def configure_logging(log_file: Optional[Path] = None, verbose: bool = False) -> logging.Logger:
    """Send zoneflow logs to stderr and, optionally, append them to `log_file`."""
    root = logging.getLogger("zoneflow")
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    for handler in list(root.handlers):
        root.removeHandler(handler)
        handler.close()
    stream = logging.StreamHandler(sys.stderr)
    stream.setFormatter(logging.Formatter(FORMAT))
    root.addHandler(stream)
    if log_file is not None:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        handler = logging.FileHandler(log_file, mode="a", encoding="utf-8")
        handler.setFormatter(logging.Formatter(FORMAT))
        root.addHandler(handler)
        root.info("[PIPELINE] Log → %s", log_file)
    root.propagate = False
    return root
