#!/usr/bin/env python3
"""
Report persistence: canonical JSON, provenance tags, atomic writes, the
run status file and CSV tables.

Canonical JSON sorts keys and renders every float as a 12-significant-digit
string, so identical runs produce identical bytes.
"""
import json
import math
import os
import platform
import tempfile
import time
from datetime import datetime
from pathlib import Path

import numpy as np
import pandas as pd

from schemas import ProvenancedValue

FLOAT_FORMAT = ".12g"


def format_float(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, FLOAT_FORMAT)


def canonical(obj):
    """Recursively convert to JSON-ready values with floats as canonical strings."""
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [canonical(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return format_float(float(obj))
    if hasattr(obj, "model_dump"):
        return canonical(obj.model_dump())
    return obj


def dumps_canonical(obj) -> str:
    return json.dumps(canonical(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def tag(value: float, provenance: str = "exact") -> dict:
    """{"value", "provenance"} object for a reported constant."""
    return ProvenancedValue(value=format_float(float(value)), provenance=provenance).model_dump()


# =============================================================================
# ATOMIC WRITES
# =============================================================================

def safe_replace(src, dst, retries=3, delay=0.1):
    """Cross-platform atomic file replace with Windows retry logic."""
    for attempt in range(retries):
        try:
            os.replace(src, dst)
            return
        except PermissionError:
            if platform.system() == 'Windows' and attempt < retries - 1:
                time.sleep(delay)
            else:
                raise


def write_atomic(path: str | Path, text: str) -> None:
    """Write text to a temp file next to `path`, then rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=path.parent, suffix='.tmp')
    try:
        with os.fdopen(fd, 'w', encoding='utf-8') as f:
            f.write(text)
        safe_replace(tmp_path, path)
    except Exception:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def write_json(path: str | Path, obj) -> None:
    write_atomic(path, dumps_canonical(obj))


def write_plain_json(path: str | Path, obj) -> None:
    """Exact-float JSON (space, function and forest documents)."""
    write_atomic(path, json.dumps(obj, indent=2, ensure_ascii=False) + "\n")


def update_status(status_file: str | Path, message: str, progress_pct: float,
                  current: int, total: int,
                  elapsed_sec: float, eta_sec: float | None,
                  complete: bool = False, error: bool = False):
    """Atomically update the run status file."""
    status = {
        "message": message,
        "progress": progress_pct,
        "current": current,
        "total": total,
        "elapsed_seconds": elapsed_sec,
        "eta_seconds": eta_sec,
        "complete": complete,
        "error": error,
        "timestamp": datetime.now().isoformat(),
        "pid": os.getpid()
    }
    write_atomic(status_file, json.dumps(status))


# =============================================================================
# CSV TABLES
# =============================================================================

def write_csv(path: str | Path, records: list[dict]) -> None:
    """One row per record, floats as %.12g."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame.from_records(records).to_csv(path, index=False, float_format="%.12g")
