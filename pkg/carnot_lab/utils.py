"""Shared utilities for the laboratory.

This module provides common helper functions used across the package:
- Logging and debugging output
- Value formatting for display and for stable serialization
"""
import hashlib
import json
import math
from typing import Any

import numpy as np

from .colors import info

# Global verbosity flags - set by CLI
VERBOSE = False
DEBUG = False

# Significant digits kept when floats are written to report files
FLOAT_DIGITS = 12


def set_verbose(verbose: bool, debug: bool = False) -> None:
    """Set global verbosity flags."""
    global VERBOSE, DEBUG
    VERBOSE = verbose or debug
    DEBUG = debug


def log(msg: str) -> None:
    """Print log message only in verbose mode."""
    if VERBOSE:
        print(msg)


def debug_log(msg: str) -> None:
    """Print debug message only in debug mode."""
    if DEBUG:
        print(info(f"[DEBUG] {msg}"))


def format_value(val: Any) -> str:
    """Format a value for display.

    Handles:
    - None -> "-"
    - float -> 6 significant digits, inf/nan spelled out
    - numpy scalars -> as their Python counterparts
    - sequences -> "(a, b, ...)"
    - any other -> str(val)
    """
    if val is None:
        return "-"
    if isinstance(val, np.generic):
        val = val.item()
    if isinstance(val, bool):
        return str(val).lower()
    if isinstance(val, float):
        if math.isnan(val):
            return "nan"
        if math.isinf(val):
            return "inf" if val > 0 else "-inf"
        return f"{val:.6g}"
    if isinstance(val, (list, tuple, np.ndarray)):
        return "(" + ", ".join(format_value(v) for v in val) + ")"
    return str(val)


def canonical(obj: Any) -> Any:
    """Convert nested data to JSON-ready values with rounded floats.

    Floats are rounded to FLOAT_DIGITS significant digits, so that
    serialized output does not depend on the last bits of a computation.
    """
    if isinstance(obj, np.ndarray):
        return [canonical(v) for v in obj.tolist()]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return str(obj)
        return float(f"{obj:.{FLOAT_DIGITS}g}")
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    return str(obj)


def stable_json_dumps(obj: Any, indent: int = 2) -> str:
    """Serialize with sorted keys and rounded floats."""
    return json.dumps(canonical(obj), sort_keys=True, indent=indent, ensure_ascii=True)


def fingerprint(obj: Any) -> str:
    """SHA-256 of the canonical JSON form of obj."""
    blob = stable_json_dumps(obj, indent=0).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()
