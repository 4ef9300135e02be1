"""Process-wide stores shared by the certifiers.

- OperatorCache: assembled HeatOperators keyed by chart
- ResultStore: values computed once per scenario and reused by several
  certifiers (the c-hat table, heated Wasserstein distances)
- Diagnostics: event counters such as closed-form fallbacks

Each store is a module-level singleton with get_/reset_ accessors.
"""
import threading
from typing import Any, Callable, Dict, Hashable, Optional, TYPE_CHECKING

if TYPE_CHECKING:
    from .heat_engine import HeatOperator
    from .types import GridChart


class OperatorCache:
    """Assembled heat operators, one per chart."""

    def __init__(self):
        self._ops: Dict["GridChart", "HeatOperator"] = {}
        self._lock = threading.Lock()

    def get(self, chart: "GridChart") -> "HeatOperator":
        """Return the operator for chart, assembling it on first use."""
        # Import here to avoid circular imports
        from .heat_engine import HeatOperator
        with self._lock:
            op = self._ops.get(chart)
            if op is None:
                op = HeatOperator.assemble(chart)
                self._ops[chart] = op
            return op

    def __len__(self) -> int:
        return len(self._ops)


class ResultStore:
    """Memo table for values shared across certifiers of one scenario."""

    def __init__(self):
        self._values: Dict[Hashable, Any] = {}
        self._locks: Dict[Hashable, threading.Lock] = {}
        self._guard = threading.Lock()

    def get(self, key: Hashable, default: Any = None) -> Any:
        return self._values.get(key, default)

    def put(self, key: Hashable, value: Any) -> None:
        self._values[key] = value

    def get_or_compute(self, key: Hashable, compute: Callable[[], Any]) -> Any:
        """Compute a value at most once per key, even under concurrent callers."""
        with self._guard:
            lock = self._locks.setdefault(key, threading.Lock())
        with lock:
            if key not in self._values:
                self._values[key] = compute()
            return self._values[key]

    def __contains__(self, key: Hashable) -> bool:
        return key in self._values


class Diagnostics:
    """Thread-safe event counters."""

    def __init__(self):
        self._counts: Dict[str, int] = {}
        self._lock = threading.Lock()

    def record(self, name: str, count: int = 1) -> None:
        with self._lock:
            self._counts[name] = self._counts.get(name, 0) + int(count)

    def count(self, name: str) -> int:
        return self._counts.get(name, 0)

    def snapshot(self) -> Dict[str, int]:
        with self._lock:
            return dict(sorted(self._counts.items()))


# Global singleton instances
_operator_cache: Optional[OperatorCache] = None
_result_store: Optional[ResultStore] = None
_diagnostics: Optional[Diagnostics] = None
_init_lock = threading.Lock()


def get_operator_cache() -> OperatorCache:
    """Get the global operator cache singleton."""
    global _operator_cache
    with _init_lock:
        if _operator_cache is None:
            _operator_cache = OperatorCache()
        return _operator_cache


def reset_operator_cache() -> None:
    """Reset the global operator cache (for testing)."""
    global _operator_cache
    _operator_cache = OperatorCache()


def get_result_store() -> ResultStore:
    """Get the global result store singleton."""
    global _result_store
    with _init_lock:
        if _result_store is None:
            _result_store = ResultStore()
        return _result_store


def reset_result_store() -> None:
    """Reset the global result store (for testing)."""
    global _result_store
    _result_store = ResultStore()


def get_diagnostics() -> Diagnostics:
    """Get the global diagnostics singleton."""
    global _diagnostics
    with _init_lock:
        if _diagnostics is None:
            _diagnostics = Diagnostics()
        return _diagnostics


def reset_diagnostics() -> None:
    """Reset the global diagnostics counters (for testing)."""
    global _diagnostics
    _diagnostics = Diagnostics()


def get_heat_operator(chart: "GridChart") -> "HeatOperator":
    """Shortcut for get_operator_cache().get(chart)."""
    return get_operator_cache().get(chart)
