"""Serialisation of fields, plans, measures and reports.

Binary field layout (little-endian):

    uint32          ndim
    uint64[ndim]    shape
    float64[ndim]   lo
    float64[ndim]   hi
    float64[...]    values, row-major
"""
import csv
import json
import struct
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from .errors import InvalidInputError
from .transport import TransportPlan
from .types import PointCloudMeasure, ScalarField
from .utils import canonical, stable_json_dumps

REPORT_COLUMNS = ("name", "anchor", "case", "lhs", "rhs", "slack", "tol", "verdict",
                  "window", "t", "s", "h", "extra")


def write_field_binary(field: ScalarField, path: str) -> None:
    chart = field.chart
    ndim = len(chart.shape)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<I", ndim))
        fh.write(struct.pack(f"<{ndim}Q", *chart.shape))
        fh.write(struct.pack(f"<{ndim}d", *chart.lo))
        fh.write(struct.pack(f"<{ndim}d", *chart.hi))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_field_binary(path: str) -> Tuple[Tuple[int, ...], Tuple[float, ...],
                                          Tuple[float, ...], np.ndarray]:
    """Returns (shape, lo, hi, values) of a binary field snapshot."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4:
        raise InvalidInputError(f"{path}: truncated field header")
    ndim = struct.unpack("<I", data[0:4])[0]
    off = 4
    shape = struct.unpack(f"<{ndim}Q", data[off:off + 8 * ndim])
    off += 8 * ndim
    lo = struct.unpack(f"<{ndim}d", data[off:off + 8 * ndim])
    off += 8 * ndim
    hi = struct.unpack(f"<{ndim}d", data[off:off + 8 * ndim])
    off += 8 * ndim
    count = int(np.prod(shape))
    if len(data) - off != 8 * count:
        raise InvalidInputError(f"{path}: expected {count} values")
    values = np.frombuffer(data, dtype="<f8", offset=off).reshape(shape).copy()
    return tuple(int(s) for s in shape), lo, hi, values


def write_field_csv(field: ScalarField, path: str) -> None:
    """One row per node: coordinates followed by the value."""
    dims = field.chart.model.dimension
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i}" for i in range(dims)] + ["value"])
        for p, v in zip(field.chart.points(), field.flat):
            writer.writerow([repr(float(c)) for c in p] + [repr(float(v))])


def write_plan_csv(plan: TransportPlan, path: str, threshold: float = 0.0) -> None:
    """Coupling as (i, j, mass) triplets."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "mass"])
        for i, j in zip(*np.nonzero(plan.coupling > threshold)):
            writer.writerow([int(i), int(j), repr(float(plan.coupling[i, j]))])


def write_measure_csv(mu: PointCloudMeasure, path: str) -> None:
    dims = mu.model.dimension
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i}" for i in range(dims)] + ["weight"])
        for p, w in zip(mu.points, mu.weights):
            writer.writerow([repr(float(c)) for c in p] + [repr(float(w))])


def write_reports_json(rows: Sequence[dict], path: str) -> None:
    with open(path, "w") as fh:
        fh.write(stable_json_dumps(list(rows)))
        fh.write("\n")


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return json.dumps(canonical(value))
    if isinstance(value, (dict, list, tuple)):
        return json.dumps(canonical(value), sort_keys=True, separators=(",", ":"))
    return str(value)


def write_reports_csv(rows: Iterable[dict], path: str) -> None:
    """Flat report table with the fixed REPORT_COLUMNS."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for row in rows:
            writer.writerow([_cell(row.get(col)) for col in REPORT_COLUMNS])


def write_table_csv(header: Sequence[str], rows: Iterable[Sequence], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def read_csv_rows(path: str) -> List[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
