"""File formats: schedules, transactions, parameter files, checksums.

Three ingestion shapes are supported:

* schedule CSV -- header ``period_id,a1,...,aN``, one binary row per period;
* transactions CSV -- header ``period_id,item_id,count`` with item_id 0
  meaning no purchase; period ids must match the schedule file;
* single-file transactions CSV -- header
  ``period_id,offered_items,chosen_item``, one row per transaction with
  ``offered_items`` a semicolon-separated list of item ids; offer sets are
  inferred per period and the rows are aggregated into per-period counts.

Parameter files are JSON documents with fields ``n``, ``mu``, ``alpha``
and an optional ``mask``; reals are written with 17 significant digits so
a write/read round trip reproduces every float bit for bit.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .core import AvailabilityMatrix, ParameterMask, ParameterSet, TransactionDataset

__all__ = [
    "DataFormatError",
    "read_schedule_csv",
    "write_schedule_csv",
    "read_transactions_csv",
    "write_transactions_csv",
    "read_transactions_single_file",
    "load_dataset",
    "read_parameter_file",
    "write_parameter_file",
    "sha256_file",
]


class DataFormatError(ValueError):
    """A malformed input file, located by path and 1-based line number."""

    def __init__(self, path, line: int | None, message: str):
        self.path = str(path)
        self.line = line
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


# ---------------------------------------------------------------------------
# schedules
# ---------------------------------------------------------------------------


def read_schedule_csv(path):
    """Read a schedule CSV; returns (AvailabilityMatrix, period ids in file order)."""
    rows = []
    ids = []
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if not header or header[0].strip() != "period_id":
            raise DataFormatError(path, 1, "expected header period_id,a1,...,aN")
        n = len(header) - 1
        if n < 1:
            raise DataFormatError(path, 1, "schedule must have at least one item column")
        for lineno, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != n + 1:
                raise DataFormatError(
                    path, lineno, f"expected {n + 1} fields, found {len(record)}"
                )
            try:
                pid = int(record[0])
                vals = [int(v) for v in record[1:]]
            except ValueError:
                raise DataFormatError(path, lineno, "fields must be integers") from None
            if any(v not in (0, 1) for v in vals):
                raise DataFormatError(path, lineno, "availability entries must be 0 or 1")
            if pid in set(ids):
                raise DataFormatError(path, lineno, f"duplicate period_id {pid}")
            ids.append(pid)
            rows.append(vals)
    if not rows:
        raise DataFormatError(path, None, "schedule has no periods")
    return AvailabilityMatrix(np.array(rows, dtype=np.int8)), tuple(ids)


def write_schedule_csv(path, availability: AvailabilityMatrix, period_ids=None):
    ids = period_ids if period_ids is not None else range(1, availability.m + 1)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["period_id"] + [f"a{j}" for j in range(1, availability.n + 1)])
        for pid, row in zip(ids, availability.q):
            writer.writerow([pid] + [int(v) for v in row])


# ---------------------------------------------------------------------------
# transactions
# ---------------------------------------------------------------------------


def read_transactions_csv(path, availability: AvailabilityMatrix, period_ids) -> TransactionDataset:
    """Read aggregated counts against a known schedule.

    Rows carrying the same (period_id, item_id) are summed, so per-event
    exports (count 1 per row) aggregate on load.
    """
    index = {pid: i for i, pid in enumerate(period_ids)}
    counts = np.zeros((availability.m, availability.n + 1), dtype=np.int64)
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if not header or [h.strip() for h in header[:3]] != ["period_id", "item_id", "count"]:
            raise DataFormatError(path, 1, "expected header period_id,item_id,count")
        for lineno, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != 3:
                raise DataFormatError(path, lineno, f"expected 3 fields, found {len(record)}")
            try:
                pid, item, count = (int(v) for v in record)
            except ValueError:
                raise DataFormatError(path, lineno, "fields must be integers") from None
            if pid not in index:
                raise DataFormatError(path, lineno, f"period_id {pid} not in the schedule")
            if not 0 <= item <= availability.n:
                raise DataFormatError(
                    path, lineno, f"item_id must be 0..{availability.n}, got {item}"
                )
            if count < 0:
                raise DataFormatError(path, lineno, "count must be nonnegative")
            counts[index[pid], item] += count
    return TransactionDataset(availability, counts)


def write_transactions_csv(path, ds: TransactionDataset, period_ids=None):
    """Write nonzero count cells as period_id,item_id,count rows."""
    ids = list(period_ids) if period_ids is not None else list(range(1, ds.m + 1))
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["period_id", "item_id", "count"])
        for row, pid in enumerate(ids):
            for item in range(ds.n + 1):
                value = int(ds.counts[row, item])
                if value:
                    writer.writerow([pid, item, value])


def read_transactions_single_file(path):
    """Read per-transaction rows, inferring offer sets per period.

    Returns (TransactionDataset, period ids).  The item count is inferred
    as the largest item id mentioned in any offer set.  Every row of a
    period must list the same offer set, and the chosen item must be
    offered (or 0 for no purchase).
    """
    period_offers: dict[int, frozenset[int]] = {}
    period_order: list[int] = []
    chosen_rows: list[tuple[int, int, int]] = []
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        expected = ["period_id", "offered_items", "chosen_item"]
        if not header or [h.strip() for h in header[:3]] != expected:
            raise DataFormatError(path, 1, "expected header period_id,offered_items,chosen_item")
        for lineno, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != 3:
                raise DataFormatError(path, lineno, f"expected 3 fields, found {len(record)}")
            try:
                pid = int(record[0])
                offered = frozenset(
                    int(tok) for tok in record[1].split(";") if tok.strip() != ""
                )
                chosen = int(record[2])
            except ValueError:
                raise DataFormatError(
                    path, lineno, "period, offer list, and choice must be integers"
                ) from None
            if any(item < 1 for item in offered):
                raise DataFormatError(path, lineno, "offered item ids must be >= 1")
            if pid in period_offers:
                if period_offers[pid] != offered:
                    raise DataFormatError(
                        path, lineno, f"period {pid} listed with two different offer sets"
                    )
            else:
                period_offers[pid] = offered
                period_order.append(pid)
            if chosen != 0 and chosen not in offered:
                raise DataFormatError(
                    path, lineno, f"chosen item {chosen} is not in the offer set"
                )
            chosen_rows.append((pid, chosen, lineno))
    if not period_order:
        raise DataFormatError(path, None, "no transactions found")
    n = max((max(s) for s in period_offers.values() if s), default=0)
    if n == 0:
        raise DataFormatError(path, None, "every offer set is empty; no items to model")
    q = np.zeros((len(period_order), n), dtype=np.int8)
    index = {pid: i for i, pid in enumerate(period_order)}
    for pid, offered in period_offers.items():
        for item in offered:
            q[index[pid], item - 1] = 1
    counts = np.zeros((len(period_order), n + 1), dtype=np.int64)
    for pid, chosen, _ in chosen_rows:
        counts[index[pid], chosen] += 1
    return TransactionDataset(AvailabilityMatrix(q), counts), tuple(period_order)


def load_dataset(transactions_path, schedule_path):
    """Convenience loader: schedule CSV plus matching transactions CSV."""
    availability, period_ids = read_schedule_csv(schedule_path)
    ds = read_transactions_csv(transactions_path, availability, period_ids)
    return ds, period_ids


# ---------------------------------------------------------------------------
# parameter files
# ---------------------------------------------------------------------------


def _fmt17(value: float) -> str:
    """Decimal text with 17 significant digits; round-trips float64 exactly."""
    return format(float(value), ".17g")


def _float_list(values) -> str:
    return "[" + ", ".join(_fmt17(v) for v in values) + "]"


def _bool_list(values) -> str:
    return "[" + ", ".join("true" if v else "false" for v in values) + "]"


def write_parameter_file(path, params: ParameterSet, mask: ParameterMask | None = None):
    lines = ["{", f'  "n": {params.n},']
    lines.append(f'  "mu": {_float_list(params.mu)},')
    alpha_rows = ",\n".join("    " + _float_list(row) for row in params.alpha)
    closing = "  ]," if mask is not None else "  ]"
    lines.append('  "alpha": [\n' + alpha_rows + "\n" + closing)
    if mask is not None:
        lines.append('  "mask": {')
        lines.append(f'    "mu": {_bool_list(mask.mu)},')
        mask_rows = ",\n".join("      " + _bool_list(row) for row in mask.alpha)
        lines.append('    "alpha": [\n' + mask_rows + "\n    ]")
        lines.append("  }")
    lines.append("}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_parameter_file(path):
    """Read a parameter file; returns (ParameterSet, ParameterMask or None)."""
    try:
        document = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(path, exc.lineno, f"invalid JSON: {exc.msg}") from None
    try:
        n = int(document["n"])
        mu = np.asarray(document["mu"], dtype=np.float64)
        alpha = np.asarray(document["alpha"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(path, None, f"bad parameter document: {exc}") from None
    if mu.shape != (n,) or alpha.shape != (n, n):
        raise DataFormatError(path, None, "mu/alpha shapes do not match n")
    params = ParameterSet(mu, alpha)
    mask = None
    if "mask" in document and document["mask"] is not None:
        try:
            mask = ParameterMask(
                np.asarray(document["mask"]["mu"], dtype=bool),
                np.asarray(document["mask"]["alpha"], dtype=bool),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataFormatError(path, None, f"bad mask block: {exc}") from None
    return params, mask
