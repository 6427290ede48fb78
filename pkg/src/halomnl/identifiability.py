"""Offer-set schedule analysis: template patterns, C1/C2 classification, masks.

A schedule fully identifies the model (condition C1) when the full
assortment and every leave-one-out assortment each appear at least twice.
The triangular condition C2 replaces leave-one-out rows with nested
prefix-missing rows and identifies an upper-triangular interaction matrix.
Whatever the classification, the per-parameter mask records which
parameters have any supporting observation at all: mu_p needs a period
offering p, alpha_ip needs a period with i absent and p offered.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import AvailabilityMatrix, ParameterMask

__all__ = [
    "PeriodPartition",
    "IdentifiabilityReport",
    "partition_periods",
    "classify_schedule",
    "identifiable_mask",
    "satisfies_c1",
    "satisfies_c2_triangular",
    "C1",
    "C2_TRIANGULAR",
    "NEITHER",
]

C1 = "C1"
C2_TRIANGULAR = "C2-triangular"
NEITHER = "neither"


@dataclass(frozen=True)
class PeriodPartition:
    """Periods grouped by template pattern; 1-based period numbers.

    ``single_missing[i]`` holds the periods where exactly item i is
    missing; ``prefix_missing[i]`` the periods where exactly items 1..i
    are missing (i >= 2 -- the pattern missing only item 1 is filed under
    ``single_missing[1]``, which takes precedence so that every period
    lands in exactly one group).
    """

    full_periods: tuple[int, ...]
    single_missing: dict[int, tuple[int, ...]]
    prefix_missing: dict[int, tuple[int, ...]]
    other: tuple[int, ...]


@dataclass(frozen=True)
class IdentifiabilityReport:
    classification: str
    partition: PeriodPartition
    mask: ParameterMask
    witness: tuple[str, ...]


def _row_kinds(q: np.ndarray):
    """Classify each row: ('full', 0) | ('single', i) | ('prefix', k) | ('other', 0)."""
    m, n = q.shape
    kinds = []
    for r in range(m):
        row = q[r]
        zeros = int(n - row.sum())
        if zeros == 0:
            kinds.append(("full", 0))
        elif zeros == 1:
            kinds.append(("single", int(np.argmin(row)) + 1))
        elif zeros < n and not row[:zeros].any() and row[zeros:].all():
            kinds.append(("prefix", zeros))
        else:
            kinds.append(("other", 0))
    return kinds


def partition_periods(schedule: AvailabilityMatrix) -> PeriodPartition:
    """Assign every period to exactly one template group by exact pattern match."""
    kinds = _row_kinds(schedule.q)
    full, other = [], []
    single: dict[int, list[int]] = {}
    prefix: dict[int, list[int]] = {}
    for r, (kind, idx) in enumerate(kinds):
        period = r + 1
        if kind == "full":
            full.append(period)
        elif kind == "single":
            single.setdefault(idx, []).append(period)
        elif kind == "prefix":
            prefix.setdefault(idx, []).append(period)
        else:
            other.append(period)
    return PeriodPartition(
        full_periods=tuple(full),
        single_missing={i: tuple(v) for i, v in sorted(single.items())},
        prefix_missing={i: tuple(v) for i, v in sorted(prefix.items())},
        other=tuple(other),
    )


def identifiable_mask(schedule: AvailabilityMatrix) -> ParameterMask:
    """Parameters with at least one supporting observation in the schedule."""
    q = schedule.q
    n = schedule.n
    mu = q.any(axis=0)
    absent = (q == 0).astype(np.int64)
    present = q.astype(np.int64)
    alpha = (absent.T @ present) > 0
    np.fill_diagonal(alpha, False)
    return ParameterMask(mu, alpha)


def _template_counts(schedule: AvailabilityMatrix):
    kinds = _row_kinds(schedule.q)
    n = schedule.n
    n_full = sum(1 for k, _ in kinds if k == "full")
    n_single = {i: 0 for i in range(1, n + 1)}
    n_prefix = {i: 0 for i in range(1, n)}
    n_other = 0
    for kind, idx in kinds:
        if kind == "single":
            n_single[idx] += 1
        elif kind == "prefix":
            n_prefix[idx] += 1
        elif kind == "other":
            n_other += 1
    # the row missing exactly item 1 doubles as the i=1 prefix pattern
    if 1 in n_prefix:
        n_prefix[1] += n_single[1]
    return n_full, n_single, n_prefix, n_other


def satisfies_c1(schedule: AvailabilityMatrix, strict: bool = False) -> bool:
    """Full + every leave-one-out pattern, each at least twice."""
    n_full, n_single, _, n_other = _template_counts(schedule)
    ok = n_full >= 2 and all(c >= 2 for c in n_single.values())
    if strict:
        kinds = _row_kinds(schedule.q)
        ok = ok and all(kind in ("full", "single") for kind, _ in kinds)
    return ok


def satisfies_c2_triangular(schedule: AvailabilityMatrix, strict: bool = False) -> bool:
    """Full + every prefix-missing pattern (items 1..i), each at least twice."""
    n_full, n_single, n_prefix, _ = _template_counts(schedule)
    ok = n_full >= 2 and all(c >= 2 for c in n_prefix.values())
    if strict:
        kinds = _row_kinds(schedule.q)
        ok = ok and all(
            kind == "full" or kind == "prefix" or (kind == "single" and idx == 1)
            for kind, idx in kinds
        )
    return ok


def _witnesses(schedule: AvailabilityMatrix) -> tuple[str, ...]:
    n_full, n_single, n_prefix, n_other = _template_counts(schedule)
    notes = []
    if n_full < 2:
        notes.append(f"full assortment appears {n_full} time(s); both conditions need >= 2")
    for i, c in n_single.items():
        if c < 2:
            notes.append(f"C1: pattern with only item {i} missing appears {c} time(s), need >= 2")
    for i, c in n_prefix.items():
        if c < 2:
            notes.append(f"C2: pattern missing items 1..{i} appears {c} time(s), need >= 2")
    if n_other:
        notes.append(f"{n_other} period(s) match no template pattern")
    patterns, counts = np.unique(schedule.q, axis=0, return_counts=True)
    for pat, c in zip(patterns, counts):
        if c == 1:
            notes.append(
                "offer set " + "".join(str(int(v)) for v in pat) + " appears exactly once"
            )
    return tuple(notes)


def classify_schedule(schedule: AvailabilityMatrix, strict: bool = False) -> IdentifiabilityReport:
    """Classify a schedule against the identifiability conditions.

    Lenient mode (the default) only requires the template patterns to be
    present with multiplicity >= 2; extra rows are allowed and simply do
    not participate in closed-form estimation.  Strict mode additionally
    requires every row to be a template row, the fully unrolled reading of
    the recursive block structure.  C1 wins when both conditions hold.
    The mask and the diagnostic witnesses are computed regardless of the
    classification; patterns seen exactly once are listed as diagnostics.
    """
    if satisfies_c1(schedule, strict):
        label = C1
    elif satisfies_c2_triangular(schedule, strict):
        label = C2_TRIANGULAR
    else:
        label = NEITHER
    return IdentifiabilityReport(
        classification=label,
        partition=partition_periods(schedule),
        mask=identifiable_mask(schedule),
        witness=_witnesses(schedule),
    )
