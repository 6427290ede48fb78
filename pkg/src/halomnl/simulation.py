"""Synthetic demand generation: schedules, choice streams, segment mixtures.

Randomness contract
-------------------
Every draw comes from numpy's PCG64 ``Generator`` seeded with the entropy
sequence ``[plan.seed, replicate]``, so each replicate owns an independent
substream and parallel or serial replicate runs agree bit for bit.  The
draw order is fixed and documented per operation: one vectorized Poisson
draw of the per-period arrival counts (period order), followed by
vectorized multinomial draws of the choice counts (period order; for
mixtures, one segment-split multinomial first, then one choice multinomial
per segment in ascending segment order).  Aggregated multinomial counts
are distributed exactly as independent per-arrival choices.

The two bundled ground-truth parameter sets are stored as ordinary
parameter files (verbatim 10x10 matrices with an all-zero last row/column
and a zero first/last baseline entry) and verified against a checksum on
load.  The tenth index can be read either as a regular product with all
parameters zero or as a normalized reference product; the files keep the
matrices exactly as printed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .core import AvailabilityMatrix, ParameterSet, TransactionDataset
from .dataio import read_parameter_file
from .probability import choice_probabilities

__all__ = [
    "MixtureSpec",
    "SimulationPlan",
    "make_c1_schedule",
    "make_c2_schedule",
    "c1_schedule_with_periods",
    "simulate_halo",
    "simulate_mmnl",
    "appendix_fixture",
    "APPENDIX_CHECKSUMS",
]


@dataclass(frozen=True)
class MixtureSpec:
    """Finite mixture of choice-model segments: (fraction, params) pairs."""

    segments: tuple

    def __post_init__(self):
        segments = tuple((float(f), p) for f, p in self.segments)
        if not segments:
            raise ValueError("mixture needs at least one segment")
        total = sum(f for f, _ in segments)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"segment fractions must sum to 1, got {total!r}")
        if any(not 0.0 < f <= 1.0 for f, _ in segments):
            raise ValueError("segment fractions must lie in (0, 1]")
        n = segments[0][1].n
        if any(p.n != n for _, p in segments):
            raise ValueError("all segments must share the same item count")
        object.__setattr__(self, "segments", segments)

    @property
    def n(self) -> int:
        return self.segments[0][1].n

    @property
    def fractions(self) -> np.ndarray:
        return np.array([f for f, _ in self.segments])


@dataclass(frozen=True)
class SimulationPlan:
    """Schedule, mean Poisson arrivals per period, seed, and replicate count."""

    schedule: AvailabilityMatrix
    arrival_rate: float
    seed: int
    replicates: int = 1

    def __post_init__(self):
        if self.arrival_rate <= 0:
            raise ValueError("arrival_rate must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")


def make_c1_schedule(n: int, reps_full: int = 2, reps_single: int = 2) -> AvailabilityMatrix:
    """Schedule satisfying C1: full rows, then every leave-one-out row.

    reps_full copies of the all-ones row followed by reps_single copies of
    each single-missing row; total rows reps_full + n * reps_single.
    """
    if n < 1:
        raise ValueError("need at least one item")
    if reps_full < 2 or reps_single < 2:
        raise ValueError("each pattern must appear at least twice")
    rows = [np.ones(n, dtype=np.int8)] * reps_full
    for i in range(n):
        row = np.ones(n, dtype=np.int8)
        row[i] = 0
        rows.extend([row] * reps_single)
    return AvailabilityMatrix(np.stack(rows))


def make_c2_schedule(n: int, reps_full: int = 2, reps_prefix: int = 2) -> AvailabilityMatrix:
    """Schedule satisfying C2: full rows, then nested prefix-missing rows.

    After the all-ones block, for i = 1..n-1 the row missing items 1..i
    appears reps_prefix times (the upper-triangular ones structure).
    """
    if n < 1:
        raise ValueError("need at least one item")
    if reps_full < 2 or reps_prefix < 2:
        raise ValueError("each pattern must appear at least twice")
    rows = [np.ones(n, dtype=np.int8)] * reps_full
    for i in range(1, n):
        row = np.ones(n, dtype=np.int8)
        row[:i] = 0
        rows.extend([row] * reps_prefix)
    return AvailabilityMatrix(np.stack(rows))


def c1_schedule_with_periods(n: int, periods: int) -> AvailabilityMatrix:
    """C1 schedule with a requested total period count.

    Half the periods (rounded through the per-item split) carry the full
    assortment and the rest divide evenly across the n leave-one-out
    patterns; requires periods >= 4n so every pattern appears twice.
    """
    reps_single = periods // (2 * n)
    reps_full = periods - n * reps_single
    if reps_single < 2 or reps_full < 2:
        raise ValueError(f"periods={periods} too small for a C1 schedule on {n} items")
    return make_c1_schedule(n, reps_full, reps_single)


def _period_probabilities(params_by_segment, schedule: AvailabilityMatrix):
    """Per-period outcome probabilities for each segment, via pattern cache."""
    patterns, inverse = np.unique(schedule.q, axis=0, return_inverse=True)
    out = []
    for params in params_by_segment:
        per_pattern = np.stack(
            [choice_probabilities(params, pat).probs for pat in patterns]
        )
        per_pattern = per_pattern / per_pattern.sum(axis=1, keepdims=True)
        out.append(per_pattern[inverse])
    return out


def _rng(plan: SimulationPlan, replicate: int) -> np.random.Generator:
    if not 0 <= replicate < plan.replicates:
        raise ValueError(f"replicate must be within 0..{plan.replicates - 1}")
    return np.random.default_rng([int(plan.seed), int(replicate)])


def simulate_halo(params: ParameterSet, plan: SimulationPlan, replicate: int = 0) -> TransactionDataset:
    """Simulate one replicate of demand under the halo model.

    Each period m draws K ~ Poisson(arrival_rate) arrivals; every arrival
    independently picks an outcome (an offered item or no purchase) with
    the model's choice probabilities for that period's offer set.  Counts
    are accumulated per period, including the no-purchase column.
    Bit-identical output for identical (params, plan, replicate).
    """
    if params.n != plan.schedule.n:
        raise ValueError(
            f"params have {params.n} items, schedule has {plan.schedule.n}"
        )
    rng = _rng(plan, replicate)
    (probs,) = _period_probabilities([params], plan.schedule)
    arrivals = rng.poisson(plan.arrival_rate, plan.schedule.m)
    counts = rng.multinomial(arrivals, probs)
    return TransactionDataset(plan.schedule, counts.astype(np.int64))


def simulate_mmnl(mixture: MixtureSpec, plan: SimulationPlan, replicate: int = 0) -> TransactionDataset:
    """Simulate one replicate of demand from a finite mixture of segments.

    Each arrival first draws its segment by the mixture fractions, then
    chooses with that segment's probabilities.  A single segment with
    fraction 1.0 is distributionally identical to :func:`simulate_halo`
    with the same parameters (the raw random streams differ because of the
    extra segment-split draw).
    """
    if mixture.n != plan.schedule.n:
        raise ValueError(
            f"mixture has {mixture.n} items, schedule has {plan.schedule.n}"
        )
    rng = _rng(plan, replicate)
    segment_probs = _period_probabilities([p for _, p in mixture.segments], plan.schedule)
    arrivals = rng.poisson(plan.arrival_rate, plan.schedule.m)
    split = rng.multinomial(arrivals, np.tile(mixture.fractions, (plan.schedule.m, 1)))
    counts = np.zeros((plan.schedule.m, plan.schedule.n + 1), dtype=np.int64)
    for s, probs in enumerate(segment_probs):
        counts += rng.multinomial(split[:, s], probs)
    return TransactionDataset(plan.schedule, counts)


APPENDIX_CHECKSUMS = {
    "set1": "70398e728ebe7ee1ccee36494d8a20b24f227d310c07e6b639264debe50b86f2",
    "set2": "f707fcd150c79b8c86ccfdf13d2844356a4b7ef7f6094db4dd5fca73428740a7",
}

_APPENDIX_FILES = {
    "set1": "halo_truth_set1.json",
    "set2": "halo_truth_set2.json",
}


def appendix_fixture(which: str) -> ParameterSet:
    """Bundled ground-truth parameters used by the simulation studies.

    ``set1`` drives the estimator-error experiments, ``set2`` the
    halo-generated model-comparison experiments.  The backing file's
    SHA-256 is verified before parsing.
    """
    if which not in _APPENDIX_FILES:
        raise ValueError(f"unknown fixture {which!r}; choose from {sorted(_APPENDIX_FILES)}")
    resource = resources.files("halomnl.data").joinpath(_APPENDIX_FILES[which])
    with resources.as_file(resource) as path:
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        if digest != APPENDIX_CHECKSUMS[which]:
            raise RuntimeError(
                f"fixture {which} is corrupted: sha256 {digest} != {APPENDIX_CHECKSUMS[which]}"
            )
        params, _ = read_parameter_file(path)
    return params
