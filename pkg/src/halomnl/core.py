"""Core domain types for the halo-effect MNL choice model.

All types are immutable after construction (frozen dataclasses holding
read-only numpy arrays), so they can be shared freely across threads.

Indexing convention
-------------------
Items are numbered 1..n in every interface: scalar item arguments, error
coordinates, and file formats.  Index 0 is reserved for the no-purchase
option, so count and probability vectors have length n+1 with column 0
holding the no-purchase cell and column j holding item j.  The ``mu`` and
``alpha`` parameter arrays are plain 0-based numpy arrays: ``mu[j-1]`` is
the baseline preference of item j and ``alpha[i-1, j-1]`` is the effect of
item i's absence on item j.  Periods are numbered 1..m in reports and
error coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ParameterSet",
    "AvailabilityMatrix",
    "TransactionDataset",
    "ChoiceDistribution",
    "ParameterMask",
    "FitResult",
    "Violation",
    "ValidationResult",
    "InvalidDatasetError",
    "validate_dataset",
]


class InvalidDatasetError(ValueError):
    """Raised when an operation requires a dataset with no invariant violations."""

    def __init__(self, violations):
        self.violations = tuple(violations)
        first = self.violations[0]
        super().__init__(
            f"dataset has {len(self.violations)} invariant violation(s); "
            f"first: {first.message}"
        )


def _frozen_array(value, dtype) -> np.ndarray:
    """Copy to a contiguous read-only array (never aliases the input)."""
    arr = np.array(value, dtype=dtype, order="C", copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ParameterSet:
    """Model parameters: baseline preferences and absence-interaction matrix.

    Attributes
    ----------
    mu : ndarray, shape (n,)
        Baseline log-utility of each item when everything is offered.
    alpha : ndarray, shape (n, n)
        ``alpha[i-1, j-1]`` is the shift in item j's log-utility caused by
        item i being absent from the offer set.  The diagonal is zero by
        definition (an item cannot be absent while it is being chosen).

    The no-purchase option always has utility 0 (weight 1); it is never a
    parameter.
    """

    mu: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        mu = _frozen_array(self.mu, np.float64)
        alpha = _frozen_array(self.alpha, np.float64)
        if mu.ndim != 1:
            raise ValueError("mu must be a 1-D vector")
        n = mu.shape[0]
        if n < 1:
            raise ValueError("need at least one item")
        if alpha.shape != (n, n):
            raise ValueError(f"alpha must be {n}x{n}, got {alpha.shape}")
        if not np.isfinite(mu).all() or not np.isfinite(alpha).all():
            raise ValueError("all parameters must be finite")
        if np.any(np.diagonal(alpha) != 0.0):
            raise ValueError("alpha must have an exactly zero diagonal")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "alpha", alpha)

    @property
    def n(self) -> int:
        return self.mu.shape[0]

    @classmethod
    def zeros(cls, n: int) -> "ParameterSet":
        return cls(np.zeros(n), np.zeros((n, n)))


@dataclass(frozen=True)
class AvailabilityMatrix:
    """Binary offer-set schedule: ``q[m-1, j-1] = 1`` iff item j is offered in period m."""

    q: np.ndarray

    def __post_init__(self):
        q = _frozen_array(self.q, np.int8)
        if q.ndim != 2:
            raise ValueError("q must be a 2-D matrix (periods x items)")
        if not np.isin(q, (0, 1)).all():
            raise ValueError("availability entries must be 0 or 1")
        object.__setattr__(self, "q", q)

    @property
    def m(self) -> int:
        return self.q.shape[0]

    @property
    def n(self) -> int:
        return self.q.shape[1]

    def row(self, period: int) -> np.ndarray:
        """Availability vector of a 1-based period number."""
        if not 1 <= period <= self.m:
            raise IndexError(f"period {period} out of range 1..{self.m}")
        return self.q[period - 1]


@dataclass(frozen=True)
class Violation:
    """One dataset invariant breach, located by 1-based coordinates."""

    period: int
    item: int
    message: str


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    violations: tuple[Violation, ...]


@dataclass(frozen=True)
class TransactionDataset:
    """Per-period purchase counts over an availability schedule.

    ``counts[m-1, 0]`` is the no-purchase count of period m and
    ``counts[m-1, j]`` the count of item j.  Counts recorded against
    unoffered items are representable (so they can be reported by
    :func:`validate_dataset`) but reject every downstream computation.
    """

    availability: AvailabilityMatrix
    counts: np.ndarray

    def __post_init__(self):
        counts = np.ascontiguousarray(self.counts)
        if not np.issubdtype(counts.dtype, np.integer):
            if not np.all(counts == np.floor(counts)):
                raise ValueError("counts must be integers")
        counts = _frozen_array(counts, np.int64)
        m, n = self.availability.q.shape
        if counts.shape != (m, n + 1):
            raise ValueError(
                f"counts must be {m}x{n + 1} (no-purchase column plus {n} items), "
                f"got {counts.shape}"
            )
        if (counts < 0).any():
            raise ValueError("counts must be nonnegative")
        object.__setattr__(self, "counts", counts)
        bad = np.argwhere((self.availability.q == 0) & (counts[:, 1:] > 0))
        violations = tuple(
            Violation(
                period=int(r) + 1,
                item=int(j) + 1,
                message=(
                    f"period {int(r) + 1}: item {int(j) + 1} is not offered but has "
                    f"count {int(counts[r, j + 1])}"
                ),
            )
            for r, j in bad
        )
        object.__setattr__(self, "_violations", violations)

    @property
    def m(self) -> int:
        return self.availability.m

    @property
    def n(self) -> int:
        return self.availability.n

    @property
    def violations(self) -> tuple[Violation, ...]:
        return self._violations

    def kappa(self) -> np.ndarray:
        """Total recorded transactions per period, no-purchase included."""
        return self.counts.sum(axis=1)

    def total_transactions(self) -> int:
        return int(self.counts.sum())

    def select_periods(self, periods) -> "TransactionDataset":
        """Subset by 1-based period numbers, preserving the given order."""
        idx = np.asarray(list(periods), dtype=np.int64)
        if idx.size == 0:
            raise ValueError("cannot select an empty set of periods")
        if (idx < 1).any() or (idx > self.m).any():
            raise IndexError(f"period numbers must be within 1..{self.m}")
        rows = idx - 1
        return TransactionDataset(
            AvailabilityMatrix(self.availability.q[rows]), self.counts[rows]
        )

    def require_valid(self):
        if self._violations:
            raise InvalidDatasetError(self._violations)


def validate_dataset(ds: TransactionDataset) -> ValidationResult:
    """Check every dataset invariant; violations are data, not errors.

    Returns each breach with its (period, item) coordinates.  A dataset is
    ok iff no offered-item rule is broken: ``counts[m][j] > 0`` requires
    ``q[m][j] = 1``.
    """
    return ValidationResult(ok=not ds.violations, violations=ds.violations)


@dataclass(frozen=True)
class ChoiceDistribution:
    """Choice probabilities for one offer set; index 0 is no-purchase."""

    probs: np.ndarray

    def __post_init__(self):
        probs = _frozen_array(self.probs, np.float64)
        if probs.ndim != 1 or probs.shape[0] < 2:
            raise ValueError("probs must be a vector of length n+1")
        if (probs < 0).any() or (probs > 1).any():
            raise ValueError("probabilities must lie in [0, 1]")
        if abs(float(probs.sum()) - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1 within 1e-12")
        object.__setattr__(self, "probs", probs)

    @property
    def n(self) -> int:
        return self.probs.shape[0] - 1

    def prob(self, item: int) -> float:
        """Probability of item (1..n) or of no-purchase (0)."""
        if not 0 <= item <= self.n:
            raise IndexError(f"item {item} out of range 0..{self.n}")
        return float(self.probs[item])


@dataclass(frozen=True)
class ParameterMask:
    """Boolean flags marking which parameters are estimated (vs fixed at 0)."""

    mu: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        mu = _frozen_array(self.mu, np.bool_)
        alpha = _frozen_array(self.alpha, np.bool_)
        n = mu.shape[0]
        if mu.ndim != 1 or alpha.shape != (n, n):
            raise ValueError("mask shapes must be (n,) and (n, n)")
        if np.any(np.diagonal(alpha)):
            raise ValueError("alpha diagonal is structurally zero and cannot be estimated")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "alpha", alpha)

    @property
    def n(self) -> int:
        return self.mu.shape[0]

    @property
    def count(self) -> int:
        """Number of estimated parameters (the d of AIC/BIC)."""
        return int(self.mu.sum()) + int(self.alpha.sum())

    @classmethod
    def full(cls, n: int) -> "ParameterMask":
        """Everything estimable: all of mu, all off-diagonal alpha."""
        return cls(np.ones(n, bool), ~np.eye(n, dtype=bool))

    @classmethod
    def mnl(cls, n: int) -> "ParameterMask":
        """Classic MNL restriction: mu free, alpha pinned at 0."""
        return cls(np.ones(n, bool), np.zeros((n, n), bool))

    def intersect(self, other: "ParameterMask") -> "ParameterMask":
        if other.n != self.n:
            raise ValueError("mask sizes differ")
        return ParameterMask(self.mu & other.mu, self.alpha & other.alpha)


_FIT_METHODS = ("closed-form-c1", "closed-form-c2", "numerical")


@dataclass(frozen=True)
class FitResult:
    """Outcome of a maximum-likelihood fit.

    Every parameter outside ``mask`` is exactly 0; ``loglik`` is the
    log-likelihood of ``params`` on the training data.
    """

    params: ParameterSet
    mask: ParameterMask
    loglik: float
    method: str
    converged: bool
    iterations: int

    def __post_init__(self):
        if self.method not in _FIT_METHODS:
            raise ValueError(f"method must be one of {_FIT_METHODS}")
        if self.mask.n != self.params.n:
            raise ValueError("mask and params sizes differ")
        if np.any(self.params.mu[~self.mask.mu] != 0.0):
            raise ValueError("unmasked mu entries must be exactly 0")
        if np.any(self.params.alpha[~self.mask.alpha] != 0.0):
            raise ValueError("unmasked alpha entries must be exactly 0")
        if self.converged and not np.isfinite(self.loglik):
            raise ValueError("a converged fit must have a finite log-likelihood")

    @property
    def n_parameters(self) -> int:
        return self.mask.count
