"""Model scoring and comparison.

Information criteria, the reward index (aggregate negative log predicted
probability of the recorded choices, so lower is better and values are
positive), chi-square goodness of fit per offer-set signature with the
n*p > 10 applicability rule, bootstrap median p-values, pairwise model
deltas, and parameter-recovery errors.

BIC's sample size is the total recorded transaction count (no-purchase
included), the quantity the likelihood is a product over.  The parameter
count d of a fit is the number of estimated (masked) parameters only, so
partially identifiable fits are not penalized for pinned zeros.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from .core import FitResult, ParameterSet, TransactionDataset
from .probability import choice_probabilities, log_likelihood

__all__ = [
    "aic",
    "bic",
    "reward_index",
    "GofResult",
    "chi_square_gof",
    "bootstrap_pvalue",
    "ModelScore",
    "PairwiseDelta",
    "ComparisonReport",
    "compare_models",
    "RecoveryErrorReport",
    "recovery_error",
    "split_periods",
    "NoMatchingPeriodsError",
    "ZeroProbabilityChoiceError",
]


class NoMatchingPeriodsError(ValueError):
    """No period in the dataset carries the requested offer-set signature."""


class ZeroProbabilityChoiceError(ValueError):
    """A recorded choice has predicted probability zero under the model."""

    def __init__(self, period: int, item: int):
        self.period = period
        self.item = item
        super().__init__(
            f"period {period}: item {item} was purchased but has predicted probability 0"
        )


def aic(loglik: float, d: int) -> float:
    """Akaike information criterion: -2 loglik + 2 d."""
    if not math.isfinite(loglik):
        raise ValueError("loglik must be finite")
    if d < 0:
        raise ValueError("parameter count must be nonnegative")
    return -2.0 * loglik + 2.0 * d


def bic(loglik: float, d: int, n: int) -> float:
    """Bayesian information criterion: -2 loglik + d ln(n), n = transaction count."""
    if not math.isfinite(loglik):
        raise ValueError("loglik must be finite")
    if d < 0:
        raise ValueError("parameter count must be nonnegative")
    if n < 1:
        raise ValueError("sample size must be >= 1")
    return -2.0 * loglik + d * math.log(n)


def reward_index(params: ParameterSet, ds: TransactionDataset) -> float:
    """Sum over recorded choices of -log predicted probability; lower is better.

    Identical to the negated log-likelihood of the dataset.  Raises
    ZeroProbabilityChoiceError when a choice the model rules out
    structurally (a purchase of an unoffered item) is recorded.
    """
    for violation in ds.violations:
        raise ZeroProbabilityChoiceError(violation.period, violation.item)
    return -log_likelihood(params, ds)


@dataclass(frozen=True)
class GofResult:
    """Chi-square goodness of fit of pooled counts for one offer-set signature."""

    signature: tuple[int, ...]
    statistic: float
    dof: int
    applicable: bool
    p_value: float | None
    bootstrap_median_p: float | None = None
    n_total: int = 0


def _matching_rows(ds: TransactionDataset, signature) -> np.ndarray:
    sig = np.asarray(signature, dtype=np.int8)
    if sig.shape != (ds.n,):
        raise ValueError(f"signature must have length {ds.n}")
    if not np.isin(sig, (0, 1)).all():
        raise ValueError("signature entries must be 0 or 1")
    rows = np.flatnonzero((ds.availability.q == sig).all(axis=1))
    if rows.size == 0:
        raise NoMatchingPeriodsError(
            "no period matches signature " + "".join(str(int(v)) for v in sig)
        )
    return rows


def _gof_core(params, ds, signature):
    rows = _matching_rows(ds, signature)
    sig = np.asarray(signature, dtype=np.int8)
    observed = ds.counts[rows].sum(axis=0).astype(np.float64)
    n_total = float(observed.sum())
    probs = choice_probabilities(params, sig).probs
    cells = np.concatenate([[True], sig.astype(bool)])  # no-purchase + offered items
    dof = int(sig.sum())  # (#offered + 1) - 1
    expected = n_total * probs
    live = cells & (expected > 0)
    statistic = float((((observed - expected) ** 2)[live] / expected[live]).sum())
    applicable = bool(n_total > 0 and (expected[cells] > 10.0).all())
    return sig, observed, n_total, probs, cells, dof, statistic, applicable


def chi_square_gof(params: ParameterSet, ds: TransactionDataset, offer_signature) -> GofResult:
    """Pooled chi-square test of the model for one offer-set signature.

    Counts of every period matching the signature are pooled; expected
    cell counts are n_total * p_i over the offered items plus no-purchase.
    The analytic p-value is only reported when every such expected count
    exceeds 10 (the applicability rule); cells with zero expectation are
    excluded from the statistic.
    """
    ds.require_valid()
    sig, _, n_total, _, _, dof, statistic, applicable = _gof_core(params, ds, offer_signature)
    p_value = float(chi2.sf(statistic, dof)) if applicable else None
    return GofResult(
        signature=tuple(int(v) for v in sig),
        statistic=statistic,
        dof=dof,
        applicable=applicable,
        p_value=p_value,
        n_total=int(n_total),
    )


def bootstrap_pvalue(
    params: ParameterSet,
    ds: TransactionDataset,
    offer_signature,
    resamples: int = 1000,
    seed: int = 0,
) -> GofResult:
    """Bootstrap median p-value for one offer-set signature.

    Each of the ``resamples`` rounds redraws the pooled transactions with
    replacement (total preserved), recomputes the chi-square statistic
    against the model, and converts it to a p-value; the median reported
    is the lower median, so it is always one of the resampled values.
    Resample b uses the generator seeded with [seed, b], making the result
    deterministic and independent of any parallel execution order.
    """
    ds.require_valid()
    if resamples < 1:
        raise ValueError("need at least one resample")
    base = chi_square_gof(params, ds, offer_signature)
    sig, observed, n_total, probs, cells, dof, _, _ = _gof_core(params, ds, offer_signature)
    total = int(n_total)
    if total > 0:
        empirical = observed / n_total
        expected = n_total * probs
        live = cells & (expected > 0)
        pvals = np.empty(resamples)
        for b in range(resamples):
            rng = np.random.default_rng([int(seed), b])
            redraw = rng.multinomial(total, empirical).astype(np.float64)
            stat = float((((redraw - expected) ** 2)[live] / expected[live]).sum())
            pvals[b] = chi2.sf(stat, dof)
    else:
        pvals = np.ones(resamples)
    median = float(np.sort(pvals)[(resamples - 1) // 2])
    return GofResult(
        signature=base.signature,
        statistic=base.statistic,
        dof=base.dof,
        applicable=base.applicable,
        p_value=base.p_value,
        bootstrap_median_p=median,
        n_total=base.n_total,
    )


@dataclass(frozen=True)
class ModelScore:
    label: str
    loglik: float
    d: int
    aic: float
    bic: float


@dataclass(frozen=True)
class PairwiseDelta:
    """Score differences (first - second); positive deltas favor the second model."""

    first: str
    second: str
    delta_loglik: float
    delta_aic: float
    delta_bic: float


@dataclass(frozen=True)
class ComparisonReport:
    scores: tuple[ModelScore, ...]
    deltas: tuple[PairwiseDelta, ...]
    n: int
    dataset_id: str | None = None
    role: str | None = None


def compare_models(
    fits,
    test_ds: TransactionDataset,
    labels=None,
    dataset_id: str | None = None,
    role: str | None = None,
) -> ComparisonReport:
    """Score fitted models on a dataset and tabulate all pairwise deltas.

    Each fit is scored by its log-likelihood on ``test_ds``; d is the
    fit's estimated-parameter count; AIC/BIC follow from those with
    n = total transactions of ``test_ds``.  Deltas are (first - second)
    over every pair in list order -- for (MNL, halo) ordering, positive
    delta means the halo model wins.
    """
    fits = list(fits)
    if not fits:
        raise ValueError("need at least one fit")
    if labels is None:
        labels = [f"model{k + 1}" for k in range(len(fits))]
    if len(labels) != len(fits):
        raise ValueError("one label per fit required")
    for fit in fits:
        if fit.params.n != test_ds.n:
            raise ValueError("fit and dataset item counts differ")
    n = test_ds.total_transactions()
    scores = []
    for label, fit in zip(labels, fits):
        ll = log_likelihood(fit.params, test_ds)
        d = fit.mask.count
        scores.append(ModelScore(label=label, loglik=ll, d=d, aic=aic(ll, d), bic=bic(ll, d, max(n, 1))))
    deltas = []
    for a in range(len(scores)):
        for b in range(a + 1, len(scores)):
            deltas.append(
                PairwiseDelta(
                    first=scores[a].label,
                    second=scores[b].label,
                    delta_loglik=scores[a].loglik - scores[b].loglik,
                    delta_aic=scores[a].aic - scores[b].aic,
                    delta_bic=scores[a].bic - scores[b].bic,
                )
            )
    return ComparisonReport(
        scores=tuple(scores),
        deltas=tuple(deltas),
        n=n,
        dataset_id=dataset_id,
        role=role,
    )


@dataclass(frozen=True)
class RecoveryErrorReport:
    """Per-parameter recovery errors against a known truth.

    Where the true parameter is nonzero the entry is the absolute relative
    error |est - true| / |true|; where it is zero the entry is the plain
    absolute error |est| and the matching flag is set.
    """

    mu_error: np.ndarray
    alpha_error: np.ndarray
    mu_is_absolute: np.ndarray
    alpha_is_absolute: np.ndarray


def recovery_error(truth: ParameterSet, fitted: FitResult) -> RecoveryErrorReport:
    if truth.n != fitted.params.n:
        raise ValueError("truth and fit item counts differ")
    mu_zero = truth.mu == 0.0
    alpha_zero = truth.alpha == 0.0
    mu_err = np.where(
        mu_zero,
        np.abs(fitted.params.mu),
        np.abs(fitted.params.mu - truth.mu) / np.where(mu_zero, 1.0, np.abs(truth.mu)),
    )
    alpha_err = np.where(
        alpha_zero,
        np.abs(fitted.params.alpha),
        np.abs(fitted.params.alpha - truth.alpha)
        / np.where(alpha_zero, 1.0, np.abs(truth.alpha)),
    )
    return RecoveryErrorReport(
        mu_error=mu_err,
        alpha_error=alpha_err,
        mu_is_absolute=mu_zero,
        alpha_is_absolute=alpha_zero,
    )


def split_periods(
    ds: TransactionDataset,
    train_size: int | None = None,
    train_fraction: float | None = None,
    seed: int = 0,
):
    """Random train/test split over periods; deterministic given the seed.

    Exactly one of ``train_size`` and ``train_fraction`` must be given;
    both the training and the testing side must end up non-empty.
    Returns (train_ds, test_ds, train_periods, test_periods) with
    1-based period numbers in ascending order.
    """
    if (train_size is None) == (train_fraction is None):
        raise ValueError("give exactly one of train_size and train_fraction")
    m = ds.m
    if train_fraction is not None:
        if not 0.0 < train_fraction < 1.0:
            raise ValueError("train_fraction must be strictly between 0 and 1 "
                             "(the test set may not be empty)")
        train_size = int(round(train_fraction * m))
    if not 1 <= train_size < m:
        raise ValueError(f"train_size must be within 1..{m - 1} so the test set is non-empty")
    rng = np.random.default_rng([int(seed)])
    order = rng.permutation(m) + 1
    train = tuple(sorted(int(p) for p in order[:train_size]))
    test = tuple(sorted(int(p) for p in order[train_size:]))
    return ds.select_periods(train), ds.select_periods(test), train, test
