"""Utilities, choice probabilities, log-likelihood, and its analytic gradient.

Every operation here is a pure function of immutable inputs.  Likelihood
and gradient sums are accumulated over the distinct offer-set patterns of
the dataset (lexicographically ordered), so results are bit-reproducible
and invariant to period order.

All exponentials go through a max-shifted log-sum-exp: parameters with
magnitudes in the hundreds neither overflow nor lose the normalization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    ChoiceDistribution,
    ParameterMask,
    ParameterSet,
    TransactionDataset,
)

__all__ = [
    "GradientVector",
    "effective_utility",
    "choice_probabilities",
    "log_likelihood",
    "log_likelihood_gradient",
]


@dataclass(frozen=True)
class GradientVector:
    """Log-likelihood gradient: d_mu (n,) and d_alpha (n, n) with zero diagonal."""

    d_mu: np.ndarray
    d_alpha: np.ndarray

    def max_abs(self, mask: ParameterMask | None = None) -> float:
        if mask is None:
            return max(float(np.abs(self.d_mu).max()), float(np.abs(self.d_alpha).max()))
        vals = [0.0]
        if mask.mu.any():
            vals.append(float(np.abs(self.d_mu[mask.mu]).max()))
        if mask.alpha.any():
            vals.append(float(np.abs(self.d_alpha[mask.alpha]).max()))
        return max(vals)


def _availability_vector(availability, n: int) -> np.ndarray:
    x = np.asarray(availability)
    if hasattr(availability, "q"):
        raise TypeError("pass a single availability row, not a schedule")
    if x.shape != (n,):
        raise ValueError(f"availability must have length {n}")
    if not np.isin(x, (0, 1)).all():
        raise ValueError("availability entries must be 0 or 1")
    return x.astype(np.float64)


def effective_utility(params: ParameterSet, availability, item: int) -> float:
    """Log-utility of one item under an offer set.

    Implements v_j = x_j * mu_j + sum_i x_j (1 - x_i) alpha[i, j]: the
    baseline preference plus the absence effects of every unoffered item.
    Returns 0.0 when the item itself is not offered.

    Parameters
    ----------
    availability : array-like of 0/1, length n
    item : int
        1-based item number.
    """
    x = _availability_vector(availability, params.n)
    if not 1 <= item <= params.n:
        raise IndexError(f"item {item} out of range 1..{params.n}")
    j = item - 1
    if x[j] == 0:
        return 0.0
    return float(params.mu[j] + (1.0 - x) @ params.alpha[:, j])


def _utilities(params: ParameterSet, x: np.ndarray) -> np.ndarray:
    """Effective log-utilities of all items; -inf marks unoffered items."""
    w = params.mu + (1.0 - x) @ params.alpha
    return np.where(x > 0, w, -np.inf)


def _log_denominator(w_masked: np.ndarray) -> float:
    """log(1 + sum over offered items of exp(w)), max-shifted."""
    shift = max(float(np.max(w_masked, initial=-np.inf)), 0.0)
    return shift + float(np.log(np.exp(-shift) + np.exp(w_masked - shift).sum()))


def choice_probabilities(params: ParameterSet, availability) -> ChoiceDistribution:
    """Purchase probabilities over no-purchase and all items for one offer set.

    Offered items receive exp(v_j) / (1 + sum_k exp(v_k)); the no-purchase
    option holds the reciprocal denominator; unoffered items get exactly 0.
    An empty offer set is valid and yields no-purchase probability 1.
    """
    x = _availability_vector(availability, params.n)
    w = _utilities(params, x)
    lse = _log_denominator(w)
    probs = np.empty(params.n + 1)
    probs[0] = np.exp(-lse)
    probs[1:] = np.exp(w - lse)
    return ChoiceDistribution(probs)


def pooled_patterns(ds: TransactionDataset):
    """Pool counts over the distinct availability patterns of a dataset.

    Returns (patterns, pooled_counts): patterns is (u, n) with u distinct
    rows in lexicographic order, pooled_counts is (u, n+1).  The likelihood
    depends on the data only through these pools.
    """
    patterns, inverse = np.unique(ds.availability.q, axis=0, return_inverse=True)
    pooled = np.zeros((patterns.shape[0], ds.n + 1), dtype=np.float64)
    np.add.at(pooled, inverse, ds.counts.astype(np.float64))
    return patterns.astype(np.float64), pooled


def _pattern_state(params: ParameterSet, patterns: np.ndarray, pooled: np.ndarray):
    """Per-pattern utilities, log-denominators, probabilities, and residuals.

    The residual matrix holds z_p - kappa * P_p per (pattern, item), which is
    both the per-pattern log-likelihood derivative wrt the item's utility and
    the building block of every parameter derivative.
    """
    offered = patterns > 0
    w = params.mu[None, :] + (1.0 - patterns) @ params.alpha
    w = np.where(offered, w, -np.inf)
    shift = np.maximum(np.max(w, axis=1, initial=-np.inf, where=offered), 0.0)
    # patterns with an empty offer set: no offered entries, denominator is 1
    shift = np.where(np.isfinite(shift), shift, 0.0)
    lse = shift + np.log(np.exp(-shift) + np.where(offered, np.exp(w - shift[:, None]), 0.0).sum(axis=1))
    probs = np.where(offered, np.exp(w - lse[:, None]), 0.0)
    kappa = pooled.sum(axis=1)
    residual = pooled[:, 1:] - kappa[:, None] * probs
    residual[~offered] = 0.0
    return w, lse, probs, kappa, residual


def log_likelihood(params: ParameterSet, ds: TransactionDataset) -> float:
    """Log-likelihood of the dataset under the model.

    Per period: -kappa * log(1 + sum_{k offered} exp(v_k)) plus
    sum over offered items of z_j * v_j.  Periods with no transactions
    contribute 0.  Raises :class:`InvalidDatasetError` on datasets that
    record purchases of unoffered items.
    """
    if params.n != ds.n:
        raise ValueError(f"params have {params.n} items, dataset has {ds.n}")
    ds.require_valid()
    patterns, pooled = pooled_patterns(ds)
    w, lse, _, kappa, _ = _pattern_state(params, patterns, pooled)
    linear = np.where(patterns > 0, w, 0.0)
    return float(np.sum(-kappa * lse) + np.sum(pooled[:, 1:] * linear))


def log_likelihood_gradient(
    params: ParameterSet, ds: TransactionDataset, mask: ParameterMask | None = None
) -> GradientVector:
    """Analytic gradient of :func:`log_likelihood`.

    d/d mu_p sums z_p - kappa * P_p over periods offering p; d/d alpha_qp
    sums the same residual over periods offering p with q absent.  When a
    mask is given, entries outside it are reported as exactly 0.
    """
    if params.n != ds.n:
        raise ValueError(f"params have {params.n} items, dataset has {ds.n}")
    ds.require_valid()
    patterns, pooled = pooled_patterns(ds)
    _, _, _, _, residual = _pattern_state(params, patterns, pooled)
    d_mu = residual.sum(axis=0)
    d_alpha = (1.0 - patterns).T @ residual
    np.fill_diagonal(d_alpha, 0.0)
    if mask is not None:
        if mask.n != params.n:
            raise ValueError("mask size mismatch")
        d_mu = np.where(mask.mu, d_mu, 0.0)
        d_alpha = np.where(mask.alpha, d_alpha, 0.0)
    return GradientVector(d_mu=d_mu, d_alpha=d_alpha)
