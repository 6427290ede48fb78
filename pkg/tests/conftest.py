"""Shared helpers: random model instances and the finite-difference oracle."""

from __future__ import annotations

import numpy as np

from halomnl import (
    AvailabilityMatrix,
    ParameterMask,
    ParameterSet,
    TransactionDataset,
    log_likelihood,
)


def random_params(rng, n, scale=0.6):
    mu = rng.normal(0.0, scale, n)
    alpha = rng.normal(0.0, scale / 2, (n, n))
    np.fill_diagonal(alpha, 0.0)
    return ParameterSet(mu, alpha)


def random_schedule(rng, n, periods):
    """Random binary schedule; every period offers at least one item."""
    q = (rng.random((periods, n)) > 0.4).astype(np.int8)
    empty = q.sum(axis=1) == 0
    for row in np.flatnonzero(empty):
        q[row, rng.integers(n)] = 1
    return AvailabilityMatrix(q)


def random_dataset(rng, n=None, periods=None, rate=40.0):
    """Random schedule plus Poisson counts on the offered cells only."""
    n = n if n is not None else int(rng.integers(2, 6))
    periods = periods if periods is not None else int(rng.integers(4, 12))
    schedule = random_schedule(rng, n, periods)
    counts = np.zeros((periods, n + 1), dtype=np.int64)
    counts[:, 0] = rng.poisson(rate, periods)
    offered = schedule.q.astype(bool)
    draws = rng.poisson(rate, (periods, n))
    counts[:, 1:][offered] = draws[offered]
    return TransactionDataset(schedule, counts)


def finite_difference_gradient(params, ds, mask: ParameterMask, step=1e-6):
    """Central differences of the log-likelihood over the masked entries."""
    n = params.n
    d_mu = np.zeros(n)
    d_alpha = np.zeros((n, n))

    def ll(mu, alpha):
        return log_likelihood(ParameterSet(mu, alpha), ds)

    for j in np.flatnonzero(mask.mu):
        up = params.mu.copy()
        down = params.mu.copy()
        up[j] += step
        down[j] -= step
        d_mu[j] = (ll(up, params.alpha) - ll(down, params.alpha)) / (2 * step)
    for i, j in np.argwhere(mask.alpha):
        up = params.alpha.copy()
        down = params.alpha.copy()
        up[i, j] += step
        down[i, j] -= step
        d_alpha[i, j] = (ll(params.mu, up) - ll(params.mu, down)) / (2 * step)
    return d_mu, d_alpha


def relative_error(a, b):
    """|a - b| scaled by max(1, |a|, |b|), elementwise."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.abs(a - b) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
