"""Maximum-likelihood estimation.

Two closed-form routes exist when the schedule cooperates: under C1 the
baseline preferences are log count ratios over the full-assortment periods
and each absence effect is a log ratio over the matching leave-one-out
periods; under C2 with an upper-triangular interaction matrix the effects
telescope between consecutive prefix-missing pools.  The general route is
a numerical ascent on the masked log-likelihood: L-BFGS-B followed by a
matrix-free Newton polish (conjugate-gradient solves against exact
curvature-vector products) that drives the masked gradient below the
configured tolerance.  The objective is concave in (mu, alpha), so the
local search finds the global maximum whenever one exists.

Fitting is deterministic: likelihood terms are pooled per offer-set
pattern in a fixed order, so permuting dataset periods changes nothing,
bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.sparse.linalg import LinearOperator, cg

from .core import FitResult, ParameterMask, ParameterSet, TransactionDataset
from .identifiability import identifiable_mask, satisfies_c1, satisfies_c2_triangular
from .probability import log_likelihood, pooled_patterns

__all__ = [
    "OptimizerConfig",
    "NotC1Error",
    "NotC2Error",
    "ZeroCellCountError",
    "NonFiniteObjectiveError",
    "fit_closed_form_c1",
    "fit_closed_form_c2_triangular",
    "fit_numerical",
    "fit_mnl",
    "supported_mask",
]


class NotC1Error(ValueError):
    """The schedule does not satisfy condition C1."""


class NotC2Error(ValueError):
    """The schedule does not satisfy condition C2 (triangular)."""


class ZeroCellCountError(ValueError):
    """A count sum required by a closed-form estimator is zero.

    ``pool`` names the period group whose sum vanished and ``item`` the
    1-based item (0 = no-purchase).  Additive smoothing > 0 makes every
    such sum positive.
    """

    def __init__(self, pool: str, item: int):
        self.pool = pool
        self.item = item
        what = "no-purchase" if item == 0 else f"item {item}"
        super().__init__(
            f"sum of {what} counts over {pool} periods is zero; "
            "the estimator is undefined (consider smoothing > 0)"
        )


class NonFiniteObjectiveError(ValueError):
    """The masked likelihood has no finite maximizer.

    Happens when a masked parameter's supporting pools record transactions
    but never a purchase of the parameter's item: the likelihood improves
    without bound as that parameter heads to -infinity.
    """

    def __init__(self, coordinates):
        self.coordinates = tuple(coordinates)
        names = ", ".join(self.coordinates[:8])
        more = "" if len(self.coordinates) <= 8 else f" (+{len(self.coordinates) - 8} more)"
        super().__init__(
            f"likelihood is unbounded in: {names}{more}; "
            "these items are never purchased in their supporting periods "
            "(consider smoothing > 0 or a smaller mask)"
        )


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings for the numerical maximizer.

    ``gradient_tolerance`` is the convergence target on the masked gradient
    (max absolute entry).  ``step_improvement_tolerance`` stops the line
    search when the objective no longer improves by at least that much.
    ``initialization`` is "closed-form-warm-start" (use the C1 closed form
    when the schedule allows it, otherwise zeros) or "zeros" (the uniform
    choice model, a safe interior point).  ``smoothing`` adds the given
    count to every pooled cell (per offer-set pattern: each offered item
    and no-purchase), matching the closed-form smoothing rule.
    """

    max_iterations: int = 1000
    gradient_tolerance: float = 1e-8
    step_improvement_tolerance: float = 1e-12
    initialization: str = "closed-form-warm-start"
    smoothing: float = 0.0

    def __post_init__(self):
        if self.max_iterations <= 0:
            raise ValueError("max_iterations must be positive")
        if self.gradient_tolerance <= 0 or self.step_improvement_tolerance <= 0:
            raise ValueError("tolerances must be positive")
        if self.initialization not in ("closed-form-warm-start", "zeros"):
            raise ValueError("initialization must be 'closed-form-warm-start' or 'zeros'")
        if self.smoothing < 0:
            raise ValueError("smoothing must be nonnegative")


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------


def _smoothed_pools(ds: TransactionDataset, smoothing: float):
    """Distinct patterns and pooled counts, with +smoothing on every live cell."""
    patterns, pooled = pooled_patterns(ds)
    if smoothing:
        pooled = pooled.copy()
        pooled[:, 0] += smoothing
        pooled[:, 1:] += smoothing * patterns
    return patterns, pooled


def _pool_sums(pooled, row_mask, pool_name, items):
    """Log count ratios z_p / z_0 over one period pool; errors name zero sums."""
    z = pooled[row_mask].sum(axis=0)
    if z[0] <= 0:
        raise ZeroCellCountError(pool_name, 0)
    out = {}
    for p in items:
        if z[p] <= 0:
            raise ZeroCellCountError(pool_name, p)
        out[p] = float(np.log(z[p] / z[0]))
    return out


def fit_closed_form_c1(ds: TransactionDataset, smoothing: float = 0.0) -> FitResult:
    """Closed-form MLE on a C1 schedule.

    mu_p = ln(sum z_p / sum z_0) over the full-assortment periods;
    alpha_ip = ln(sum z_p / sum z_0) over the periods where exactly item i
    is missing, minus mu_p.  Periods outside those template groups do not
    enter the formulas, so the result is the exact maximizer of the whole
    likelihood when the schedule consists purely of template rows (strict
    C1); with extra rows it maximizes the template-row portion.

    Raises NotC1Error when the schedule fails the (lenient) condition and
    ZeroCellCountError when a required count sum is zero and smoothing is 0.
    """
    ds.require_valid()
    if not satisfies_c1(ds.availability):
        raise NotC1Error("schedule does not satisfy condition C1")
    n = ds.n
    patterns, pooled = _smoothed_pools(ds, smoothing)
    pattern_zeros = n - patterns.sum(axis=1)
    full = pattern_zeros == 0
    items = range(1, n + 1)
    mu_ratios = _pool_sums(pooled, full, "full-assortment", items)
    mu = np.array([mu_ratios[p] for p in items])
    alpha = np.zeros((n, n))
    for i in items:
        rows = (pattern_zeros == 1) & (patterns[:, i - 1] == 0)
        others = [p for p in items if p != i]
        ratios = _pool_sums(pooled, rows, f"single-missing-{i}", others)
        for p in others:
            alpha[i - 1, p - 1] = ratios[p] - mu[p - 1]
    params = ParameterSet(mu, alpha)
    return FitResult(
        params=params,
        mask=ParameterMask.full(n),
        loglik=log_likelihood(params, ds),
        method="closed-form-c1",
        converged=True,
        iterations=0,
    )


def fit_closed_form_c2_triangular(ds: TransactionDataset, smoothing: float = 0.0) -> FitResult:
    """Closed-form MLE on a C2 schedule with upper-triangular interactions.

    Only alpha_ip with i < p is estimated (the absence of an earlier item
    acting on a later one); everything else stays pinned at 0 and outside
    the mask.  With S_i the periods missing exactly items 1..i and S_0 the
    full-assortment periods: mu_p comes from S_0 and each alpha_ip is the
    difference of consecutive log count ratios between S_i and S_{i-1}.
    """
    ds.require_valid()
    if not satisfies_c2_triangular(ds.availability):
        raise NotC2Error("schedule does not satisfy condition C2 (triangular)")
    n = ds.n
    patterns, pooled = _smoothed_pools(ds, smoothing)
    pattern_zeros = n - patterns.sum(axis=1)
    full = pattern_zeros == 0
    items = range(1, n + 1)
    mu_ratios = _pool_sums(pooled, full, "full-assortment", items)
    mu = np.array([mu_ratios[p] for p in items])
    alpha = np.zeros((n, n))
    previous = mu_ratios
    for i in range(1, n):
        rows = (pattern_zeros == i) & (patterns[:, :i] == 0).all(axis=1)
        later = range(i + 1, n + 1)
        ratios = _pool_sums(pooled, rows, f"prefix-missing-1..{i}", later)
        for p in later:
            alpha[i - 1, p - 1] = ratios[p] - previous[p]
        previous = ratios
    mask = ParameterMask(np.ones(n, bool), np.triu(np.ones((n, n), bool), k=1))
    params = ParameterSet(mu, alpha)
    return FitResult(
        params=params,
        mask=mask,
        loglik=log_likelihood(params, ds),
        method="closed-form-c2",
        converged=True,
        iterations=0,
    )


# ---------------------------------------------------------------------------
# numerical maximizer
# ---------------------------------------------------------------------------


class _MaskedObjective:
    """Masked log-likelihood over pooled patterns, with gradient and exact HVP."""

    def __init__(self, patterns, pooled, mask: ParameterMask):
        self.patterns = patterns
        self.offered = patterns > 0
        self.absent = 1.0 - patterns
        self.pooled = pooled
        self.kappa = pooled.sum(axis=1)
        self.mask = mask
        self.k = mask.count
        self.n = mask.n

    def unpack(self, theta):
        mu = np.zeros(self.n)
        alpha = np.zeros((self.n, self.n))
        nmu = int(self.mask.mu.sum())
        mu[self.mask.mu] = theta[:nmu]
        alpha[self.mask.alpha] = theta[nmu:]
        return mu, alpha

    def pack(self, mu, alpha):
        return np.concatenate([mu[self.mask.mu], alpha[self.mask.alpha]])

    def state(self, theta):
        mu, alpha = self.unpack(theta)
        w = mu[None, :] + self.absent @ alpha
        w = np.where(self.offered, w, -np.inf)
        shift = np.max(w, axis=1, initial=0.0, where=self.offered)
        shift = np.maximum(shift, 0.0)
        lse = shift + np.log(
            np.exp(-shift)
            + np.where(self.offered, np.exp(w - shift[:, None]), 0.0).sum(axis=1)
        )
        probs = np.where(self.offered, np.exp(w - lse[:, None]), 0.0)
        linear = np.where(self.offered, w, 0.0)
        ll = float(np.sum(-self.kappa * lse) + np.sum(self.pooled[:, 1:] * linear))
        residual = self.pooled[:, 1:] - self.kappa[:, None] * probs
        residual[~self.offered] = 0.0
        grad = self.pack(residual.sum(axis=0), self.absent.T @ residual)
        return ll, grad, probs

    def hvp(self, theta_probs, v):
        """Exact Hessian-vector product at the point whose probs are given."""
        probs = theta_probs
        vmu, valpha = self.unpack(v)
        dw = vmu[None, :] + self.absent @ valpha
        dw = np.where(self.offered, dw, 0.0)
        s = (probs * dw).sum(axis=1)
        dresidual = -self.kappa[:, None] * (probs * dw - probs * s[:, None])
        dresidual[~self.offered] = 0.0
        return self.pack(dresidual.sum(axis=0), self.absent.T @ dresidual)


def _unsupported_coordinates(objective: _MaskedObjective) -> list[str]:
    """Masked parameters whose supporting pools have transactions but no purchases."""
    pooled = objective.pooled
    offered = objective.offered
    kappa = objective.kappa
    names = []
    for j in np.flatnonzero(objective.mask.mu):
        rows = offered[:, j]
        if pooled[rows, j + 1].sum() <= 0 < kappa[rows].sum():
            names.append(f"mu[{j + 1}]")
    for i, j in np.argwhere(objective.mask.alpha):
        rows = offered[:, j] & ~offered[:, i]
        if pooled[rows, j + 1].sum() <= 0 < kappa[rows].sum():
            names.append(f"alpha[{i + 1},{j + 1}]")
    return names


def _warm_start(ds, objective: _MaskedObjective, config: OptimizerConfig):
    if config.initialization == "closed-form-warm-start":
        try:
            warm = fit_closed_form_c1(ds, smoothing=config.smoothing)
        except (NotC1Error, ZeroCellCountError):
            return np.zeros(objective.k)
        mu = np.where(objective.mask.mu, warm.params.mu, 0.0)
        alpha = np.where(objective.mask.alpha, warm.params.alpha, 0.0)
        return objective.pack(mu, alpha)
    return np.zeros(objective.k)


_DIVERGENCE_BOUND = 1e4
_POLISH_ROUNDS = 30


def fit_numerical(
    ds: TransactionDataset,
    mask: ParameterMask | None = None,
    config: OptimizerConfig | None = None,
) -> FitResult:
    """Gradient-based MLE over an arbitrary schedule and parameter mask.

    The requested mask is intersected with the schedule's identifiable
    mask, so only parameters with supporting observations are moved;
    everything else stays exactly 0.  Convergence means the masked
    gradient's largest entry is below ``config.gradient_tolerance`` (of
    the smoothed objective when smoothing > 0).  When the iteration budget
    runs out first, the best iterate is returned with ``converged=False``.
    Deterministic given (dataset, mask, config).

    Raises NonFiniteObjectiveError when some masked parameter has
    supporting transactions but never a purchase, which drives the
    likelihood maximizer to -infinity.
    """
    ds.require_valid()
    config = config or OptimizerConfig()
    n = ds.n
    requested = mask if mask is not None else ParameterMask.full(n)
    if requested.n != n:
        raise ValueError("mask size mismatch")
    effective = requested.intersect(identifiable_mask(ds.availability))
    patterns, pooled = _smoothed_pools(ds, config.smoothing)
    objective = _MaskedObjective(patterns, pooled, effective)

    unsupported = _unsupported_coordinates(objective)
    if unsupported:
        raise NonFiniteObjectiveError(unsupported)

    def negated(theta):
        ll, grad, _ = objective.state(theta)
        return -ll, -grad

    theta = _warm_start(ds, objective, config)
    iterations = 0
    if objective.k > 0:
        result = minimize(
            negated,
            theta,
            jac=True,
            method="L-BFGS-B",
            options=dict(
                maxiter=config.max_iterations,
                maxcor=20,
                gtol=config.gradient_tolerance,
                ftol=config.step_improvement_tolerance * 1e-4,
            ),
        )
        theta = result.x
        iterations = int(result.nit)
        theta, polish_rounds = _newton_polish(objective, theta, config, iterations)
        iterations += polish_rounds

    ll, grad, _ = objective.state(theta)
    gmax = float(np.abs(grad).max()) if objective.k else 0.0
    diverged = np.abs(theta).max(initial=0.0) > _DIVERGENCE_BOUND
    if diverged:
        mu, alpha = objective.unpack(theta)
        big = [f"mu[{j + 1}]" for j in np.flatnonzero(np.abs(mu) > _DIVERGENCE_BOUND)]
        big += [
            f"alpha[{i + 1},{j + 1}]"
            for i, j in np.argwhere(np.abs(alpha) > _DIVERGENCE_BOUND)
        ]
        raise NonFiniteObjectiveError(big)
    mu, alpha = objective.unpack(theta)
    params = ParameterSet(mu, alpha)
    return FitResult(
        params=params,
        mask=effective,
        loglik=log_likelihood(params, ds),
        method="numerical",
        converged=bool(gmax < config.gradient_tolerance),
        iterations=iterations,
    )


def _newton_polish(objective: _MaskedObjective, theta, config: OptimizerConfig, used_iters):
    """Drive the masked gradient below tolerance with CG-solved Newton steps.

    L-BFGS-B stalls once objective improvements fall under the floating
    point resolution of the (count-scaled) likelihood; the curvature
    products are exact, so a few damped Newton steps finish the job.
    """
    k = objective.k
    rounds = 0
    budget = max(config.max_iterations - used_iters, 0)
    for _ in range(min(_POLISH_ROUNDS, budget)):
        ll, grad, probs = objective.state(theta)
        gmax = np.abs(grad).max()
        if gmax < config.gradient_tolerance:
            break
        hess = LinearOperator(
            (k, k), matvec=lambda v: -objective.hvp(probs, v), dtype=np.float64
        )
        step, _ = cg(hess, grad, rtol=1e-12, atol=0.0, maxiter=10 * k)
        trial = theta + step
        ll_new, grad_new, _ = objective.state(trial)
        backtracks = 0
        while (not np.isfinite(ll_new) or ll_new < ll - 1e-9) and backtracks < 40:
            step = step * 0.5
            trial = theta + step
            ll_new, grad_new, _ = objective.state(trial)
            backtracks += 1
        if not np.isfinite(ll_new) or np.abs(grad_new).max() >= gmax:
            break
        theta = trial
        rounds += 1
    return theta, rounds


def fit_mnl(ds: TransactionDataset, config: OptimizerConfig | None = None) -> FitResult:
    """Classic MNL fit: the interaction matrix pinned at 0, mu estimated numerically."""
    return fit_numerical(ds, mask=ParameterMask.mnl(ds.n), config=config)


def supported_mask(
    ds: TransactionDataset, mask: ParameterMask | None = None, smoothing: float = 0.0
) -> ParameterMask:
    """Shrink a mask to the parameters a dataset can actually pin down.

    Intersects with the schedule's identifiable mask and additionally drops
    parameters whose supporting periods record transactions but never a
    purchase of the item (those would make the likelihood unbounded).
    fit_numerical accepts the result without raising.
    """
    requested = mask if mask is not None else ParameterMask.full(ds.n)
    effective = requested.intersect(identifiable_mask(ds.availability))
    patterns, pooled = _smoothed_pools(ds, smoothing)
    offered = patterns > 0
    kappa = pooled.sum(axis=1)
    mu_keep = effective.mu.copy()
    alpha_keep = effective.alpha.copy()
    for j in np.flatnonzero(effective.mu):
        rows = offered[:, j]
        if pooled[rows, j + 1].sum() <= 0 < kappa[rows].sum():
            mu_keep[j] = False
    for i, j in np.argwhere(effective.alpha):
        rows = offered[:, j] & ~offered[:, i]
        if pooled[rows, j + 1].sum() <= 0 < kappa[rows].sum():
            alpha_keep[i, j] = False
    return ParameterMask(mu_keep, alpha_keep)
