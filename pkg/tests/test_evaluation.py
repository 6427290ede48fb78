import numpy as np
import pytest

from conftest import random_dataset, random_params
from halomnl import (
    AvailabilityMatrix,
    NoMatchingPeriodsError,
    ParameterMask,
    ParameterSet,
    TransactionDataset,
    ZeroProbabilityChoiceError,
    aic,
    bic,
    bootstrap_pvalue,
    chi_square_gof,
    compare_models,
    fit_closed_form_c1,
    fit_mnl,
    log_likelihood,
    make_c1_schedule,
    recovery_error,
    reward_index,
    simulate_halo,
    SimulationPlan,
    split_periods,
)
from halomnl.core import FitResult


class TestInformationCriteria:
    def test_aic_arithmetic(self):
        assert aic(-100.0, 5) == 210.0
        assert aic(-100.0, 0) == 200.0

    def test_nested_equal_loglik_penalty(self):
        assert aic(-50.0, 8) - aic(-50.0, 5) == 2 * 3

    def test_bic_arithmetic(self):
        assert bic(-100.0, 5, 100) == pytest.approx(200 + 5 * np.log(100), abs=1e-12)
        assert bic(-100.0, 5, 1) == 200.0

    def test_input_validation(self):
        with pytest.raises(ValueError):
            aic(float("inf"), 2)
        with pytest.raises(ValueError):
            bic(-1.0, 2, 0)


class TestRewardIndex:
    def test_single_half_probability_choice(self):
        # one transaction with predicted probability 0.5
        params = ParameterSet.zeros(1)  # P(item 1) = P(no purchase) = 1/2
        ds = TransactionDataset(AvailabilityMatrix(np.array([[1]])), np.array([[0, 1]]))
        assert reward_index(params, ds) == pytest.approx(np.log(2), abs=1e-12)

    def test_certain_predictions_score_zero(self):
        # empty offer set: no purchase is predicted with probability 1
        params = ParameterSet.zeros(2)
        ds = TransactionDataset(AvailabilityMatrix(np.array([[0, 0]])), np.array([[9, 0, 0]]))
        assert reward_index(params, ds) == 0.0

    def test_equals_negated_log_likelihood(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            ds = random_dataset(rng)
            params = random_params(rng, ds.n)
            assert reward_index(params, ds) == -log_likelihood(params, ds)

    def test_structurally_impossible_choice_raises(self):
        params = ParameterSet.zeros(2)
        ds = TransactionDataset(AvailabilityMatrix(np.array([[1, 0]])), np.array([[0, 0, 2]]))
        with pytest.raises(ZeroProbabilityChoiceError) as err:
            reward_index(params, ds)
        assert (err.value.period, err.value.item) == (1, 2)


def uniform_gof_dataset(counts_per_cell):
    """One full-offer period over 2 items with given (z0, z1, z2)."""
    q = AvailabilityMatrix(np.array([[1, 1]]))
    return TransactionDataset(q, np.array([counts_per_cell]))


class TestChiSquare:
    def test_exact_match_scores_zero(self):
        # uniform model, observed (12, 12, 12): expected equals observed
        params = ParameterSet.zeros(2)
        result = chi_square_gof(params, uniform_gof_dataset([12, 12, 12]), [1, 1])
        assert result.statistic == pytest.approx(0.0, abs=1e-20)
        assert result.applicable
        assert result.p_value == pytest.approx(1.0)
        assert result.dof == 2

    def test_applicability_rule(self):
        # any expected cell at or under 10 disables the analytic p-value
        params = ParameterSet.zeros(2)
        result = chi_square_gof(params, uniform_gof_dataset([10, 10, 10]), [1, 1])
        assert not result.applicable
        assert result.p_value is None

    def test_no_matching_periods(self):
        params = ParameterSet.zeros(2)
        with pytest.raises(NoMatchingPeriodsError):
            chi_square_gof(params, uniform_gof_dataset([12, 12, 12]), [0, 1])

    def test_pooling_invariance(self):
        # splitting matching periods into sub-pools and re-pooling cannot
        # change the statistic
        params = random_params(np.random.default_rng(1), 2)
        q = AvailabilityMatrix(np.array([[1, 1]] * 4))
        counts = np.array([[30, 20, 10], [5, 10, 15], [8, 8, 8], [1, 2, 3]])
        pooled = TransactionDataset(
            AvailabilityMatrix(np.array([[1, 1]])), counts.sum(axis=0, keepdims=True)
        )
        split = TransactionDataset(q, counts)
        a = chi_square_gof(params, pooled, [1, 1])
        b = chi_square_gof(params, split, [1, 1])
        assert a.statistic == b.statistic
        assert a.dof == b.dof

    def test_degenerate_certain_outcome(self):
        # the model puts (almost machine-) probability one on item 1
        params = ParameterSet(np.array([40.0]), np.zeros((1, 1)))
        ds = TransactionDataset(AvailabilityMatrix(np.array([[1]])), np.array([[0, 50]]))
        result = chi_square_gof(params, ds, [1])
        assert result.statistic < 1e-12
        result = bootstrap_pvalue(params, ds, [1], resamples=20, seed=0)
        assert result.bootstrap_median_p > 1 - 1e-6


class TestBootstrap:
    def make_case(self, seed=0):
        rng = np.random.default_rng(seed)
        params = random_params(rng, 3)
        schedule = make_c1_schedule(3, 2, 2)
        ds = simulate_halo(params, SimulationPlan(schedule, arrival_rate=300.0, seed=seed))
        return params, ds

    def test_single_resample_is_its_own_median(self):
        params, ds = self.make_case(2)
        one = bootstrap_pvalue(params, ds, [1, 1, 1], resamples=1, seed=5)
        assert one.bootstrap_median_p is not None

    def test_deterministic_given_seed(self):
        params, ds = self.make_case(3)
        a = bootstrap_pvalue(params, ds, [1, 1, 1], resamples=64, seed=9)
        b = bootstrap_pvalue(params, ds, [1, 1, 1], resamples=64, seed=9)
        assert a.bootstrap_median_p == b.bootstrap_median_p
        c = bootstrap_pvalue(params, ds, [1, 1, 1], resamples=64, seed=10)
        assert c.bootstrap_median_p != a.bootstrap_median_p

    def test_median_is_one_of_the_resampled_values(self):
        # recompute the resample p-values independently and check membership
        from scipy.stats import chi2

        params, ds = self.make_case(4)
        signature = [1, 1, 1]
        resamples, seed = 10, 17
        result = bootstrap_pvalue(params, ds, signature, resamples=resamples, seed=seed)
        rows = (ds.availability.q == np.array(signature)).all(axis=1)
        observed = ds.counts[rows].sum(axis=0).astype(float)
        total = int(observed.sum())
        from halomnl import choice_probabilities

        probs = choice_probabilities(params, signature).probs
        expected = total * probs
        live = expected > 0
        pvals = []
        for b in range(resamples):
            rng = np.random.default_rng([seed, b])
            redraw = rng.multinomial(total, observed / observed.sum()).astype(float)
            stat = float((((redraw - expected) ** 2)[live] / expected[live]).sum())
            pvals.append(float(chi2.sf(stat, result.dof)))
        assert result.bootstrap_median_p in pvals
        assert result.bootstrap_median_p == sorted(pvals)[(resamples - 1) // 2]

    def test_requires_at_least_one_resample(self):
        params, ds = self.make_case(5)
        with pytest.raises(ValueError):
            bootstrap_pvalue(params, ds, [1, 1, 1], resamples=0)


class TestCompareModels:
    def test_identical_fits_give_zero_deltas(self):
        rng = np.random.default_rng(6)
        schedule = make_c1_schedule(3, 2, 2)
        truth = random_params(rng, 3)
        ds = simulate_halo(truth, SimulationPlan(schedule, arrival_rate=200.0, seed=1))
        fit = fit_closed_form_c1(ds)
        report = compare_models([fit, fit], ds, labels=["a", "b"])
        delta = report.deltas[0]
        assert delta.delta_loglik == 0.0
        assert delta.delta_aic == 0.0
        assert delta.delta_bic == 0.0

    def test_delta_antisymmetry(self):
        rng = np.random.default_rng(7)
        schedule = make_c1_schedule(3, 2, 2)
        ds = simulate_halo(random_params(rng, 3), SimulationPlan(schedule, 200.0, seed=2))
        halo = fit_closed_form_c1(ds)
        mnl = fit_mnl(ds)
        forward = compare_models([mnl, halo], ds, labels=["mnl", "halo"]).deltas[0]
        backward = compare_models([halo, mnl], ds, labels=["halo", "mnl"]).deltas[0]
        assert forward.delta_loglik == -backward.delta_loglik
        assert forward.delta_aic == -backward.delta_aic

    def test_parameter_counts_for_nine_products(self):
        # fully identifiable halo model on 9 products: 9 + 9*8 parameters; MNL: 9
        n = 9
        params = ParameterSet.zeros(n)
        full_fit = FitResult(params, ParameterMask.full(n), -1.0, "numerical", True, 0)
        mnl_fit = FitResult(params, ParameterMask.mnl(n), -1.0, "numerical", True, 0)
        q = AvailabilityMatrix(np.ones((1, n), dtype=np.int8))
        counts = np.zeros((1, n + 1), dtype=np.int64)
        counts[0, 0] = 4
        report = compare_models([full_fit, mnl_fit], TransactionDataset(q, counts))
        assert report.scores[0].d == 81
        assert report.scores[1].d == 9

    def test_identities_recompute(self):
        rng = np.random.default_rng(8)
        schedule = make_c1_schedule(3, 2, 2)
        ds = simulate_halo(random_params(rng, 3), SimulationPlan(schedule, 150.0, seed=3))
        halo = fit_closed_form_c1(ds)
        mnl = fit_mnl(ds)
        report = compare_models([mnl, halo], ds, labels=["mnl", "halo"])
        for score in report.scores:
            assert score.aic == aic(score.loglik, score.d)
            assert score.bic == bic(score.loglik, score.d, report.n)

    def test_training_dominance_makes_delta_nonpositive(self):
        rng = np.random.default_rng(9)
        for seed in range(5):
            schedule = make_c1_schedule(3, 2, 2)
            ds = simulate_halo(random_params(rng, 3), SimulationPlan(schedule, 250.0, seed=seed))
            halo = fit_closed_form_c1(ds)
            mnl = fit_mnl(ds)
            report = compare_models([mnl, halo], ds, labels=["mnl", "halo"])
            assert report.deltas[0].delta_loglik <= 1e-9


class TestRecoveryError:
    def test_exact_recovery_is_zero(self):
        params = random_params(np.random.default_rng(10), 3)
        fit = FitResult(params, ParameterMask.full(3), -1.0, "numerical", True, 0)
        report = recovery_error(params, fit)
        assert (report.mu_error[~report.mu_is_absolute] == 0).all()
        assert (report.alpha_error == 0).all()

    def test_relative_error_arithmetic(self):
        truth = ParameterSet(np.array([-0.511]), np.zeros((1, 1)))
        est = ParameterSet(np.array([-0.512]), np.zeros((1, 1)))
        fit = FitResult(est, ParameterMask.full(1), -1.0, "numerical", True, 0)
        report = recovery_error(truth, fit)
        assert report.mu_error[0] == pytest.approx(0.001 / 0.511, rel=1e-9)
        assert not report.mu_is_absolute[0]

    def test_zero_truth_is_flagged_absolute(self):
        truth = ParameterSet.zeros(1)
        est = ParameterSet(np.array([0.25]), np.zeros((1, 1)))
        fit = FitResult(est, ParameterMask.full(1), -1.0, "numerical", True, 0)
        report = recovery_error(truth, fit)
        assert report.mu_is_absolute[0]
        assert report.mu_error[0] == 0.25


class TestSplit:
    def test_split_is_deterministic_and_partitions(self):
        rng = np.random.default_rng(11)
        ds = random_dataset(rng, n=3, periods=10)
        train1, test1, tr1, te1 = split_periods(ds, train_size=6, seed=4)
        train2, test2, tr2, te2 = split_periods(ds, train_size=6, seed=4)
        assert tr1 == tr2 and te1 == te2
        assert sorted(tr1 + te1) == list(range(1, 11))
        assert train1.m == 6 and test1.m == 4

    def test_full_fraction_rejected(self):
        ds = random_dataset(np.random.default_rng(12), n=2, periods=5)
        with pytest.raises(ValueError, match="test set"):
            split_periods(ds, train_fraction=1.0)
        with pytest.raises(ValueError):
            split_periods(ds, train_size=5)
        with pytest.raises(ValueError):
            split_periods(ds)
