import numpy as np
import pytest

from halomnl import (
    AvailabilityMatrix,
    ChoiceDistribution,
    FitResult,
    ParameterMask,
    ParameterSet,
    TransactionDataset,
    validate_dataset,
)


def small_dataset(q, counts):
    return TransactionDataset(AvailabilityMatrix(np.array(q)), np.array(counts))


class TestParameterSet:
    def test_rejects_nonzero_diagonal(self):
        alpha = np.zeros((2, 2))
        alpha[0, 0] = 0.5
        with pytest.raises(ValueError, match="diagonal"):
            ParameterSet(np.zeros(2), alpha)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError, match="finite"):
            ParameterSet(np.array([np.inf, 0.0]), np.zeros((2, 2)))

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError):
            ParameterSet(np.zeros(3), np.zeros((2, 2)))

    def test_arrays_are_read_only(self):
        ps = ParameterSet.zeros(3)
        with pytest.raises(ValueError):
            ps.mu[0] = 1.0
        with pytest.raises(ValueError):
            ps.alpha[0, 1] = 1.0

    def test_defensive_copy(self):
        mu = np.zeros(2)
        alpha = np.zeros((2, 2))
        ps = ParameterSet(mu, alpha)
        mu[0] = 99.0
        assert ps.mu[0] == 0.0


class TestAvailabilityMatrix:
    def test_rejects_non_binary(self):
        with pytest.raises(ValueError, match="0 or 1"):
            AvailabilityMatrix(np.array([[0, 2]]))

    def test_row_uses_one_based_periods(self):
        q = AvailabilityMatrix(np.array([[1, 0], [0, 1]]))
        assert q.row(1).tolist() == [1, 0]
        assert q.row(2).tolist() == [0, 1]
        with pytest.raises(IndexError):
            q.row(0)

    def test_any_binary_row_is_allowed(self):
        q = AvailabilityMatrix(np.array([[0, 0], [1, 1]]))
        assert q.m == 2


class TestTransactionDataset:
    def test_shape_enforced(self):
        with pytest.raises(ValueError, match="counts must be"):
            small_dataset([[1, 1]], [[1, 2]])

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError, match="nonnegative"):
            small_dataset([[1, 1]], [[1, -2, 0]])

    def test_fractional_counts_rejected(self):
        with pytest.raises(ValueError, match="integers"):
            small_dataset([[1, 1]], [[1, 2.5, 0]])

    def test_kappa_includes_no_purchase(self):
        ds = small_dataset([[1, 1], [1, 0]], [[2, 3, 4], [1, 5, 0]])
        assert ds.kappa().tolist() == [9, 6]
        assert ds.total_transactions() == 15

    def test_select_periods_one_based(self):
        ds = small_dataset([[1, 1], [1, 0], [0, 1]], [[1, 1, 1], [2, 2, 0], [3, 0, 3]])
        sub = ds.select_periods([3, 1])
        assert sub.counts[:, 0].tolist() == [3, 1]
        with pytest.raises(IndexError):
            ds.select_periods([4])
        with pytest.raises(ValueError):
            ds.select_periods([])


class TestValidateDataset:
    def test_purchase_of_unoffered_item_is_located(self):
        # q[3][2] = 0 while counts[3][2] = 5
        q = np.ones((4, 3), dtype=int)
        q[2, 1] = 0
        counts = np.zeros((4, 4), dtype=int)
        counts[2, 2] = 5
        result = validate_dataset(TransactionDataset(AvailabilityMatrix(q), counts))
        assert not result.ok
        assert len(result.violations) == 1
        violation = result.violations[0]
        assert (violation.period, violation.item) == (3, 2)

    def test_all_zero_counts_are_ok(self):
        ds = small_dataset([[0, 1], [1, 0]], [[0, 0, 0], [0, 0, 0]])
        assert validate_dataset(ds).ok

    def test_counts_only_on_offered_items_are_ok(self):
        ds = small_dataset([[1, 0], [0, 1]], [[1, 4, 0], [2, 0, 7]])
        assert validate_dataset(ds).ok


class TestChoiceDistribution:
    def test_sum_must_be_one(self):
        with pytest.raises(ValueError, match="sum to 1"):
            ChoiceDistribution(np.array([0.5, 0.4]))

    def test_prob_accessor(self):
        dist = ChoiceDistribution(np.array([0.25, 0.75]))
        assert dist.prob(0) == 0.25
        assert dist.prob(1) == 0.75
        with pytest.raises(IndexError):
            dist.prob(2)


class TestParameterMask:
    def test_full_and_mnl(self):
        full = ParameterMask.full(3)
        assert full.count == 3 + 6
        mnl = ParameterMask.mnl(3)
        assert mnl.count == 3
        assert not mnl.alpha.any()

    def test_diagonal_cannot_be_masked(self):
        with pytest.raises(ValueError, match="diagonal"):
            ParameterMask(np.ones(2, bool), np.ones((2, 2), bool))

    def test_intersect(self):
        a = ParameterMask.full(2)
        b = ParameterMask.mnl(2)
        assert a.intersect(b).count == 2


class TestFitResult:
    def test_unmasked_parameters_must_be_zero(self):
        params = ParameterSet(np.array([0.5, 0.0]), np.zeros((2, 2)))
        mask = ParameterMask(np.array([False, True]), np.zeros((2, 2), bool))
        with pytest.raises(ValueError, match="unmasked"):
            FitResult(params, mask, -1.0, "numerical", True, 3)

    def test_converged_requires_finite_loglik(self):
        params = ParameterSet.zeros(2)
        mask = ParameterMask.full(2)
        with pytest.raises(ValueError, match="finite"):
            FitResult(params, mask, float("nan"), "numerical", True, 3)
        # not converged may carry a non-finite loglik
        FitResult(params, mask, float("-inf"), "numerical", False, 3)
