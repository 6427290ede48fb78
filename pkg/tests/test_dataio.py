import numpy as np
import pytest

from conftest import random_dataset, random_params
from halomnl import ParameterMask, validate_dataset
from halomnl.dataio import (
    DataFormatError,
    load_dataset,
    read_parameter_file,
    read_schedule_csv,
    read_transactions_csv,
    read_transactions_single_file,
    sha256_file,
    write_parameter_file,
    write_schedule_csv,
    write_transactions_csv,
)


class TestParameterFiles:
    def test_round_trip_is_bit_exact(self, tmp_path):
        # arbitrary doubles must survive the 17-significant-digit text form
        rng = np.random.default_rng(0)
        params = random_params(rng, 5, scale=np.pi)
        path = tmp_path / "params.json"
        write_parameter_file(path, params)
        loaded, mask = read_parameter_file(path)
        assert mask is None
        assert np.array_equal(loaded.mu, params.mu)
        assert np.array_equal(loaded.alpha, params.alpha)

    def test_round_trip_with_mask(self, tmp_path):
        params = random_params(np.random.default_rng(1), 3)
        mask = ParameterMask(
            np.array([True, False, True]), np.triu(np.ones((3, 3), bool), k=1)
        )
        path = tmp_path / "params.json"
        write_parameter_file(path, params, mask)
        _, loaded = read_parameter_file(path)
        assert np.array_equal(loaded.mu, mask.mu)
        assert np.array_equal(loaded.alpha, mask.alpha)

    def test_bad_json_reports_line(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{\n  "n": 2,\n  "mu": [0, 0\n}\n')
        with pytest.raises(DataFormatError, match="broken.json:"):
            read_parameter_file(path)

    def test_shape_mismatch_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"n": 2, "mu": [0.0], "alpha": [[0.0, 0.0], [0.0, 0.0]]}')
        with pytest.raises(DataFormatError, match="shapes"):
            read_parameter_file(path)


class TestScheduleFiles:
    def test_round_trip(self, tmp_path):
        ds = random_dataset(np.random.default_rng(2), n=4, periods=6)
        path = tmp_path / "schedule.csv"
        write_schedule_csv(path, ds.availability)
        loaded, ids = read_schedule_csv(path)
        assert np.array_equal(loaded.q, ds.availability.q)
        assert ids == tuple(range(1, 7))

    def test_malformed_width_names_line(self, tmp_path):
        path = tmp_path / "schedule.csv"
        path.write_text("period_id,a1,a2\n1,1,0\n2,1\n")
        with pytest.raises(DataFormatError, match="schedule.csv:3"):
            read_schedule_csv(path)

    def test_duplicate_period_rejected(self, tmp_path):
        path = tmp_path / "schedule.csv"
        path.write_text("period_id,a1\n1,1\n1,0\n")
        with pytest.raises(DataFormatError, match="duplicate"):
            read_schedule_csv(path)

    def test_non_binary_rejected(self, tmp_path):
        path = tmp_path / "schedule.csv"
        path.write_text("period_id,a1\n1,2\n")
        with pytest.raises(DataFormatError, match="0 or 1"):
            read_schedule_csv(path)


class TestTransactionFiles:
    def test_round_trip(self, tmp_path):
        ds = random_dataset(np.random.default_rng(3), n=3, periods=5)
        tx = tmp_path / "transactions.csv"
        sched = tmp_path / "schedule.csv"
        write_schedule_csv(sched, ds.availability)
        write_transactions_csv(tx, ds)
        loaded, _ = load_dataset(tx, sched)
        assert np.array_equal(loaded.counts, ds.counts)
        assert np.array_equal(loaded.availability.q, ds.availability.q)

    def test_repeated_cells_aggregate(self, tmp_path):
        sched = tmp_path / "schedule.csv"
        sched.write_text("period_id,a1\n7,1\n")
        tx = tmp_path / "transactions.csv"
        tx.write_text("period_id,item_id,count\n7,1,2\n7,1,3\n7,0,1\n")
        availability, ids = read_schedule_csv(sched)
        ds = read_transactions_csv(tx, availability, ids)
        assert ds.counts.tolist() == [[1, 5]]

    def test_unknown_period_names_line(self, tmp_path):
        sched = tmp_path / "schedule.csv"
        sched.write_text("period_id,a1\n1,1\n")
        tx = tmp_path / "transactions.csv"
        tx.write_text("period_id,item_id,count\n2,1,1\n")
        availability, ids = read_schedule_csv(sched)
        with pytest.raises(DataFormatError, match="transactions.csv:2"):
            read_transactions_csv(tx, availability, ids)

    def test_item_out_of_range(self, tmp_path):
        sched = tmp_path / "schedule.csv"
        sched.write_text("period_id,a1\n1,1\n")
        tx = tmp_path / "transactions.csv"
        tx.write_text("period_id,item_id,count\n1,2,1\n")
        availability, ids = read_schedule_csv(sched)
        with pytest.raises(DataFormatError, match="item_id"):
            read_transactions_csv(tx, availability, ids)


class TestSingleFileIngestion:
    def test_aggregation_and_inference(self, tmp_path):
        path = tmp_path / "events.csv"
        path.write_text(
            "period_id,offered_items,chosen_item\n"
            "1,1;2;3,2\n"
            "1,1;2;3,2\n"
            "1,1;2;3,0\n"
            "2,2;3,3\n"
            "2,2;3,0\n"
        )
        ds, ids = read_transactions_single_file(path)
        assert ids == (1, 2)
        assert ds.n == 3
        assert ds.availability.q.tolist() == [[1, 1, 1], [0, 1, 1]]
        assert ds.counts.tolist() == [[1, 0, 2, 0], [1, 0, 0, 1]]
        assert validate_dataset(ds).ok

    def test_inconsistent_offer_set_names_line(self, tmp_path):
        path = tmp_path / "events.csv"
        path.write_text(
            "period_id,offered_items,chosen_item\n1,1;2,1\n1,1;3,1\n"
        )
        with pytest.raises(DataFormatError, match="events.csv:3"):
            read_transactions_single_file(path)

    def test_chosen_item_must_be_offered(self, tmp_path):
        path = tmp_path / "events.csv"
        path.write_text("period_id,offered_items,chosen_item\n1,1;2,3\n")
        with pytest.raises(DataFormatError, match="not in the offer set"):
            read_transactions_single_file(path)

    def test_no_purchase_rows_allowed(self, tmp_path):
        path = tmp_path / "events.csv"
        path.write_text("period_id,offered_items,chosen_item\n1,1,0\n")
        ds, _ = read_transactions_single_file(path)
        assert ds.counts.tolist() == [[1, 0]]


class TestChecksums:
    def test_sha256_matches_content(self, tmp_path):
        path = tmp_path / "x.txt"
        path.write_text("halo")
        import hashlib

        assert sha256_file(path) == hashlib.sha256(b"halo").hexdigest()
