import hashlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pada.datagen import Dataset, SynthConfig, make_synthetic
from pada.errors import ParameterError, UnavailableMetricError
from pada.evaluation import (
    SWEEP_COLUMNS,
    cell_seed,
    evaluate,
    negative_transfer_margin,
    run_cell,
    sweep_target_classes,
    weight_stats,
    write_eval_csv,
    write_sweep_csv,
)
from pada.model import ModelConfig, NetworkParams, init_params
from pada.train import Mode, TrainConfig
from pada.weighting import ClassWeights

SMALL = SynthConfig(num_target_classes=8, samples_per_class_source=8, samples_per_class_target=6)


def always_class_zero(k=3, d=2):
    # huge bias on class 0, zero weights elsewhere
    bias = np.zeros((1, k))
    bias[0, 0] = 10.0
    return NetworkParams([(np.zeros((d, 2)), np.zeros((1, 2)))], (np.zeros((2, k)), bias))


class TestEvaluate:
    def test_constant_predictor(self):
        x = np.random.default_rng(0).standard_normal((5, 2))
        data = Dataset(x, np.zeros(5), x, np.zeros(5), 3, (0,))
        report = evaluate(always_class_zero(), data)
        assert report.target_accuracy == 1.0
        assert report.per_class_target_accuracy == {0: 1.0}

    def test_structure_on_random_params(self):
        rng = np.random.default_rng(1)
        x = np.vstack([rng.normal(-3, 1, (20, 2)), rng.normal(3, 1, (20, 2))])
        y = np.repeat([0, 1], 20)
        data = Dataset(x, y, x, y, 2, (0, 1))
        report = evaluate(init_params(ModelConfig(input_dim=2, num_source_classes=2, seed=3)), data)
        assert 0.0 <= report.target_accuracy <= 1.0
        assert report.confusion.sum() == 40
        assert np.array_equal(report.confusion.sum(axis=1), [20, 20])

    @pytest.mark.parametrize("seed", range(5))
    def test_accuracy_is_confusion_trace(self, seed):
        data = make_synthetic(SMALL)
        report = evaluate(init_params(ModelConfig(seed=seed)), data)
        assert abs(report.target_accuracy - np.trace(report.confusion) / report.confusion.sum()) <= 1e-15

    def test_unknown_labels_skipped(self):
        x = np.random.default_rng(2).standard_normal((4, 2))
        data = Dataset(x, np.zeros(4), x, [0, -1, 0, -1], 3, (0,))
        assert evaluate(always_class_zero(), data).confusion.sum() == 2

    def test_unavailable_without_labels(self):
        x = np.zeros((2, 2))
        with pytest.raises(UnavailableMetricError):
            evaluate(always_class_zero(), Dataset(x, [0, 0], x, None, 3, (0,)))
        with pytest.raises(UnavailableMetricError):
            evaluate(always_class_zero(), Dataset(x, [0, 0], x, [-1, -1], 3, (0,)))

    def test_margin(self):
        a = evaluate(always_class_zero(), Dataset(np.zeros((2, 2)), [0, 0], np.zeros((2, 2)), [0, 0], 3, (0,)))
        assert negative_transfer_margin(a, a) == 0.0

    def test_eval_csv(self, tmp_path):
        x = np.zeros((2, 2))
        write_eval_csv(evaluate(always_class_zero(), Dataset(x, [0, 0], x, [0, 0], 3, (0,))), tmp_path / "e.csv")
        lines = (tmp_path / "e.csv").read_text().splitlines()
        assert lines[:3] == ["metric,value", "target_acc,1", "src_acc,1"]
        assert "confusion_0_0,2" in lines


class TestWeightStats:
    def test_all_shared(self):
        s = weight_stats(ClassWeights([1.0, 0.5], True), [0, 1])
        assert s.mean_outlier == 0.0 and s.num_outlier == 0

    def test_split(self):
        s = weight_stats(ClassWeights([1, 1, 0, 0], True), {0, 1})
        assert (s.mean_shared, s.mean_outlier) == (1.0, 0.0)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=10), st.data())
    def test_sums_partition_total(self, gamma, data):
        shared = data.draw(st.sets(st.integers(0, len(gamma) - 1), min_size=1))
        s = weight_stats(ClassWeights(gamma, True), shared)
        assert abs(s.sum_shared + s.sum_outlier - sum(gamma)) <= 1e-12

    def test_invalid_shared(self):
        with pytest.raises(ParameterError):
            weight_stats(ClassWeights([1.0], True), [])
        with pytest.raises(ParameterError):
            weight_stats(ClassWeights([1.0], True), [1])


class TestSweep:
    def test_cell_seed_stable(self):
        # first 8 bytes of sha256(b"0:4:pada"), shifted right by one
        digest = hashlib.sha256(b"0:4:pada").digest()
        assert cell_seed(0, 4, "pada") == int.from_bytes(digest[:8], "big") >> 1
        assert cell_seed(0, 4, Mode.PADA) == cell_seed(0, 4, "pada")
        assert cell_seed(0, 4, "pada") != cell_seed(0, 4, "dann")
        assert 0 <= cell_seed(5, 2, "dann") < 2**63

    def test_single_row(self):
        rows = sweep_target_classes(make_synthetic(SMALL), [8], ModelConfig(), [TrainConfig(epochs=1)])
        assert len(rows) == 1 and rows[0].status == "ok"

    def test_row_order_and_determinism(self):
        data = make_synthetic(SMALL)
        configs = [TrainConfig(mode=Mode.DANN, epochs=1), TrainConfig(mode=Mode.PADA, epochs=1)]
        a = sweep_target_classes(data, [4, 2], ModelConfig(), configs)
        b = sweep_target_classes(data, [4, 2], ModelConfig(), configs)
        assert [(r.k, r.mode) for r in a] == [(4, "dann"), (4, "pada"), (2, "dann"), (2, "pada")]
        assert [(r.target_accuracy, r.seed) for r in a] == [(r.target_accuracy, r.seed) for r in b]

    def test_parallel_matches_serial(self):
        data = make_synthetic(SMALL)
        configs = [TrainConfig(mode=Mode.DANN, epochs=1), TrainConfig(mode=Mode.PADA, epochs=1)]
        serial = sweep_target_classes(data, [4], ModelConfig(), configs, jobs=1)
        parallel = sweep_target_classes(data, [4], ModelConfig(), configs, jobs=2)
        assert [r.target_accuracy for r in serial] == [r.target_accuracy for r in parallel]

    def test_failed_cell_recorded(self):
        row = run_cell(make_synthetic(SMALL), 4, ModelConfig(input_dim=2), TrainConfig(epochs=1), seed=1)
        assert row.status.startswith("error") and np.isnan(row.target_accuracy)

    def test_invalid_ks(self):
        with pytest.raises(ParameterError):
            sweep_target_classes(make_synthetic(SMALL), [], ModelConfig(), [TrainConfig()])
        with pytest.raises(ParameterError):
            sweep_target_classes(make_synthetic(SMALL), [9], ModelConfig(), [TrainConfig()])

    def test_sweep_csv(self, tmp_path):
        rows = sweep_target_classes(make_synthetic(SMALL), [2], ModelConfig(), [TrainConfig(epochs=1)])
        write_sweep_csv(rows, tmp_path / "s.csv")
        lines = (tmp_path / "s.csv").read_text().split("\n")
        assert lines[0] == ",".join(SWEEP_COLUMNS)
        assert lines[1].startswith("2,pada,") and lines[1].endswith(",ok")
