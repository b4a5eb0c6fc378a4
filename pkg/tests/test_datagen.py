import numpy as np
import pytest

from pada.datagen import (
    UNKNOWN_LABEL,
    CsvSchema,
    Dataset,
    SynthConfig,
    class_centers,
    load_csv,
    make_synthetic,
    rigid_shift,
    save_csv,
    subset_target_classes,
)
from pada.errors import DataFormatError, ParameterError


def plane(**kw):
    base = dict(feature_dim=2, shift_translation=(), samples_per_class_source=20, samples_per_class_target=10)
    base.update(kw)
    return SynthConfig(**base)


class TestSynthetic:
    def test_reference_task_shape(self):
        data = make_synthetic(SynthConfig())
        assert data.source_x.shape == (1600, 3)
        assert data.target_x.shape == (200, 3)
        assert data.target_class_set == (0, 1, 2, 3)

    def test_no_shift_no_noise_identical_sets(self):
        cfg = plane(num_target_classes=8, noise_std=0.0, samples_per_class_target=20)
        data = make_synthetic(cfg)
        for c in range(8):
            s = data.source_x[data.source_y == c]
            t = data.target_x[data.target_y_eval == c]
            assert np.array_equal(np.unique(s, axis=0), np.unique(t, axis=0))

    def test_zero_noise_samples_sit_on_centers(self):
        cfg = plane(noise_std=0.0, shift_angle=30.0, shift_translation=(1.0, -2.0))
        data = make_synthetic(cfg)
        centers = class_centers(cfg)
        assert np.array_equal(data.source_x, centers[data.source_y])
        moved = rigid_shift(centers, 30.0, np.array([1.0, -2.0]))
        assert np.allclose(data.target_x, moved[data.target_y_eval], atol=1e-12)

    def test_deterministic(self):
        a, b = make_synthetic(SynthConfig(seed=5)), make_synthetic(SynthConfig(seed=5))
        assert a.equals(b)
        assert a.source_x.tobytes() == b.source_x.tobytes()

    def test_seeds_differ(self):
        assert not make_synthetic(SynthConfig(seed=1)).equals(make_synthetic(SynthConfig(seed=2)))

    def test_rigid_shift_preserves_distances(self):
        x = np.random.default_rng(0).standard_normal((30, 3))
        y = rigid_shift(x, 73.0, np.array([2.0, -1.0, 4.0]))
        d = lambda m: np.linalg.norm(m[:, None] - m[None], axis=-1)
        assert np.max(np.abs(d(x) - d(y))) <= 1e-9

    def test_centers_on_circle(self):
        c = class_centers(SynthConfig(class_separation=2.0))
        assert np.allclose(np.linalg.norm(c, axis=1), 2.0)
        assert np.array_equal(c[:, 2], np.zeros(8))

    def test_one_dimensional_centers(self):
        c = class_centers(plane(feature_dim=1, num_source_classes=3, num_target_classes=2))
        assert np.array_equal(c.ravel(), [0.0, 3.25, 6.5])

    @pytest.mark.parametrize(
        "kw",
        [
            dict(num_target_classes=9),
            dict(num_target_classes=0),
            dict(shift_translation=(1.0,)),
            dict(noise_std=-1.0),
            dict(feature_dim=1, shift_angle=10.0),
        ],
    )
    def test_invalid_config(self, kw):
        with pytest.raises(ParameterError):
            plane(**kw)

    def test_train_view_hides_target_labels(self):
        view = make_synthetic(SynthConfig()).train_view()
        assert not hasattr(view, "target_y_eval")

    def test_arrays_read_only(self):
        data = make_synthetic(plane())
        with pytest.raises(ValueError):
            data.source_x[0, 0] = 1.0


class TestSubset:
    def test_full_k_unchanged(self):
        data = make_synthetic(SynthConfig())
        assert subset_target_classes(data, 4).equals(data)

    def test_k1(self):
        sub = subset_target_classes(make_synthetic(SynthConfig()), 1)
        assert set(sub.target_y_eval.tolist()) == {0}

    def test_counts_match_brute_force(self):
        data = make_synthetic(plane(num_target_classes=6))
        for k in range(1, 7):
            expected = sum(1 for y in data.target_y_eval if y in data.target_class_set[:k])
            assert subset_target_classes(data, k).target_x.shape[0] == expected

    def test_k_out_of_range(self):
        with pytest.raises(ParameterError):
            subset_target_classes(make_synthetic(SynthConfig()), 5)


class TestCsv:
    def test_round_trip_exact(self, tmp_path):
        data = make_synthetic(SynthConfig(seed=3))
        save_csv(data, tmp_path / "s.csv", tmp_path / "t.csv")
        assert load_csv(tmp_path / "s.csv", tmp_path / "t.csv").equals(data)

    def test_lf_line_endings(self, tmp_path):
        save_csv(make_synthetic(plane()), tmp_path / "s.csv", tmp_path / "t.csv")
        assert b"\r" not in (tmp_path / "s.csv").read_bytes()

    def test_malformed_row_names_line(self, tmp_path):
        save_csv(make_synthetic(plane()), tmp_path / "s.csv", tmp_path / "t.csv")
        lines = (tmp_path / "s.csv").read_text().split("\n")
        lines[4] = "1.0,abc,0"
        (tmp_path / "s.csv").write_text("\n".join(lines))
        with pytest.raises(DataFormatError) as info:
            load_csv(tmp_path / "s.csv", tmp_path / "t.csv")
        assert info.value.line == 5
        assert ":5:" in str(info.value)

    def test_wrong_field_count(self, tmp_path):
        save_csv(make_synthetic(plane()), tmp_path / "s.csv", tmp_path / "t.csv")
        with open(tmp_path / "t.csv", "a") as fh:
            fh.write("1.0,2.0,3.0,0\n")
        with pytest.raises(DataFormatError):
            load_csv(tmp_path / "s.csv", tmp_path / "t.csv")

    def test_unlabeled_target(self, tmp_path):
        data = make_synthetic(plane())
        unlabeled = Dataset(data.source_x, data.source_y, data.target_x, None, 8, (0, 1, 2, 3))
        save_csv(unlabeled, tmp_path / "s.csv", tmp_path / "t.csv")
        rows = (tmp_path / "t.csv").read_text().split("\n")[1:-1]
        assert all(r.endswith(f",{UNKNOWN_LABEL}") for r in rows)
        loaded = load_csv(tmp_path / "s.csv", tmp_path / "t.csv", CsvSchema(target_classes=(0, 1, 2, 3)))
        assert loaded.target_y_eval is None
        assert not loaded.has_target_labels
        assert loaded.target_class_set == (0, 1, 2, 3)

    def test_unlabeled_target_without_schema_assumes_all_classes(self, tmp_path):
        data = make_synthetic(plane())
        save_csv(Dataset(data.source_x, data.source_y, data.target_x, None, 8, (0,)), tmp_path / "s.csv", tmp_path / "t.csv")
        assert load_csv(tmp_path / "s.csv", tmp_path / "t.csv").target_class_set == tuple(range(8))

    def test_negative_label_in_source_rejected(self, tmp_path):
        save_csv(make_synthetic(plane()), tmp_path / "s.csv", tmp_path / "t.csv")
        text = (tmp_path / "s.csv").read_text().split("\n")
        text[1] = text[1].rsplit(",", 1)[0] + f",{UNKNOWN_LABEL}"
        (tmp_path / "s.csv").write_text("\n".join(text))
        with pytest.raises(DataFormatError) as info:
            load_csv(tmp_path / "s.csv", tmp_path / "t.csv")
        assert info.value.line == 2

    def test_bad_header(self, tmp_path):
        (tmp_path / "s.csv").write_text("x,y,label\n")
        (tmp_path / "t.csv").write_text("dim=2,classes=2\n0,0,0\n")
        with pytest.raises(DataFormatError) as info:
            load_csv(tmp_path / "s.csv", tmp_path / "t.csv")
        assert info.value.line == 1
