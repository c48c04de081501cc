import numpy as np
import pytest

from sketchmatch.config import RunConfig
from sketchmatch.errors import ConfigError
from sketchmatch.model_io import FreezePlan, load_weights, tensor_checksums
from sketchmatch.training import (METRIC_COLUMNS, TrainingData, batch_schedule, build_models, models_from_params,
                                  step_learning_rate, train)
from sketchmatch.synthetic import make_pairs


def small_config(**kw):
    base = dict(image_size=32, max_steps=3, batch_size=6, lr=1e-2)
    base.update(kw)
    return RunConfig.tiny(**base)


@pytest.fixture(scope="module")
def data():
    p, s, i, a = make_pairs(3, 2, size=32, seed=0, n_attributes=2)
    return TrainingData(p, s, i, a)


def test_metrics_rows(data):
    r = train(small_config(), data)
    assert [m["step"] for m in r.metrics] == [1, 2, 3]
    assert set(r.metrics[0]) == set(METRIC_COLUMNS)
    assert all(np.isfinite(v) for m in r.metrics for v in m.values())


def test_byte_identical_runs(data, tmp_path):
    train(small_config(save_every=2), data, out_dir=tmp_path / "a")
    train(small_config(save_every=2), data, out_dir=tmp_path / "b")
    for name in ("metrics.csv", "model.fsrw", "model_step000002.fsrw"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_seed_changes_run(data):
    a = train(small_config(seed=0), data).metrics
    b = train(small_config(seed=1), data).metrics
    assert a[-1]["total_G"] != b[-1]["total_G"]


def test_no_triplet_means_no_mining(data):
    r = train(small_config(lambda_trip=0.0, batch_size=2), data)
    assert r.mining_calls == 0
    assert all(m["L_trip"] == 0.0 for m in r.metrics)


def test_mining_counted_per_anchor(data):
    assert train(small_config(), data).mining_calls == 3 * 6


def test_single_identity_batch_rejected():
    p, s, _, _ = make_pairs(1, 2, size=32, seed=0)
    with pytest.raises(ConfigError, match="two identities"):
        train(small_config(batch_size=2), TrainingData(p, s, [0, 0]))


def test_frozen_weights_stay_put(data):
    models = build_models(small_config(), data.n_attributes)
    FreezePlan.freezing(["gen.enc", "disc.trunk0"]).apply(models.generator.params)
    FreezePlan.freezing(["disc.trunk0"]).apply(models.discriminator.params)
    before = tensor_checksums(models.params())
    train(small_config(), data, models=models)
    after = tensor_checksums(models.params())
    for name in before:
        frozen = name.startswith(("gen.enc", "disc.trunk0"))
        assert (before[name] == after[name]) == frozen, name


def test_generator_step_leaves_discriminator_alone(data):
    # with every discriminator tensor frozen only the generator may move
    models = build_models(small_config(), data.n_attributes)
    models.discriminator.params.freeze()
    before = tensor_checksums(models.discriminator.params)
    train(small_config(), data, models=models)
    assert tensor_checksums(models.discriminator.params) == before


def test_archive_rebuilds_models(data, tmp_path):
    r = train(small_config(), data, out_dir=tmp_path)
    rebuilt = models_from_params(load_weights(tmp_path / "model.fsrw"))
    assert rebuilt.generator.channels == r.models.generator.channels
    assert tensor_checksums(rebuilt.params()) == tensor_checksums(r.models.params())


def test_wrong_image_size(data):
    with pytest.raises(ConfigError):
        train(small_config(image_size=64), data)


def test_patch_mode_trains(data):
    r = train(small_config(patch_mode=True, patch_size=16, patch_stride=16, max_steps=2), data)
    assert len(r.metrics) == 2


def test_float32_run(data):
    r = train(small_config(precision="f32", max_steps=2), data)
    assert r.models.generator.params["gen.out.w"].dtype == np.float32


def test_augment_run(data):
    assert len(train(small_config(augment=True, max_steps=2), data).metrics) == 2


class TestSchedule:
    def test_epochs_cover_every_pair(self):
        b = batch_schedule(5, 2, 2, 0, seed=0)
        assert len(b) == 6
        assert sorted(np.concatenate(b[:3]).tolist()) == list(range(5))

    def test_max_steps_truncates_and_extends(self):
        assert len(batch_schedule(4, 2, 10, 3, 0)) == 3
        assert len(batch_schedule(4, 2, 1, 7, 0)) == 7

    def test_warmup_then_constant(self):
        c = RunConfig(warmup_steps=4)
        assert [step_learning_rate(c, 1.0, s, 10) for s in (1, 2, 4, 5, 10)] == [0.25, 0.5, 1.0, 1.0, 1.0]

    def test_cosine(self):
        c = RunConfig(lr_schedule="cosine")
        assert step_learning_rate(c, 2.0, 1, 5) == 2.0
        assert step_learning_rate(c, 2.0, 3, 5) == pytest.approx(2.0 * 0.5 * (1 + np.cos(np.pi * 2 / 5)))
        assert step_learning_rate(c, 2.0, 5, 5) == pytest.approx(2.0 * 0.5 * (1 + np.cos(np.pi * 4 / 5)))


def test_training_data_validation():
    with pytest.raises(ValueError):
        TrainingData(np.zeros((2, 1, 8, 8)), np.zeros((2, 1, 8, 4)), [0, 1])
    with pytest.raises(ValueError):
        TrainingData(np.zeros((2, 1, 8, 8)), np.zeros((2, 1, 8, 8)), [0])
