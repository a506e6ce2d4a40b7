"""Tests for anchored-ensemble training, prediction, and persistence."""

import json
import os

import numpy as np
import pytest

from driftae.ensemble import (AnchorSet, EnsembleModel, PredictionRecord,
                              TrainConfig, anchor_penalty, gaussian_nll,
                              load_model, predict, sample_anchors, total_loss,
                              train_ensemble, train_member)
from driftae.errors import (ConfigError, DimensionError, NumericError,
                            PersistenceError)
from driftae.network import NetworkSpec, ParameterSet, init_params, init_std

SPEC = NetworkSpec((4, 3, 2, 3, 4))
SMALL = TrainConfig(m=3, lam=0.01, epochs=5, batch_size=8, seed=0)


def toy_data(n=24, d=4, seed=0):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(n, d))


# ---------------------------------------------------------------------------
# loss terms

def test_nll_perfect_fit_is_zero():
    x = toy_data(5)
    assert gaussian_nll(x, x, np.zeros_like(x)) == 0.0


def test_nll_single_unit_error():
    # one sample, one feature, error 1, log_var 0: 0.5 * 1 + 0 = 0.5
    x = np.array([[1.0]])
    mean = np.array([[0.0]])
    assert gaussian_nll(x, mean, np.zeros((1, 1))) == pytest.approx(0.5)


def test_nll_matches_elementwise_loop():
    rng = np.random.default_rng(42)
    x = rng.normal(size=(3, 4))
    mean = rng.normal(size=(3, 4))
    log_var = rng.normal(size=(3, 4))
    total = 0.0
    for i in range(3):
        for d in range(4):
            lv = log_var[i, d]
            total += (x[i, d] - mean[i, d]) ** 2 / (2 * np.exp(lv)) + lv / 2
    assert gaussian_nll(x, mean, log_var) == pytest.approx(total / 3, abs=1e-12)


def test_nll_zero_log_var_reduces_to_half_sse():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(6, 4))
    mean = rng.normal(size=(6, 4))
    sse = ((x - mean) ** 2).sum(axis=1).mean()
    got = gaussian_nll(x, mean, np.zeros_like(x))
    assert abs(got - 0.5 * sse) < 1e-12


def test_nll_shape_and_finite_checks():
    x = toy_data(4)
    with pytest.raises(DimensionError):
        gaussian_nll(x, x[:3], np.zeros_like(x))
    with pytest.raises(DimensionError):
        gaussian_nll(np.zeros((0, 4)), np.zeros((0, 4)), np.zeros((0, 4)))
    bad = x.copy()
    bad[0, 0] = np.nan
    with pytest.raises(NumericError):
        gaussian_nll(x, bad, np.zeros_like(x))


def test_anchor_penalty_hand_example():
    anchor = init_params(SPEC, seed=0).flatten()
    shifted = anchor.copy()
    shifted[0] += 1.0
    shifted[1] += 2.0
    params = ParameterSet(SPEC, shifted)
    # lam/n * sum of squared offsets = 2/4 * (1 + 4) = 2.5
    assert anchor_penalty(params, anchor, lam=2.0, n_train=4) == pytest.approx(2.5)


def test_anchor_penalty_zero_cases():
    anchor = init_params(SPEC, seed=0).flatten()
    at_anchor = ParameterSet(SPEC, anchor.copy())
    assert anchor_penalty(at_anchor, anchor, lam=3.0, n_train=10) == 0.0
    away = ParameterSet(SPEC, anchor + 1.0)
    assert anchor_penalty(away, anchor, lam=0.0, n_train=10) == 0.0


def test_total_loss_additive_and_monotone_in_lambda():
    from driftae.network import forward
    rng = np.random.default_rng(3)
    x = rng.normal(size=(6, 4))
    params = init_params(SPEC, seed=3)
    anchor = init_params(SPEC, seed=4).flatten()
    outputs = forward(params, x)
    nll = gaussian_nll(x, outputs["mean"], outputs["log_var"])
    values = [total_loss(x, outputs, params, anchor, lam=lam, n_train=6)
              for lam in (0.0, 0.1, 1.0, 10.0)]
    assert values[0] == pytest.approx(nll)
    for lam, val in zip((0.1, 1.0, 10.0), values[1:]):
        pen = anchor_penalty(params, anchor, lam=lam, n_train=6)
        assert val == pytest.approx(nll + pen)
    assert all(a < b for a, b in zip(values, values[1:]))


# ---------------------------------------------------------------------------
# anchors

def test_sample_anchors_distinct_and_deterministic():
    a = sample_anchors(SPEC, SMALL, seed=0)
    b = sample_anchors(SPEC, SMALL, seed=0)
    assert a.digest() == b.digest()
    for j in range(SMALL.m - 1):
        assert not np.array_equal(a.members[j], a.members[j + 1])


def test_sample_anchors_scale_zero_collapses_to_prior_mean():
    config = TrainConfig(m=2, lam=0.01, epochs=1, batch_size=4,
                         seed=0, anchor_std_scale=0.0)
    anchors = sample_anchors(SPEC, config, seed=0)
    for member in anchors.members:
        assert np.all(member == 0.0)


def test_sample_anchors_empirical_std():
    spec = NetworkSpec((100, 80, 100))
    config = TrainConfig(m=1, lam=0.01, epochs=1, batch_size=4, seed=0)
    anchors = sample_anchors(spec, config, seed=0)
    member = ParameterSet(spec, anchors.members[0].copy())
    target = np.sqrt(2.0 / 100.0)
    assert abs(member.weight(0).std() - target) / target < 0.05
    # bias prior has zero std, so anchors pin biases at zero
    assert np.all(member.bias(0) == 0.0)


def test_anchors_read_only():
    anchors = sample_anchors(SPEC, SMALL, seed=0)
    with pytest.raises(ValueError):
        anchors.members[0][0] = 1.0


# ---------------------------------------------------------------------------
# training

def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(m=0, lam=0.01, epochs=1, batch_size=4)
    with pytest.raises(ConfigError):
        TrainConfig(m=1, lam=-0.1, epochs=1, batch_size=4)
    with pytest.raises(ConfigError):
        TrainConfig(m=1, lam=0.01, epochs=0, batch_size=4)
    with pytest.raises(ConfigError):
        TrainConfig(m=1, lam=0.01, epochs=1, batch_size=4, learning_rate=0.0)


def test_train_member_reduces_loss():
    x = toy_data(32, seed=7)
    anchors = sample_anchors(SPEC, SMALL, seed=0)
    params, trace = train_member(x, SPEC, SMALL, anchors, member_index=0)
    assert len(trace) == SMALL.epochs
    assert trace[-1] < trace[0]
    assert isinstance(params, ParameterSet)


def test_train_member_deterministic():
    x = toy_data(32, seed=7)
    anchors = sample_anchors(SPEC, SMALL, seed=0)
    p1, t1 = train_member(x, SPEC, SMALL, anchors, member_index=1)
    p2, t2 = train_member(x, SPEC, SMALL, anchors, member_index=1)
    assert np.array_equal(p1.flat, p2.flat)
    assert t1 == t2
    p3, _ = train_member(x, SPEC, SMALL, anchors, member_index=2)
    assert not np.array_equal(p1.flat, p3.flat)


def test_train_member_batch_larger_than_data():
    x = toy_data(4)
    anchors = sample_anchors(SPEC, SMALL, seed=0)
    with pytest.raises(ConfigError):
        train_member(x, SPEC, SMALL, anchors, member_index=0)  # batch_size 8 > 4


def test_train_ensemble_metadata_and_anchors_frozen():
    x = toy_data(32, seed=1)
    model = train_ensemble(x, SPEC, SMALL)
    assert model.m == SMALL.m
    assert model.metadata["n_train"] == 32
    assert len(model.metadata["loss_traces"]) == SMALL.m
    assert all(t[-1] < t[0] for t in model.metadata["loss_traces"])
    # training must not disturb the anchors it was regularized toward
    assert model.anchors.digest() == sample_anchors(SPEC, SMALL, SMALL.seed).digest()


def test_train_ensemble_parallel_matches_sequential():
    x = toy_data(32, seed=5)
    seq = train_ensemble(x, SPEC, SMALL, jobs=1)
    par = train_ensemble(x, SPEC, SMALL, jobs=2)
    for a, b in zip(seq.members, par.members):
        assert np.array_equal(a.flat, b.flat)
    assert seq.metadata["loss_traces"] == par.metadata["loss_traces"]


# ---------------------------------------------------------------------------
# prediction

def constant_head_model(biases, log_vars):
    """Zero-weight members whose mean/log-var heads output fixed biases."""
    spec = NetworkSpec((1, 1, 1))
    members = []
    for b, lv in zip(biases, log_vars):
        params = ParameterSet(spec, np.zeros(spec.total_count))
        params.bias(1)[:] = b
        params.bias(2)[:] = lv
        members.append(params)
    config = TrainConfig(m=len(members), lam=0.01, epochs=1, batch_size=1)
    anchors = sample_anchors(spec, config, seed=0)
    return EnsembleModel(spec=spec, members=members, anchors=anchors,
                         lam=config.lam, train_config=config)


def test_predict_hand_checkable_ensemble():
    model = constant_head_model(biases=[1.0, 2.0, 3.0], log_vars=[0.0, 0.0, 0.0])
    record, = predict(model, np.zeros((1, 1)))
    assert record.mean[0] == pytest.approx(2.0)
    # population variance over {1, 2, 3} = 2/3
    assert record.epistemic_var[0] == pytest.approx(2.0 / 3.0)
    assert record.aleatoric_var[0] == pytest.approx(1.0)  # exp(0) mean
    # x = 0 vs ensemble mean 2: squared error 4
    assert record.recon_loss == pytest.approx(4.0)
    assert record.epistemic == pytest.approx(2.0 / 3.0)
    assert record.aleatoric == pytest.approx(1.0)


def test_predict_aleatoric_averages_member_variances():
    model = constant_head_model(biases=[0.0, 0.0], log_vars=[0.0, 2.0])
    record, = predict(model, np.zeros((1, 1)))
    expected = (np.exp(0.0) + np.exp(2.0)) / 2.0
    assert record.aleatoric_var[0] == pytest.approx(expected)


def test_predict_single_member_has_no_disagreement():
    x = toy_data(16, seed=2)
    config = TrainConfig(m=1, lam=0.01, epochs=3, batch_size=8, seed=0)
    model = train_ensemble(x, SPEC, config)
    for i, record in enumerate(predict(model, x)):
        assert np.all(record.epistemic_var == 0.0)
        assert record.epistemic == 0.0
        # with one member the ensemble mean is that member's own output
        sq = (x[i] - record.mean) ** 2
        np.testing.assert_allclose(record.recon_loss, sq.mean(), atol=1e-15)


def test_predict_variance_matches_two_pass_oracle():
    x = toy_data(20, seed=9)
    model = train_ensemble(x, SPEC, SMALL)
    records = predict(model, x)

    from driftae.network import forward
    outs = [forward(p, x) for p in model.members]
    means = np.stack([o["mean"] for o in outs])
    mu = means.mean(axis=0)
    epi = ((means - mu) ** 2).mean(axis=0)
    ale = np.stack([np.exp(o["log_var"]) for o in outs]).mean(axis=0)

    for i, record in enumerate(records):
        np.testing.assert_allclose(record.mean, mu[i], atol=1e-12, rtol=0)
        np.testing.assert_allclose(record.epistemic_var, epi[i], atol=1e-12, rtol=0)
        np.testing.assert_allclose(record.aleatoric_var, ale[i], atol=1e-12, rtol=0)
        np.testing.assert_allclose(record.recon_loss,
                                   ((x[i] - mu[i]) ** 2).mean(), atol=1e-12, rtol=0)
        np.testing.assert_allclose(record.epistemic, epi[i].mean(), atol=1e-12, rtol=0)
        np.testing.assert_allclose(record.aleatoric, ale[i].mean(), atol=1e-12, rtol=0)


def test_predict_member_order_does_not_matter():
    x = toy_data(12, seed=4)
    model = train_ensemble(x, SPEC, SMALL)
    shuffled = EnsembleModel(spec=model.spec,
                             members=list(reversed(model.members)),
                             anchors=model.anchors, lam=model.lam,
                             train_config=model.train_config)
    for a, b in zip(predict(model, x), predict(shuffled, x)):
        np.testing.assert_allclose(a.mean, b.mean, atol=1e-12)
        np.testing.assert_allclose(a.epistemic_var, b.epistemic_var, atol=1e-12)
        np.testing.assert_allclose(a.aleatoric_var, b.aleatoric_var, atol=1e-12)


def test_predict_chunking_is_invisible():
    # batch larger than the internal chunk size must give identical results
    x = toy_data(600, seed=6)
    model = train_ensemble(toy_data(32, seed=6), SPEC, SMALL)
    whole = predict(model, x)
    assert len(whole) == 600
    parts = []
    for i in range(0, 600, 100):
        parts.extend(predict(model, x[i:i + 100]))
    for a, b in zip(whole, parts):
        assert np.array_equal(a.mean, b.mean)
        assert a.recon_loss == b.recon_loss


# ---------------------------------------------------------------------------
# persistence

def test_save_load_predictions_identical(tmp_path):
    from driftae.ensemble import save_model
    x = toy_data(32, seed=8)
    model = train_ensemble(x, SPEC, SMALL)
    path = str(tmp_path / "model.json")
    save_model(model, path)
    loaded = load_model(path)

    for before, after in zip(predict(model, x), predict(loaded, x)):
        assert np.array_equal(before.mean, after.mean)
        assert np.array_equal(before.epistemic_var, after.epistemic_var)
        assert np.array_equal(before.aleatoric_var, after.aleatoric_var)
        assert before.recon_loss == after.recon_loss
    assert loaded.train_config == model.train_config
    assert loaded.anchors.digest() == model.anchors.digest()


def test_load_missing_file(tmp_path):
    with pytest.raises(PersistenceError):
        load_model(str(tmp_path / "nope.json"))


def test_load_truncated_file(tmp_path):
    from driftae.ensemble import save_model
    model = train_ensemble(toy_data(16), SPEC,
                           TrainConfig(m=1, lam=0.01, epochs=1, batch_size=8))
    path = str(tmp_path / "model.json")
    save_model(model, path)
    text = open(path).read()
    with open(path, "w") as fh:
        fh.write(text[:len(text) // 2])
    with pytest.raises(PersistenceError):
        load_model(path)


def test_load_rejects_foreign_documents(tmp_path):
    path = str(tmp_path / "model.json")
    with open(path, "w") as fh:
        json.dump({"format": "something-else", "version": 1}, fh)
    with pytest.raises(PersistenceError):
        load_model(path)
    with open(path, "w") as fh:
        json.dump({"format": "driftae-ensemble", "version": 99}, fh)
    with pytest.raises(PersistenceError):
        load_model(path)


def test_save_does_not_leave_temp_files(tmp_path):
    from driftae.ensemble import save_model
    model = train_ensemble(toy_data(16), SPEC,
                           TrainConfig(m=1, lam=0.01, epochs=1, batch_size=8))
    save_model(model, str(tmp_path / "model.json"))
    assert sorted(os.listdir(tmp_path)) == ["model.json"]
