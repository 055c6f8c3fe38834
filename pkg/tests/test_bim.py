import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seedmark.bim import BimConfig, bim, bim_batch
from seedmark.errors import InputError, SpecError
from seedmark.nnet import forward, predict

from conftest import random_small_model


def test_config_defaults():
    cfg = BimConfig()
    assert cfg.iterations == 20
    assert cfg.step_size == pytest.approx(cfg.epsilon / cfg.iterations)


def test_config_validation():
    with pytest.raises(SpecError):
        BimConfig(iterations=0)
    with pytest.raises(SpecError):
        BimConfig(step_size=0.5, epsilon=0.3)
    with pytest.raises(SpecError):
        BimConfig(mode="sideways")


def test_zero_budget_identity():
    rng = np.random.default_rng(0)
    m = random_small_model(rng)
    x = rng.uniform(-1, 1, size=m.spec.input_dim)
    out = bim(m, x, 0, BimConfig(epsilon=0.0))
    assert np.array_equal(out, x)


@given(st.integers(0, 2**32 - 1), st.floats(0.05, 0.5), st.integers(1, 15))
@settings(max_examples=25, deadline=None)
def test_linf_ball_and_clip_containment(seed, eps, iters):
    rng = np.random.default_rng(seed)
    m = random_small_model(rng)
    x = rng.uniform(-1, 1, size=m.spec.input_dim)
    cfg = BimConfig(iterations=iters, epsilon=eps)
    out = bim(m, x, 0, cfg)
    assert np.abs(out - x).max() <= eps + 1e-12
    assert out.min() >= -1.0 and out.max() <= 1.0


def test_targeted_raises_target_confidence(trained_model, blob_data):
    _, test_set = blob_data
    preds = predict(trained_model, test_set.features)
    wrong = np.flatnonzero(preds != test_set.labels)[:20]
    targets = preds[wrong]
    cfg = BimConfig()
    before = forward(trained_model, test_set.features[wrong])[np.arange(len(wrong)), targets]
    adv = bim_batch(trained_model, test_set.features[wrong], targets, cfg)
    after = forward(trained_model, adv)[np.arange(len(wrong)), targets]
    assert after.mean() > before.mean()


def test_confidence_nondecreasing_in_iterations(trained_model, blob_data):
    _, test_set = blob_data
    preds = predict(trained_model, test_set.features)
    wrong = np.flatnonzero(preds != test_set.labels)[:15]
    targets = preds[wrong]
    means = {}
    for k in (0, 5, 10, 20):
        if k == 0:
            adv = test_set.features[wrong]
        else:
            # keep the paper-default total budget; step shrinks with more iterations
            adv = bim_batch(trained_model, test_set.features[wrong], targets,
                            BimConfig(iterations=k))
        conf = forward(trained_model, adv)[np.arange(len(wrong)), targets]
        means[k] = conf.mean()
    assert means[20] >= means[0]


def test_untargeted_lowers_true_confidence(trained_model, blob_data):
    _, test_set = blob_data
    idx = np.arange(10)
    truth = test_set.labels[idx]
    cfg = BimConfig(mode="untargeted")
    adv = bim_batch(trained_model, test_set.features[idx], truth, cfg)
    before = forward(trained_model, test_set.features[idx])[np.arange(10), truth]
    after = forward(trained_model, adv)[np.arange(10), truth]
    assert after.mean() < before.mean()


def test_batch_of_one_matches_single(trained_model, blob_data):
    _, test_set = blob_data
    x = test_set.features[3]
    cfg = BimConfig(iterations=5)
    single = bim(trained_model, x, 2, cfg)
    batch = bim_batch(trained_model, x[None], [2], cfg)
    assert np.array_equal(batch[0], single)


def test_empty_batch(trained_model):
    cfg = BimConfig()
    out = bim_batch(trained_model, np.empty((0, trained_model.spec.input_dim)), [], cfg)
    assert out.shape == (0, trained_model.spec.input_dim)


def test_batch_elementwise_equals_singles(trained_model, blob_data):
    _, test_set = blob_data
    x = test_set.features[:6]
    labels = test_set.labels[:6]
    cfg = BimConfig(iterations=4)
    batch = bim_batch(trained_model, x, labels, cfg)
    for i in range(6):
        assert np.array_equal(batch[i], bim(trained_model, x[i], labels[i], cfg))


def test_determinism(trained_model, blob_data):
    _, test_set = blob_data
    cfg = BimConfig()
    a = bim(trained_model, test_set.features[0], 1, cfg)
    b = bim(trained_model, test_set.features[0], 1, cfg)
    assert np.array_equal(a, b)


def test_dimension_mismatch(trained_model):
    with pytest.raises(InputError):
        bim(trained_model, np.zeros(3), 0, BimConfig())
    with pytest.raises(InputError):
        bim_batch(trained_model, np.zeros((2, trained_model.spec.input_dim)), [0], BimConfig())
