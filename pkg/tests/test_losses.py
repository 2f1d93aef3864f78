import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from atm.losses import accl_loss, combined_objective, confusion_loss, contrastive_from_similarity, cross_entropy
from atm.tensorcore import Tensor, grad_check, mean

finite = st.floats(-20, 20, allow_nan=False)


def np_log_softmax(x):
    m = x.max(axis=-1, keepdims=True)
    return x - m - np.log(np.exp(x - m).sum(axis=-1, keepdims=True))


def test_uniform_entropy_is_log_a():
    for a in (2, 5, 7):
        assert abs(float(confusion_loss(Tensor(np.zeros(a))).data) - math.log(a)) < 1e-9
    # any constant row, not only zeros
    assert abs(float(confusion_loss(Tensor(np.full(5, 3.7))).data) - math.log(5)) < 1e-9


def test_one_hot_entropy_near_zero():
    assert float(confusion_loss(Tensor(np.array([200.0, 0, 0, 0]))).data) < 1e-12


@given(arrays(np.float64, (3, 5), elements=finite))
def test_entropy_bounds(x):
    h = confusion_loss(Tensor(x)).data
    assert np.all(h >= -1e-12) and np.all(h <= math.log(5) + 1e-12)


def test_accl_all_equal_is_log_b():
    for b in (2, 16, 64):
        loss = contrastive_from_similarity(Tensor(np.full((b, b), 0.3)))
        assert abs(float(loss.data) - math.log(b)) < 1e-9
    v = Tensor(np.ones((64, 8)))
    assert abs(float(accl_loss(v, v).data) - math.log(64)) < 1e-9


def test_accl_matches_direct_formula():
    rng = np.random.default_rng(0)
    v, c = rng.normal(size=(6, 4)), rng.normal(size=(6, 4))
    sim = v @ c.T
    want = -np.mean([sim[i, i] - np.log(np.exp(sim[i]).sum()) for i in range(6)])
    assert float(accl_loss(Tensor(v), Tensor(c)).data) == pytest.approx(want, rel=1e-12)


def test_accl_converged_start_is_near_zero():
    sim = np.full((4, 4), -50.0) + np.diag(np.full(4, 100.0))
    assert float(contrastive_from_similarity(Tensor(sim)).data) < 1e-12


@settings(max_examples=30)
@given(st.permutations(range(5)))
def test_accl_invariant_to_batch_order(perm):
    rng = np.random.default_rng(3)
    v, c = rng.normal(size=(5, 3)), rng.normal(size=(5, 3))
    p = np.array(perm)
    a = float(accl_loss(Tensor(v), Tensor(c)).data)
    b = float(accl_loss(Tensor(v[p]), Tensor(c[p])).data)
    assert a == pytest.approx(b, rel=1e-12)


def test_accl_errors():
    with pytest.raises(ValueError):
        accl_loss(Tensor(np.ones((3, 2))), Tensor(np.ones((2, 2))))
    with pytest.raises(ValueError, match="at least 2"):
        accl_loss(Tensor(np.ones((1, 2))), Tensor(np.ones((1, 2))))


def test_cross_entropy_values_and_errors():
    x = np.array([[1.0, 2.0, 0.5], [0.0, 0.0, 0.0]])
    got = cross_entropy(Tensor(x), [1, 2]).data
    np.testing.assert_allclose(got, -np_log_softmax(x)[[0, 1], [1, 2]], rtol=1e-12)
    assert float(cross_entropy(Tensor(np.zeros(4)), 2).data) == pytest.approx(math.log(4), abs=1e-12)
    with pytest.raises(IndexError):
        cross_entropy(Tensor(x), [1, 3])
    with pytest.raises(IndexError):
        cross_entropy(Tensor(x), [-1, 0])


def test_combined_all_insensitive_is_mean_ce_bitwise():
    rng = np.random.default_rng(1)
    x = Tensor(rng.normal(size=(8, 5)))
    gold = rng.integers(0, 5, size=8)
    combined = combined_objective(x, gold, np.zeros(8, dtype=bool))
    assert combined.data.tobytes() == mean(cross_entropy(x, gold)).data.tobytes()


def test_combined_matches_direct_formula():
    rng = np.random.default_rng(2)
    x, xs = rng.normal(size=(6, 4)), rng.normal(size=(3, 4))
    gold = np.array([0, 1, 2, 3, 0, 1])
    sens = np.array([True, False, True, False, True, False])
    ce = -np_log_softmax(x)[np.arange(6), gold]
    lp = np_log_softmax(xs)
    h = -(np.exp(lp) * lp).sum(axis=1)
    want = np.mean(ce[sens] - 0.5 * h) + np.mean(ce[~sens])
    got = combined_objective(Tensor(x), gold, sens, Tensor(xs), cf_weight=0.5)
    assert float(got.data) == pytest.approx(want, rel=1e-12)
    all_sens = combined_objective(Tensor(x[:3]), gold[:3], np.ones(3, bool), Tensor(xs))
    assert float(all_sens.data) == pytest.approx(np.mean(ce[:3] - h), rel=1e-12)


def test_combined_errors():
    x = Tensor(np.zeros((2, 3)))
    with pytest.raises(ValueError, match="sensitive"):
        combined_objective(x, [0, 1], [True, False])
    with pytest.raises(ValueError):
        combined_objective(x, [0, 1], [True, True], Tensor(np.zeros((1, 3))))


@pytest.mark.parametrize(
    "loss",
    [
        lambda p: accl_loss(p["v"], p["c"]),
        lambda p: mean(cross_entropy(p["x"], [0, 2, 1])),
        lambda p: mean(confusion_loss(p["x"])),
        lambda p: combined_objective(p["x"], [0, 2, 1], [True, False, True], p["s"]),
    ],
    ids=["accl", "ce", "confusion", "combined"],
)
def test_loss_gradients(loss):
    rng = np.random.default_rng(4)
    params = {
        "v": Tensor(rng.normal(size=(3, 4)), requires_grad=True),
        "c": Tensor(rng.normal(size=(3, 4)), requires_grad=True),
        "x": Tensor(rng.normal(size=(3, 5)), requires_grad=True),
        "s": Tensor(rng.normal(size=(2, 5)), requires_grad=True),
    }
    assert grad_check(loss, params).passed


def test_entropy_gradient_vanishes_at_uniform():
    x = Tensor(np.zeros(5), requires_grad=True)
    g = confusion_loss(x).backward()[x]
    assert np.all(np.abs(g) < 1e-15)
