import struct

import numpy as np
import pytest
from gradcheck import STEP, near_kink, numeric_grad, relative_error

from circrot.codecs import decode, encode, loss_and_grad, make_codec
from circrot.features import FeatureExtractor
from circrot.model import (
    FILE_MAGIC,
    HeadParams,
    RotationStream,
    TrainConfig,
    TrainingDiverged,
    backward,
    default_output_scale,
    forward,
    init_params,
    load_params,
    predict,
    predict_batch,
    save_params,
    train,
)
from circrot.synthdata import build_splits, make_sample

FX = FeatureExtractor()


@pytest.fixture(scope="module")
def tiny_splits():
    return build_splits(60, 0.2, 20, split_seed=4, test_seed=5)


def small_head(out_dim, seed=0, scale=1.0):
    return init_params(12, out_dim, hidden=9, seed=seed, output_scale=scale)


def test_init_shapes_and_bounds():
    p = init_params(144, 3, hidden=128, seed=1)
    assert p.w1.shape == (144, 128) and p.w2.shape == (128, 3)
    assert np.all(p.b1 == 0) and np.all(p.b2 == 0)
    assert np.abs(p.w1).max() <= np.sqrt(6 / (144 + 128))
    assert (p.in_dim, p.hidden, p.out_dim) == (144, 128, 3)


def test_forward_batch_matches_single():
    p = small_head(4)
    x = np.random.default_rng(0).normal(size=(5, 12))
    np.testing.assert_allclose(forward(p, x)[2], forward(p, x[2]))


def test_forward_two_by_two_by_hand():
    p = HeadParams(
        w1=np.array([[1.0, -1.0], [2.0, 0.5]]),
        b1=np.array([0.0, -1.0]),
        w2=np.array([[3.0], [4.0]]),
        b2=np.array([0.5]),
    )
    # hidden pre-activations: [1 + 4, -1 + 1 - 1] = [5, -1] -> relu [5, 0]
    assert forward(p, np.array([1.0, 2.0])) == pytest.approx([15.5])
    p.output_scale = 2.0
    assert forward(p, np.array([1.0, 2.0])) == pytest.approx([31.0])


def test_zero_head_and_second_layer_linearity():
    p = small_head(3)
    x = np.random.default_rng(1).normal(size=(4, 12))
    zero = HeadParams(np.zeros((12, 9)), np.zeros(9), np.zeros((9, 3)), np.zeros(3))
    assert np.all(forward(zero, x) == 0)
    q = p.copy()
    q.w2 *= 2
    q.b2 *= 2
    np.testing.assert_allclose(forward(q, x), 2 * forward(p, x))


def test_backward_zero_upstream_and_linear_case():
    p = small_head(2)
    x = np.random.default_rng(2).normal(size=12)
    assert all(np.all(g == 0) for g in backward(p, x, np.zeros(2)).values())
    # with every hidden unit active the head is linear and dL/dw2 = outer(h, upstream)
    p.b1[:] = 100.0
    up = np.array([0.3, -1.2])
    grads = backward(p, x, up)
    h = x @ p.w1 + p.b1
    np.testing.assert_allclose(grads["w2"], np.outer(h, up))
    np.testing.assert_allclose(grads["w1"], np.outer(x, p.w2 @ up))


def test_forward_rejects_bad_width():
    with pytest.raises(ValueError):
        forward(small_head(2), np.zeros(11))


def test_mlp_gradient_matches_finite_differences():
    """Scalar objective sum(r * out) checked at 50 random parameter points."""
    g = np.random.default_rng(7)
    worst, checked, trial = 0.0, 0, 0
    while checked < 50:
        trial += 1
        p = small_head(3, seed=trial, scale=float(g.choice([1.0, 57.29])))
        x = g.normal(size=(4, 12))
        r = g.normal(size=(4, 3))
        # keep hidden pre-activations away from the ReLU kink
        if np.min(np.abs(x @ p.w1 + p.b1)) < 10 * STEP * np.abs(x).sum(axis=1).max():
            continue
        grads = backward(p, x, r)
        for name, arr in p.arrays().items():

            def objective(a, name=name):
                q = p.copy()
                setattr(q, name, a)
                return float(np.sum(r * forward(q, x)))

            worst = max(worst, relative_error(grads[name], numeric_grad(objective, arr)))
        checked += 1
    assert worst < 1e-4


@pytest.mark.parametrize("method", ["da", "da_naive", "uv", "psc", "cls", "cgd"])
def test_end_to_end_gradient_through_codec(method):
    codec = make_codec(method)
    g = np.random.default_rng(3)
    checked = 0
    while checked < 10:
        p = init_params(12, codec.output_dim, hidden=9, seed=checked, output_scale=default_output_scale(codec))
        x = g.normal(size=(3, 12))
        target = encode(codec, g.uniform(0, 360, 3))
        out = forward(p, x)
        if any(near_kink(method, out[i], target[i]) for i in range(3)):
            continue
        lv = loss_and_grad(codec, out, target)
        grads = backward(p, x, lv.gradient / 3)

        def objective(a):
            q = p.copy()
            q.w2 = a
            return float(loss_and_grad(codec, forward(q, x), target).loss.mean())

        assert relative_error(grads["w2"], numeric_grad(objective, p.w2)) < 1e-3
        checked += 1


def test_zero_learning_rate_keeps_initial_head(tiny_splits):
    tr, va, _ = tiny_splits
    codec = make_codec("uv")
    cfg = TrainConfig(learning_rate=0.0, max_epochs=3, patience=3, seed=2)
    params, log = train(codec, FX, tr, va, cfg)
    init = init_params(FX.out_dim, 2, 128, 2)
    for name, arr in params.arrays().items():
        np.testing.assert_array_equal(arr, init.arrays()[name].astype(np.float32))
    assert log.best_epoch == 0
    assert len(set(log.val_mae)) == 1


def test_training_is_deterministic(tiny_splits):
    tr, va, _ = tiny_splits
    cfg = TrainConfig(max_epochs=4, patience=4, seed=1)
    a, la = train(make_codec("cgd"), FX, tr, va, cfg)
    b, lb = train(make_codec("cgd"), FX, tr, va, cfg)
    for name in a.arrays():
        np.testing.assert_array_equal(a.arrays()[name], b.arrays()[name])
    assert la.to_csv() == lb.to_csv()


@pytest.mark.parametrize("method", ["uv", "psc", "cls", "cgd"])
def test_structured_codecs_improve_on_epoch_zero(tiny_splits, method):
    tr, va, _ = tiny_splits
    _, log = train(make_codec(method), FX, tr, va, TrainConfig(max_epochs=6, patience=6, learning_rate=3e-3))
    assert log.best_val_mae < log.val_mae[0]


def test_training_reduces_loss(tiny_splits):
    tr, va, _ = tiny_splits
    _, log = train(make_codec("cls"), FX, tr, va, TrainConfig(max_epochs=8, patience=8, learning_rate=3e-3))
    assert log.train_loss[-1] < log.train_loss[0]
    assert log.best_val_mae < log.val_mae[0]
    assert log.epochs == list(range(len(log.epochs)))


def test_early_stopping_respects_patience(tiny_splits):
    tr, va, _ = tiny_splits
    cfg = TrainConfig(learning_rate=0.0, max_epochs=20, patience=2)
    _, log = train(make_codec("uv"), FX, tr, va, cfg)
    assert log.epochs[-1] == 2


def test_divergence_is_reported(tiny_splits):
    tr, va, _ = tiny_splits
    with pytest.raises(TrainingDiverged), np.errstate(over="ignore", invalid="ignore"):
        train(make_codec("uv"), FX, tr, va, TrainConfig(learning_rate=1e200, optimizer="sgd_momentum", max_epochs=3, patience=3))


def test_stream_is_shared_and_memoized(tiny_splits):
    tr, _, _ = tiny_splits
    s = RotationStream(FX, tr, seed=3)
    assert s.features(1) is s.features(1)
    a = s.angles(1)
    assert not np.array_equal(a, s.angles(2))
    np.testing.assert_array_equal(a, RotationStream(FX, tr, seed=3).angles(1))
    assert not s.quantize  # rendered in memory


def test_stream_seed_must_match(tiny_splits):
    tr, va, _ = tiny_splits
    with pytest.raises(ValueError):
        train(make_codec("uv"), FX, tr, va, TrainConfig(seed=1), stream=RotationStream(FX, tr, seed=2))


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(optimizer="rmsprop")
    with pytest.raises(ValueError):
        TrainConfig(max_epochs=5, patience=6)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=-1.0)


def test_save_load_roundtrip_is_exact(tmp_path, tiny_splits):
    tr, va, te = tiny_splits
    codec = make_codec("psc", n_phases=4)
    params, _ = train(codec, FX, tr, va, TrainConfig(max_epochs=2, patience=2))
    path = tmp_path / "h.head"
    save_params(path, params, codec, FX)
    assert path.read_bytes()[:8] == FILE_MAGIC
    p2, c2, f2 = load_params(path)
    assert c2 == codec and f2 == FX and p2.output_scale == params.output_scale
    for name in params.arrays():
        np.testing.assert_array_equal(p2.arrays()[name], params.arrays()[name])
    imgs = [te.image(i) for i in range(len(te))]
    np.testing.assert_array_equal(predict_batch(c2, f2, p2, imgs), predict_batch(codec, FX, params, imgs))


def test_load_rejects_corruption(tmp_path):
    codec = make_codec("uv")
    p = init_params(FX.out_dim, 2, hidden=4)
    path = tmp_path / "h.head"
    save_params(path, p, codec, FX)
    data = path.read_bytes()
    for bad in (b"NOTAHEAD" + data[8:], data[:-4], data[:8] + struct.pack("<I", 99) + data[12:]):
        path.write_bytes(bad)
        with pytest.raises(ValueError):
            load_params(path)


def test_predict_ignores_extra_full_turns():
    codec = make_codec("uv")
    p = init_params(FX.out_dim, 2, hidden=16, seed=3)
    scene = build_splits(10, 0.2, 1, 0, 0)[2].scene(0)
    for theta in (12.5, 200.0):
        a = predict(codec, FX, p, make_sample(scene, theta).image)
        b = predict(codec, FX, p, make_sample(scene, theta + 360.0).image)
        assert a == b and 0.0 <= a < 360.0


def test_predict_returns_canonical_angle():
    codec = make_codec("da")
    p = HeadParams(np.zeros((FX.out_dim, 2)), np.zeros(2), np.zeros((2, 1)), np.array([-1.0]), default_output_scale(codec))
    sample = make_sample(build_splits(10, 0.2, 1, 0, 0)[2].scene(0), 30.0)
    a = predict(codec, FX, p, sample.image)
    assert a == pytest.approx(360.0 - np.degrees(1.0))
    assert decode(codec, forward(p, np.zeros(FX.out_dim))) == pytest.approx(a)
