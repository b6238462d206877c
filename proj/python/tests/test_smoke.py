import json
import math

import numpy as np
import pytest

import signrec


def test_matmul_and_softmax():
    a = np.arange(6, dtype=np.float32).reshape(2, 3)
    b = np.ones((3, 2), dtype=np.float32)
    np.testing.assert_allclose(signrec.matmul(a, b), a @ b)
    p = signrec.softmax(np.array([1.0, 2.0, 3.0], dtype=np.float32))
    assert p.sum() == pytest.approx(1.0, abs=1e-6)
    assert signrec.cross_entropy(np.full(9, 1 / 9, dtype=np.float32), 0) == pytest.approx(
        math.log(9), abs=1e-5
    )


def test_conv2d_matches_numpy():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((6, 5, 2)).astype(np.float32)
    k = rng.standard_normal((3, 2, 2, 4)).astype(np.float32)
    b = rng.standard_normal(4).astype(np.float32)
    out = signrec.conv2d(x, k, b)
    assert out.shape == (4, 4, 4)
    want = np.empty_like(out)
    for y in range(4):
        for xx in range(4):
            want[y, xx] = np.einsum("hwc,hwcf->f", x[y : y + 3, xx : xx + 2], k) + b
    np.testing.assert_allclose(out, want, atol=1e-5)


def test_shape_errors_are_python_exceptions():
    with pytest.raises(signrec.ShapeError):
        signrec.matmul(np.ones((2, 3), np.float32), np.ones((2, 3), np.float32))
    assert issubclass(signrec.TypeTagError, signrec.FormatError)
    assert issubclass(signrec.FormatError, signrec.SignrecError)


def test_subsample_indices():
    assert signrec.subsample_indices(3, 5) == [0, 0, 1, 1, 2]


def test_feature_file_round_trip(tmp_path):
    feats = np.random.default_rng(1).standard_normal((20, 2048)).astype(np.float32)
    path = tmp_path / "clip.gfea"
    signrec.write_feature_file(path, feats)
    assert path.stat().st_size == 16 + feats.nbytes
    back = signrec.read_feature_file(path)
    assert back.dtype == np.float32
    assert back.tobytes() == feats.tobytes()
    path.write_bytes(b"XXXX" + path.read_bytes()[4:])
    with pytest.raises(signrec.FormatError):
        signrec.read_feature_file(path)


def test_adam_first_step_moves_by_lr():
    adam = signrec.Adam(lr=0.01)
    param = np.zeros(4, dtype=np.float32)
    adam.step("w", param, np.array([3.0, -2.0, 0.5, -1e-3], dtype=np.float32))
    assert adam.steps("w") == 1
    assert np.all(np.abs(param) <= 0.01 + 1e-7)
    assert np.all(np.abs(param) >= 0.009)
    assert list(np.sign(param)) == [-1, 1, -1, 1]


def test_lstm_forward_shape():
    rng = np.random.default_rng(2)
    h = signrec.lstm_forward(
        rng.standard_normal((5, 3)).astype(np.float32),
        rng.standard_normal((3, 16)).astype(np.float32),
        rng.standard_normal((4, 16)).astype(np.float32),
        np.zeros(16, np.float32),
    )
    assert h.shape == (4,)
    assert np.all(np.abs(h) < 1)


def test_corpus_train_predict_end_to_end(tmp_path):
    manifest = signrec.gen_synthetic(
        tmp_path / "corpus", classes=2, per_class=4, frames=6, size=16, seed=3
    )
    info = signrec.load_manifest(manifest)
    assert info["vocabulary"] == ["similar", "differ"]
    assert len(info["entries"]) == 8
    train, evl = signrec.stratified_split(manifest, 0.5, 1)
    assert len(train) == 4 and len(evl) == 4

    model_path = str(tmp_path / "cnn.gmdl")
    code, out, err = signrec.run_cli(
        ["train", "--manifest", manifest, "--epochs", "2", "--frames", "6",
         "--split", "0.5", "--out-model", model_path]
    )
    assert code == 0, err
    result = json.loads(out)
    assert len(result["history"]["epoch_losses"]) == 2

    model = signrec.load_model(model_path)
    assert isinstance(model, signrec.MicroCnn)
    frames = signrec.load_frames(info["entries"][0]["payload_path"])
    assert frames.shape == (6, 16, 16, 1)
    pred = model.predict(frames)
    assert pred["label"] in model.labels
    assert pred["probs"].sum() == pytest.approx(1.0, abs=1e-5)
    feats = model.features(frames)
    assert feats.shape == (6, model.feature_width)


def test_cli_usage_error_code():
    code, _, err = signrec.run_cli(["train", "--manifest", "m.jsonl", "--epochs", "0",
                                    "--out-model", "x.gmdl"])
    assert code == 2
    assert "epochs" in err
