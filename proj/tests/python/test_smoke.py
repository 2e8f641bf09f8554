import math

import numpy as np
import pytest

import kadmm


def blobs(n, seed=0):
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    x = rng.normal(scale=0.5, size=(n, 2))
    x[:, 0] += np.where(y == 1, 3.0, -3.0)
    return x, y.astype(float)


def test_prox_closed_forms():
    assert kadmm.prox_squared(1.0, 0.0, 0.5) == pytest.approx(0.5)
    assert kadmm.prox_hinge(2.0, 1.0, 0.3) == 2.0
    assert kadmm.prox_hinge(0.9, 1.0, 0.3) == 1.0
    assert kadmm.prox_hinge(-1.0, 1.0, 0.3) == pytest.approx(-0.7)
    assert kadmm.prox_absolute(3.0, 1.0, 0.5) == pytest.approx(2.5)
    out = kadmm.prox_loss(np.array([[1.0, -2.0]]), np.array([[0.0, 0.0]]), kadmm.Loss.squared, 0.5)
    np.testing.assert_allclose(out, [[0.5, -1.0]])


def test_transform_blocks_concatenate():
    x = np.random.default_rng(1).normal(size=(5, 3))
    t = kadmm.Transform(40, 3, 1.5, 9)
    assert t.col_offsets[-1] == 40 and t.blocks == 3
    full = t.all(x)
    parts = np.hstack([t.block(x, j) for j in range(3)])
    np.testing.assert_array_equal(full, parts)
    assert np.abs(full).max() <= math.sqrt(2.0 / 40) + 1e-15


def test_graph_projection_lies_on_graph():
    rng = np.random.default_rng(2)
    z = rng.normal(size=(6, 4))
    w, o = kadmm.graph_project(z, rng.normal(size=(4, 2)), rng.normal(size=(6, 2)))
    np.testing.assert_allclose(z @ w, o, atol=1e-12)


def test_train_predict_roundtrip(tmp_path):
    x, y = blobs(200)
    model, reports = kadmm.train(x, y, features=128, blocks=2, sigma=1.0, seed=3, loss="hinge",
                                 max_iter=30, rows=2, threads=2, lam=1e-3)
    assert len(reports) == 30
    assert model.weights.shape == (128, 2)
    assert np.mean(model.predict(x) == y) >= 0.95
    path = str(tmp_path / "m.bin")
    model.save(path)
    again = kadmm.Model.load(path)
    np.testing.assert_array_equal(again.weights, model.weights)
    np.testing.assert_array_equal(again.scores(x), model.scores(x))


def test_regression_objective_decreases():
    rng = np.random.default_rng(4)
    x = rng.uniform(-2, 2, size=(150, 2))
    y = np.sin(x[:, 0]) + np.cos(x[:, 1])
    model, reports = kadmm.train(x, y, features=64, sigma=1.0, max_iter=40, lam=1e-4)
    assert reports[-1]["objective"] < reports[0]["objective"]
    assert kadmm.objective(model, x, y, 1e-4) < reports[0]["objective"]


def test_errors_are_typed(tmp_path):
    with pytest.raises(kadmm.ConfigError):
        kadmm.SolverConfig(kadmm.Transform(8, 1, 1.0, 0), rho=-1.0)
    with pytest.raises(kadmm.IoError):
        kadmm.Model.load(str(tmp_path / "missing.bin"))
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"nonsense")
    with pytest.raises(kadmm.ModelFormatError):
        kadmm.Model.load(str(bad))


def test_memory_estimate_matches_formula():
    n, d, m, s, r, c, t = 1000.0, 10.0, 2.0, 100.0, 2.0, 4.0, 3.0
    e = kadmm.memory_estimate(n, d, m, s, rows=r, cols=c, threads=t, nodes=1)
    expected = (4 * n * m / r + 5 * s * m + n * d / r + n * m / r + t * n * s / (r * c) + t * s * m / c
                + n * m * t / r + n * m / r + s * s / c)
    assert e["floats_per_process"] == pytest.approx(expected)
    assert e["floats_per_node"] == pytest.approx(expected * r)
