import numpy as np
import pytest

from utilcast.baselines import GBTConfig, fit_gbt, fit_linear, load_baseline, save_baseline
from utilcast.errors import ModelFormatError, SchemaError
from utilcast.forest import ForestConfig, fit_forest, save_model


def _normal_equations(X, y):
    A = np.column_stack([np.ones(len(X)), X])
    return np.linalg.lstsq(A, y, rcond=None)[0]


def test_linear_recovers_exact_line():
    x = np.arange(10.0).reshape(-1, 1)
    model = fit_linear(x, 2 * x[:, 0] + 1)
    assert model.coefficients[0] == pytest.approx(2.0, abs=1e-12)
    assert model.intercept == pytest.approx(1.0, abs=1e-12)


def test_linear_constant_target():
    X = np.random.default_rng(0).random((30, 3))
    model = fit_linear(X, np.full(30, 4.0))
    assert np.allclose(model.coefficients, 0.0, atol=1e-12)
    assert np.allclose(model.predict(X), 4.0, atol=1e-12)


def test_duplicated_column_uses_ridge_and_still_predicts():
    rng = np.random.default_rng(1)
    x = rng.random(50)
    X = np.column_stack([x, x, rng.random(50)])
    y = 3 * x - X[:, 2] + 0.5
    model = fit_linear(X, y)
    assert np.all(np.isfinite(model.coefficients))
    assert np.allclose(model.predict(X), y, atol=1e-6)


def test_linear_matches_normal_equations_oracle():
    rng = np.random.default_rng(2)
    for _ in range(20):
        n, p = int(rng.integers(10, 80)), int(rng.integers(1, 6))
        X = rng.normal(size=(n, p))
        y = X @ rng.normal(size=p) + rng.normal(size=n)
        model = fit_linear(X, y)
        want = _normal_equations(X, y)
        assert model.intercept == pytest.approx(want[0], abs=1e-8)
        assert np.allclose(model.coefficients, want[1:], atol=1e-8)


def test_gbt_single_full_step_fits_residuals():
    X = np.arange(8.0).reshape(-1, 1)
    y = np.array([1.0, 3.0, 2.0, 5.0, 4.0, 8.0, 7.0, 6.0])
    model = fit_gbt(X, y, GBTConfig(n_rounds=1, learning_rate=1.0, max_depth=None))
    assert np.allclose(model.predict(X), y, atol=1e-12)


def test_gbt_zero_rounds_is_mean():
    X = np.random.default_rng(3).random((20, 2))
    y = np.arange(20.0)
    model = fit_gbt(X, y, GBTConfig(n_rounds=0))
    assert np.all(model.predict(X) == y.mean())


def test_gbt_training_mse_never_increases():
    rng = np.random.default_rng(4)
    X = rng.random((200, 3))
    y = np.sin(5 * X[:, 0]) + X[:, 1] * X[:, 2]
    model = fit_gbt(X, y, GBTConfig(n_rounds=30, learning_rate=0.2, max_depth=2))
    mse = [np.mean((y - p) ** 2) for p in model.staged_predict(X)]
    assert len(mse) == 31
    assert all(b <= a + 1e-12 for a, b in zip(mse, mse[1:]))


def test_gbt_config_validation():
    with pytest.raises(ValueError):
        GBTConfig(n_rounds=-1)
    for lr in (0.0, 1.5):
        with pytest.raises(ValueError):
            GBTConfig(learning_rate=lr)


def test_forest_beats_linear_on_nonlinear_target():
    rng = np.random.default_rng(5)
    X = rng.random((400, 2))
    y = np.sin(6 * X[:, 0]) * X[:, 1]
    Xt = rng.random((200, 2))
    yt = np.sin(6 * Xt[:, 0]) * Xt[:, 1]
    forest = fit_forest(X, y, ForestConfig(n_estimators=30, seed=0))
    linear = fit_linear(X, y)
    from utilcast.forest import predict

    assert np.mean((predict(forest, Xt) - yt) ** 2) < np.mean((linear.predict(Xt) - yt) ** 2)


def test_schema_check():
    model = fit_linear(np.random.default_rng(6).random((10, 2)), np.arange(10.0))
    with pytest.raises(SchemaError):
        model.predict(np.zeros((3, 3)))


@pytest.mark.parametrize("kind", ["linear", "gbt"])
def test_save_load_round_trip(tmp_path, kind):
    rng = np.random.default_rng(7)
    X = rng.random((60, 3))
    y = X[:, 0] ** 2 + X[:, 1]
    if kind == "linear":
        model = fit_linear(X, y, feature_names=("a", "b", "c"))
    else:
        model = fit_gbt(X, y, GBTConfig(n_rounds=5), feature_names=("a", "b", "c"))
    path = tmp_path / "m.json"
    save_baseline(model, path)
    back = load_baseline(path)
    assert np.array_equal(back.predict(X), model.predict(X))
    assert back.feature_names == ("a", "b", "c")


def test_load_baseline_rejects_forest_file(tmp_path):
    X = np.random.default_rng(8).random((20, 2))
    path = tmp_path / "f.json"
    save_model(fit_forest(X, X[:, 0], ForestConfig(n_estimators=2)), path)
    with pytest.raises(ModelFormatError):
        load_baseline(path)
