import math

import numpy as np
import pytest

import ivpseudo


def test_lasso_soft_threshold():
    X = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])
    fit = ivpseudo.fit_lasso(X, X @ np.array([0.9, 0.1]), 0.2)
    assert fit["converged"]
    np.testing.assert_allclose(fit["coefficients"], [0.7, 0.0], atol=1e-9)
    assert ivpseudo.lambda_max(X, X @ np.array([0.9, 0.1])) == pytest.approx(0.9)


def test_pseudos_keep_gram():
    Z = np.random.default_rng(3).standard_normal((40, 6))
    P = ivpseudo.generate_pseudos(Z, seed=1)
    np.testing.assert_allclose(P.T @ P, Z.T @ Z, atol=1e-10)
    assert not np.allclose(P, Z)


def test_wald_ratio_and_critical():
    rng = np.random.default_rng(0)
    z = rng.standard_normal((60, 1))
    d = z[:, 0] + rng.standard_normal(60)
    y = 2 * d + rng.standard_normal(60)
    est = ivpseudo.tsls(z, d, y)
    assert est["beta_hat"] == pytest.approx(z[:, 0] @ y / (z[:, 0] @ d), rel=1e-12)
    assert ivpseudo.normal_critical(0.05) == pytest.approx(1.959963984540054)


def test_simulate_and_estimate():
    assert "main" in ivpseudo.preset_names()
    data = ivpseudo.simulate(ivpseudo.preset("main", p=200), seed=4)
    assert data["Z"].shape == (500, 200)
    res = ivpseudo.estimate(data["Z"], data["D"], data["Y"], data["X"], seed=1)
    assert res["method"] == "proposed"
    assert abs(res["estimate"]["beta_hat"] - 2.0) < 0.3
    again = ivpseudo.estimate(data["Z"], data["D"], data["Y"], data["X"], seed=1)
    assert again == res


def test_errors_are_typed():
    with pytest.raises(ivpseudo.ConfigError):
        ivpseudo.preset("no_such_preset")
    with pytest.raises(ivpseudo.Error):
        ivpseudo.fit_lasso(np.ones((3, 2)), np.ones(4), 0.1)


def test_monte_carlo_rows():
    metrics, records = ivpseudo.monte_carlo(ivpseudo.preset("main", p=200), replicates=2,
                                            methods=["proposed", "ols"], threads=2, seed=5)
    assert [m["method"] for m in metrics] == ["proposed", "ols"]
    assert len(records) == 4
    assert all(math.isfinite(m["rmse"]) for m in metrics)
