import numpy as np
import pytest

import ssrlab


def test_closed_form_matches_reference():
    model = ssrlab.covariance("toeplitz", dim=12, rho=0.5)
    X = ssrlab.sample(model, 30, seed=3)
    A = ssrlab.fit_ssr(X, 0.1)
    B = ssrlab.fit_ssr_coordinatewise(X, 0.1)
    assert A.shape == (12, 12)
    assert np.max(np.abs(np.diag(A))) == 0.0
    assert np.allclose(A, B, rtol=1e-8, atol=1e-12)


def test_isotropic_ridgeless_prediction():
    model = ssrlab.covariance("identity", dim=200)
    p = ssrlab.predict_risk(model, 400, 1e-8)
    assert p["gen_error"] == pytest.approx(2.0, rel=1e-4)
    assert p["train_error"] == pytest.approx(0.5, rel=1e-4)
    k = ssrlab.solve_kappa(model, 400, 0.01)
    assert k["kappa"] * k["m_tilde"] == pytest.approx(1.0, abs=1e-10)


def test_density_and_closed_forms():
    model = ssrlab.covariance("identity", dim=200)
    lo, hi = ssrlab.universal_support(2.0)
    grid = list(np.linspace(lo - 0.5, hi + 0.2, 400))
    d = ssrlab.predicted_density(model, 400, 1e-3, grid)
    assert d["mass"] == pytest.approx(1.0, abs=0.02)
    assert min(d["density"]) >= 0.0
    assert ssrlab.ar1_phase_boundary(0.5) == pytest.approx(0.1512647, abs=1e-6)
    assert ssrlab.bbp_prediction(2.0, 1.0)["top"] == pytest.approx(5.0 / 6.0)


def test_run_and_errors():
    report = ssrlab.run({"model": {"kind": "identity", "dim": 30},
                         "grid": {"alphas": [2.0]},
                         "experiment": {"trials": 2, "lambda": 1e-3}})
    metrics = {r["metric"] for r in report["records"]}
    assert metrics == {"generalization", "training"}
    with pytest.raises(ValueError):
        ssrlab.covariance("toeplitz", dim=10, rho=1.5)
    with pytest.raises(ValueError):
        ssrlab.run({"model": {"kind": "identity"}})
