import numpy as np
import pytest

from qmgm.benchmark import default_lambda_grid
from qmgm.core import DataError
from qmgm.mgm import (GlmFamily, deviance_block_loss, family_for,
                      fit_glm_lasso_path, fit_mgm, glm_deviance,
                      node_lambda_max)
from qmgm.selection import aic_score, SelectionCriterion, \
    estimate_edge_set, select_lambda, score_path


def test_family_assignment():
    assert family_for("continuous").name == "gaussian"
    assert family_for("count").name == "poisson"
    assert family_for("binary").name == "binomial"
    with pytest.raises(DataError):
        family_for("nominal")


def test_deviance_examples():
    g = GlmFamily("gaussian")
    y = np.array([1.0, 2.0, 3.0])
    assert glm_deviance(g, y, y) == 0.0
    b = GlmFamily("binomial")
    labels = np.array([0.0, 1.0] * 25)
    assert glm_deviance(b, labels, np.full(50, 0.5)) == pytest.approx(
        2 * 50 * np.log(2))
    p = GlmFamily("poisson")
    rng = np.random.default_rng(0)
    counts = rng.poisson(3.0, 100).astype(float)
    assert glm_deviance(p, counts, np.full(100, counts.mean())) >= 0.0
    assert glm_deviance(p, counts, counts + 1e-12) == pytest.approx(0.0, abs=1e-6)


def test_orthogonal_design_soft_threshold_identity():
    # with centered orthogonal unit-variance columns the LASSO solution is
    # the soft-thresholded least-squares coefficient vector
    rng = np.random.default_rng(1)
    n = 64
    raw = rng.normal(size=(n, 3))
    q, _ = np.linalg.qr(raw - raw.mean(axis=0))
    X = q * np.sqrt(n)            # columns: mean 0, (1/n) X'X = I
    y = X @ np.array([1.0, -0.3, 0.05]) + rng.normal(size=n)
    lam = 0.2
    path = fit_glm_lasso_path(y, X, GlmFamily("gaussian"), [lam])
    b0, beta, _, _, conv = path[0]
    ls = X.T @ (y - y.mean()) / n
    expected = np.sign(ls) * np.maximum(np.abs(ls) - lam, 0.0)
    assert conv
    assert beta == pytest.approx(expected, abs=1e-8)
    assert b0 == pytest.approx(y.mean(), abs=1e-8)


def test_lambda_max_empties_every_family(tiny_mixed):
    ds = tiny_mixed
    lambdas_checked = 0
    for j in range(ds.p):
        y = ds.values[:, j]
        X = np.delete(ds.values, j, axis=1)
        lmax = node_lambda_max(y, X)
        fam = family_for(ds.schema[j].kind)
        path = fit_glm_lasso_path(y, X, fam, [1.5 * lmax])
        assert np.all(path[0][1] == 0.0)
        lambdas_checked += 1
    assert lambdas_checked == ds.p


def test_fit_mgm_cube_contract(tiny_mixed):
    lambdas = default_lambda_grid(count=6)
    cube = fit_mgm(tiny_mixed, lambdas)
    assert cube.betas.shape == (4, 1, 6, 3)
    assert cube.tau_levels == pytest.approx([0.5])
    assert np.all(np.isfinite(cube.objectives))
    # shared machinery applies unchanged
    g = estimate_edge_set(cube, 5, 1e-6)
    assert g.p == 4
    crit = SelectionCriterion.from_name("bic", 4)
    scores = score_path(cube, tiny_mixed, crit,
                        block_loss=deviance_block_loss(tiny_mixed))
    idx, lam = select_lambda(scores, lambdas)
    assert 0 <= idx < 6
    aic = aic_score(cube, idx, tiny_mixed,
                    block_loss=deviance_block_loss(tiny_mixed))
    assert np.isfinite(aic)


def test_path_objectives_nonincreasing_in_lambda(tiny_mixed):
    # smaller penalties can only improve the deviance part
    lambdas = default_lambda_grid(count=10)
    for j, kind in ((0, "gaussian"), (2, "poisson"), (3, "binomial")):
        y = tiny_mixed.values[:, j]
        X = np.delete(tiny_mixed.values, j, axis=1)
        fam = family_for(tiny_mixed.schema[j].kind)
        path = fit_glm_lasso_path(y, X, fam, lambdas)
        dev = [glm_deviance(fam, y, fam.mean(b0 + X @ beta))
               for b0, beta, *_ in path]
        assert all(d1 <= d0 + 1e-6 for d0, d1 in zip(dev, dev[1:]))


def test_coordinate_descent_monotone_per_sweep(tiny_mixed):
    from qmgm.penalized import penalized_wls

    y = tiny_mixed.values[:, 1]
    X = np.delete(tiny_mixed.values, 1, axis=1)
    n = y.size
    w = np.ones(n)
    lam = 0.05

    def objective(b0, beta):
        r = y - b0 - X @ beta
        return float((w * r ** 2).sum() / (2 * n) + lam * np.abs(beta).sum())

    vals = []
    for sweeps in range(1, 8):
        b0, beta, _, _ = penalized_wls(X, w, y, 0.0, np.zeros(X.shape[1]),
                                       lam, max_sweeps=sweeps)
        vals.append(objective(b0, beta))
    assert all(v1 <= v0 + 1e-12 for v0, v1 in zip(vals, vals[1:]))


def test_warm_start_matches_cold_single(tiny_mixed):
    lambdas = default_lambda_grid(count=8)
    y = tiny_mixed.values[:, 0]
    X = np.delete(tiny_mixed.values, 0, axis=1)
    fam = family_for("continuous")
    path = fit_glm_lasso_path(y, X, fam, lambdas)
    lone = fit_glm_lasso_path(y, X, fam, [lambdas[4]])
    assert path[4][1] == pytest.approx(lone[0][1], abs=1e-7)
