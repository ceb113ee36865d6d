import numpy as np
import pytest
from hypothesis import given, strategies as st

from qmgm.benchmark import DgpVariant, default_lambda_grid, generate_sample
from qmgm.core import (CoefficientCube, DataError, Dataset, SIGN_LABELS,
                       VariableSpec, standard_levels, validate_and_standardize)
from qmgm.selection import (SelectionCriterion, aic_score, bic_score,
                            build_problems, estimate_edge_set, fit_qmgm,
                            score_path, select_lambda)


def cube_from_B(B, lambdas=(1.0,), taus=None):
    """Build a cube with B[j, l, k] = coefficient of node k in node j's
    regression, replicated over the lambda axis."""
    B = np.asarray(B, dtype=float)
    p, L = B.shape[0], B.shape[1]
    M = len(lambdas)
    betas = np.zeros((p, L, M, p - 1))
    for j in range(p):
        others = [k for k in range(p) if k != j]
        for mi in range(M):
            betas[j, :, mi, :] = B[j][:, others]
    taus = np.linspace(0.25, 0.75, L) if taus is None else np.asarray(taus)
    return CoefficientCube(np.zeros((p, L, M)), betas, np.asarray(lambdas),
                           taus, np.ones((p, L, M), bool),
                           np.ones((p, L, M), int), np.zeros((p, L, M)))


def test_edge_set_empty_below_tolerance():
    B = np.full((3, 2, 3), 1e-9)
    for j in range(3):
        B[j, :, j] = 0
    g = estimate_edge_set(cube_from_B(B), 0, 1e-6)
    assert g.n_edges == 0
    assert np.all(g.sign == 0)


def test_edge_set_or_rule_and_strength():
    B = np.zeros((3, 2, 3))
    B[0, 1, 2] = 0.8          # node 0 on node 2, second level only
    g = estimate_edge_set(cube_from_B(B, taus=[0.25, 0.75]), 0, 1e-6)
    assert g.n_edges == 1
    assert g.adjacency[0, 2] and g.adjacency[2, 0]
    assert g.strength[0, 2] == pytest.approx(0.8)
    assert SIGN_LABELS[int(g.sign[0, 2])] == "positive"
    assert g.prov_tau[0, 2] == pytest.approx(0.75)
    assert g.attained_by[0, 2] == 0


def test_edge_sign_rules():
    # both directions exceed with disagreeing signs -> undefined
    B = np.zeros((2, 1, 2))
    B[0, 0, 1] = 0.5
    B[1, 0, 0] = -0.4
    g = estimate_edge_set(cube_from_B(B), 0, 1e-6)
    assert SIGN_LABELS[int(g.sign[0, 1])] == "undefined"
    # agreeing signs -> that sign
    B[1, 0, 0] = 0.4
    g = estimate_edge_set(cube_from_B(B), 0, 1e-6)
    assert SIGN_LABELS[int(g.sign[0, 1])] == "positive"
    # single direction -> its sign
    B[1, 0, 0] = 0.0
    B[0, 0, 1] = -0.5
    g = estimate_edge_set(cube_from_B(B), 0, 1e-6)
    assert SIGN_LABELS[int(g.sign[0, 1])] == "negative"
    assert g.attained_by[0, 1] == 0


def test_edge_set_symmetry_and_tolerance_monotone():
    rng = np.random.default_rng(2)
    B = rng.normal(scale=0.1, size=(5, 3, 5))
    cube = cube_from_B(B)
    prev_edges = None
    for tol in (1e-6, 0.05, 0.1, 0.2):
        g = estimate_edge_set(cube, 0, tol)
        assert np.array_equal(g.adjacency, g.adjacency.T)
        assert not g.adjacency.diagonal().any()
        edges = {(a, b) for a, b, *_ in g.edges()}
        if prev_edges is not None:
            assert edges.issubset(prev_edges)
        prev_edges = edges


def linear_dataset():
    rng = np.random.default_rng(0)
    n = 40
    x0 = rng.normal(size=n)
    x1 = 0.5 * x0 + 0.1 * rng.normal(size=n)
    x2 = rng.normal(size=n)
    schema = tuple(VariableSpec(f"v{i}", "continuous") for i in range(3))
    return Dataset(np.column_stack([x0, x1, x2]), schema)


def test_bic_complexity_increment():
    # bumping one coefficient above the tolerance adds exactly
    # ln(n) ln(p-1) cn / (2n) while residuals move negligibly
    ds = linear_dataset()
    n, p = ds.n, ds.p
    B = np.zeros((3, 1, 3))
    cube0 = cube_from_B(B, taus=[0.5])
    B[2, 0, 0] = 2e-6          # counted as active, numerically irrelevant
    cube1 = cube_from_B(B, taus=[0.5])
    crit = SelectionCriterion.from_name("bicp", p)
    s0 = bic_score(cube0, 0, ds, crit)
    s1 = bic_score(cube1, 0, ds, crit)
    expected = np.log(n) * np.log(p - 1) * crit.cn / (2 * n)
    assert s1 - s0 == pytest.approx(expected, rel=1e-4)


def test_bic_guard_for_zero_residuals():
    ds = linear_dataset()
    B = np.zeros((3, 1, 3))
    cube = cube_from_B(B, taus=[0.5])
    loss = lambda j, l, b0, beta: 0.0
    crit = SelectionCriterion("bic", 1.0)
    score = bic_score(cube, 0, ds, crit, block_loss=loss)
    assert score == pytest.approx(3 * np.log(1e-12))


def test_criterion_presets():
    assert SelectionCriterion.from_name("bicp", 10).cn == pytest.approx(np.log(9))
    assert SelectionCriterion.from_name("bicp", 10).cn == pytest.approx(2.197, abs=0.003)
    assert SelectionCriterion.from_name("bic2p", 10).cn == pytest.approx(np.log(9) / 2)
    assert SelectionCriterion.from_name("bic3p", 10).cn == pytest.approx(np.log(9) / 3)
    assert SelectionCriterion.from_name("bic", 10).cn == 1.0
    assert SelectionCriterion.from_name("aic", 10).kind == "aic"
    with pytest.raises(DataError):
        SelectionCriterion.from_name("bicx", 10)
    with pytest.raises(DataError):
        SelectionCriterion("bic", 0.0)


def test_aic_examples():
    ds = linear_dataset()
    B = np.zeros((3, 1, 3))
    cube = cube_from_B(B, taus=[0.5])
    unit_loss = lambda j, l, b0, beta: 1.0
    assert aic_score(cube, 0, ds, block_loss=unit_loss) == pytest.approx(0.0, abs=1e-9)
    r_loss = lambda j, l, b0, beta: 7.5
    assert aic_score(cube, 0, ds, block_loss=r_loss) == pytest.approx(
        3 * np.log(7.5), abs=1e-9)
    # one active coefficient costs 2/(2n) per block
    B[0, 0, 1] = 1.0
    cube1 = cube_from_B(B, taus=[0.5])
    delta = (aic_score(cube1, 0, ds, block_loss=unit_loss)
             - aic_score(cube, 0, ds, block_loss=unit_loss))
    assert delta == pytest.approx(1.0 / ds.n, abs=1e-12)


def test_select_lambda_rules():
    lam = np.array([5.0, 2.0, 1.0, 0.5])
    idx, val = select_lambda([4.0, 1.0, 2.0, 3.0], lam)
    assert (idx, val) == (1, 2.0)
    idx, val = select_lambda([4.0, 3.0, 2.0, 1.0], lam)
    assert (idx, val) == (3, 0.5)
    idx, val = select_lambda([2.0, 1.0, 1.0, 3.0], lam)
    assert (idx, val) == (1, 2.0)   # tie resolves to the larger lambda


@given(st.floats(0.1, 10.0), st.floats(-5.0, 5.0))
def test_select_lambda_affine_invariance(a, b):
    lam = np.array([3.0, 1.0, 0.3])
    scores = np.array([2.0, 0.5, 1.0])
    base = select_lambda(scores, lam)
    assert select_lambda(a * scores + b, lam) == base


def test_fit_qmgm_cube_shape_and_selection(dgp_500):
    ds, _ = dgp_500
    lambdas = default_lambda_grid(count=8)
    problems = build_problems(ds)
    cube = fit_qmgm(ds, standard_levels(3), lambdas, problems=problems)
    assert cube.betas.shape == (10, 3, 8, 9)
    assert np.all(np.isfinite(cube.objectives))
    crit = SelectionCriterion.from_name("bicp", ds.p)
    scores = score_path(cube, ds, crit)
    idx, lam = select_lambda(scores, lambdas)
    assert 0 <= idx < 8
    # the largest grid value keeps every model empty on standardized data
    assert estimate_edge_set(cube, 0).n_edges == 0


def test_fit_qmgm_single_level_matches_grid_object(dgp_500):
    ds, _ = dgp_500
    lambdas = default_lambda_grid(count=4)
    problems = build_problems(ds)
    c1 = fit_qmgm(ds, standard_levels(1), lambdas, problems=problems)
    assert c1.tau_levels == pytest.approx([0.5])
    assert c1.betas.shape[1] == 1


def test_fit_qmgm_threads_deterministic(dgp_500):
    ds, _ = dgp_500
    lambdas = default_lambda_grid(count=5)
    problems = build_problems(ds)
    c1 = fit_qmgm(ds, standard_levels(1), lambdas, problems=problems, threads=1)
    c2 = fit_qmgm(ds, standard_levels(1), lambdas, problems=problems, threads=2)
    assert np.array_equal(c1.betas, c2.betas)
    assert np.array_equal(c1.intercepts, c2.intercepts)


def test_independent_appendix_columns_stay_disconnected():
    base, _ = generate_sample(DgpVariant("main", 600, 23))
    rng = np.random.default_rng(99)
    extra = np.column_stack([rng.normal(size=600), rng.poisson(2.0, 600)])
    values = np.column_stack([base.values, extra])
    schema = base.schema + (VariableSpec("ind1", "continuous"),
                            VariableSpec("ind2", "count"))
    ds = validate_and_standardize(Dataset(values, schema))
    lambdas = np.asarray([0.3])
    cube = fit_qmgm(ds, standard_levels(1), lambdas)
    g = estimate_edge_set(cube, 0, 0.05)
    touching = g.adjacency[10:, :].sum()
    assert touching == 0


def test_fit_qmgm_rejects_missing(tiny_mixed):
    mask = np.zeros((tiny_mixed.n, tiny_mixed.p), dtype=bool)
    mask[0, 0] = True
    ds = Dataset(tiny_mixed.values, tiny_mixed.schema, mask)
    with pytest.raises(DataError):
        fit_qmgm(ds, standard_levels(1), [0.5])
