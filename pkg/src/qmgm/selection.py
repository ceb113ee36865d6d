"""Neighborhood-selection orchestration: fit every (node, level, lambda)
combination, extract edge sets by the max/OR rule, and score lambdas with
quantile-loss information criteria."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import (CoefficientCube, DataError, Dataset, EstimatedGraph,
                   NONZERO_TOL, QuantileGrid, SIGN_ABSENT, SIGN_NEGATIVE,
                   SIGN_POSITIVE, SIGN_UNDEFINED, quantile_loss)
from .penalized import (CONVERGENCE_TOL, MAX_ITERATIONS, NodeProblem,
                        _link_inverse, fit_lambda_path)

BIC_EPS_GUARD = 1e-12


@dataclass(frozen=True)
class SelectionCriterion:
    """AIC, or the quantile-loss BIC with complexity constant cn."""

    kind: str
    cn: float = 1.0

    def __post_init__(self):
        if self.kind not in ("aic", "bic"):
            raise DataError(f"unknown criterion kind {self.kind!r}")
        if self.kind == "bic" and not self.cn > 0:
            raise DataError("BIC requires cn > 0")

    @classmethod
    def from_name(cls, name: str, p: int, cn: float | None = None) -> "SelectionCriterion":
        """Named presets: aic, bic (cn=1), bicp (cn=log(p-1)), bic2p, bic3p."""
        name = name.lower()
        if name == "aic":
            return cls("aic")
        presets = {
            "bic": 1.0,
            "bicp": np.log(p - 1),
            "bic2p": np.log(p - 1) / 2.0,
            "bic3p": np.log(p - 1) / 3.0,
        }
        if name not in presets:
            raise DataError(f"unknown criterion {name!r}")
        return cls("bic", float(cn if cn is not None else presets[name]))


CRITERION_NAMES = ("aic", "bic", "bicp", "bic2p", "bic3p")


def build_problems(dataset: Dataset, threads: int = 1) -> list:
    """Run the mid-CDF step for every node (shareable across level grids)."""
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_problem_worker, [(dataset, j) for j in range(dataset.p)]))
    return [NodeProblem.build(dataset, j) for j in range(dataset.p)]


def _problem_worker(args):
    dataset, j = args
    return NodeProblem.build(dataset, j)


def _path_worker(args):
    problem, tau, lambdas, kw = args
    return fit_lambda_path(problem, tau, lambdas, **kw)


def fit_qmgm(dataset: Dataset, grid: QuantileGrid, lambdas, *, weights=None,
             method: str = "inverse", max_iterations: int = MAX_ITERATIONS,
             tol: float = CONVERGENCE_TOL, nonzero_tol: float = NONZERO_TOL,
             threads: int = 1, problems: list | None = None) -> CoefficientCube:
    """Fit penalized mid-quantile regressions for every node, level and
    lambda; lambdas must be strictly decreasing (paths are warm-started).

    ``problems`` may carry prebuilt per-node mid-CDF fits so several level
    grids can share the expensive first step; ``method`` selects the path
    solver (see penalized.fit_lambda_path).
    """
    if dataset.has_missing():
        raise DataError("fitting requires imputed (non-missing) data")
    lambdas = np.asarray(lambdas, dtype=float)
    if problems is None:
        problems = build_problems(dataset)
    p = dataset.p
    levels = list(grid.levels)
    kw = dict(weights=weights, method=method, max_iterations=max_iterations,
              tol=tol, nonzero_tol=nonzero_tol)
    tasks = [(problems[j], tau, lambdas, kw) for j in range(p) for tau in levels]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            paths = list(pool.map(_path_worker, tasks, chunksize=1))
    else:
        paths = [_path_worker(t) for t in tasks]
    L, M = len(levels), lambdas.size
    intercepts = np.zeros((p, L, M))
    betas = np.zeros((p, L, M, p - 1))
    converged = np.zeros((p, L, M), dtype=bool)
    iterations = np.zeros((p, L, M), dtype=int)
    objectives = np.zeros((p, L, M))
    for idx, path in enumerate(paths):
        j, l = divmod(idx, L)
        for mi, res in enumerate(path):
            intercepts[j, l, mi] = res.intercept
            betas[j, l, mi] = res.beta
            converged[j, l, mi] = res.converged
            iterations[j, l, mi] = res.iterations
            objectives[j, l, mi] = res.objective
    return CoefficientCube(intercepts, betas, lambdas, np.asarray(levels),
                           converged, iterations, objectives)


def _coefficient_tensor(cube: CoefficientCube, lambda_index: int) -> np.ndarray:
    """B[j, l, k] = coefficient of node k in node j's regression."""
    p, L = cube.p, cube.n_levels
    B = np.zeros((p, L, p))
    for j in range(p):
        others = np.concatenate((np.arange(j), np.arange(j + 1, p)))
        B[j][:, others] = cube.betas[j, :, lambda_index, :]
    return B


def estimate_edge_set(cube: CoefficientCube, lambda_index: int,
                      tolerance: float = NONZERO_TOL) -> EstimatedGraph:
    """Edge (j, k) is present when either direction's coefficient exceeds
    the tolerance in absolute value at any level (max/OR rule); the edge
    strength is that maximum and the sign comes from the attaining
    coefficients (undefined when the two directions disagree)."""
    B = _coefficient_tensor(cube, lambda_index)
    p = cube.p
    absB = np.abs(B)
    D = absB.max(axis=1)                      # (p, p) directional max over levels
    arg_l = absB.argmax(axis=1)               # attaining level per direction
    rows = np.arange(p)[:, None]
    cols = np.arange(p)[None, :]
    at_max = B[rows, arg_l, cols]             # attaining signed coefficient
    sgn_dir = np.sign(at_max).astype(np.int8)

    strength = np.maximum(D, D.T)
    np.fill_diagonal(strength, 0.0)
    adjacency = strength > tolerance
    strength = np.where(adjacency, strength, 0.0)

    exceeds = D > tolerance
    np.fill_diagonal(exceeds, False)
    sign = np.full((p, p), SIGN_ABSENT, dtype=np.int8)
    both = exceeds & exceeds.T
    agree = sgn_dir == sgn_dir.T
    sign[both & agree] = sgn_dir[both & agree]
    sign[both & ~agree] = SIGN_UNDEFINED
    fwd_only = exceeds & ~exceeds.T
    sign[fwd_only] = sgn_dir[fwd_only]
    sign[fwd_only.T] = sgn_dir.T[fwd_only.T]
    sign[~adjacency] = SIGN_ABSENT

    J = np.broadcast_to(rows, (p, p))
    K = np.broadcast_to(cols, (p, p))
    attained = np.where(D > D.T, J, np.where(D.T > D, K, np.minimum(J, K)))
    attained = np.where(adjacency, attained, -1)
    level_at = np.where(attained == J, arg_l, arg_l.T)
    prov_tau = np.where(adjacency, cube.tau_levels[level_at], np.nan)
    return EstimatedGraph(adjacency, strength, sign, prov_tau, attained)


def _complexity(kind: str, cn: float, n: int, p: int) -> float:
    if kind == "aic":
        return 2.0 / (2.0 * n)
    return float(np.log(n) * np.log(p - 1) * cn / (2.0 * n))


def _score(cube: CoefficientCube, lambda_index: int, dataset: Dataset,
           kind: str, cn: float, block_loss, use_link_inverse: bool,
           nonzero_tol: float) -> float:
    p, n = dataset.p, dataset.n
    per_coef = _complexity(kind, cn, n, p)
    total = 0.0
    for j in range(p):
        yj = dataset.values[:, j]
        Xj = np.delete(dataset.values, j, axis=1)
        link = dataset.schema[j].link
        for l, tau in enumerate(cube.tau_levels):
            b0 = cube.intercepts[j, l, lambda_index]
            beta = cube.betas[j, l, lambda_index]
            if block_loss is not None:
                loss = float(block_loss(j, l, b0, beta))
            else:
                pred = b0 + Xj @ beta
                if use_link_inverse:
                    pred = _link_inverse(pred, link)[0]
                loss = float(np.sum(quantile_loss(yj - pred, float(tau))))
            nu = int(np.count_nonzero(np.abs(beta) > nonzero_tol))
            total += np.log(loss + BIC_EPS_GUARD) + nu * per_coef
    return float(total)


def bic_score(cube: CoefficientCube, lambda_index: int, dataset: Dataset,
              criterion: SelectionCriterion, *, block_loss=None,
              use_link_inverse: bool = False,
              nonzero_tol: float = NONZERO_TOL) -> float:
    """Quantile-loss BIC: per (node, level) block, the log of the summed
    quantile loss plus nu * ln(n) ln(p-1) cn / (2n), where nu is the block's
    active-set size.

    Residuals are taken on the response scale against the bare linear
    predictor; set ``use_link_inverse`` to apply the link inverse first.
    ``block_loss(j, l, intercept, beta)`` replaces the quantile-loss sum
    (the mean-based baseline plugs its deviance in here).
    """
    if criterion.kind != "bic":
        raise DataError("bic_score requires a BIC criterion")
    return _score(cube, lambda_index, dataset, "bic", criterion.cn,
                  block_loss, use_link_inverse, nonzero_tol)


def aic_score(cube: CoefficientCube, lambda_index: int, dataset: Dataset, *,
              block_loss=None, use_link_inverse: bool = False,
              nonzero_tol: float = NONZERO_TOL) -> float:
    """Same block structure as the BIC with the complexity factor replaced
    by the constant 2."""
    return _score(cube, lambda_index, dataset, "aic", 1.0,
                  block_loss, use_link_inverse, nonzero_tol)


def score_path(cube: CoefficientCube, dataset: Dataset,
               criterion: SelectionCriterion, *, block_loss=None,
               use_link_inverse: bool = False,
               nonzero_tol: float = NONZERO_TOL) -> np.ndarray:
    """Criterion scores along the whole lambda grid."""
    args = dict(block_loss=block_loss, use_link_inverse=use_link_inverse,
                nonzero_tol=nonzero_tol)
    if criterion.kind == "aic":
        return np.asarray([aic_score(cube, mi, dataset, **args)
                           for mi in range(cube.n_lambdas)])
    return np.asarray([bic_score(cube, mi, dataset, criterion, **args)
                       for mi in range(cube.n_lambdas)])


def select_lambda(scores, lambda_grid):
    """Index and value of the score-minimizing lambda; ties resolve to the
    larger lambda (sparser model)."""
    scores = np.asarray(scores, dtype=float)
    lam = np.asarray(lambda_grid, dtype=float)
    if scores.size == 0 or scores.shape != lam.shape:
        raise DataError("scores and lambda grid must be matching nonempty sequences")
    minimal = np.flatnonzero(scores == scores.min())
    best = minimal[np.argmax(lam[minimal])]
    return int(best), float(lam[best])
