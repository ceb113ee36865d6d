"""Synthetic structure-recovery benchmark.

A ten-node mixed network (five continuous, five discrete nodes) is sampled
from a chain of conditional quantile models; learners are run across Monte
Carlo replications and scored against the known twelve-edge truth with
ROC/AUC along the penalty path and confusion metrics at the selected
penalty.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats
from scipy.special import expit

from .core import (DataError, Dataset, NONZERO_TOL, QuantileGrid,
                   VariableSpec, _readonly, standard_levels,
                   validate_and_standardize)
from .mgm import deviance_block_loss, fit_mgm
from .selection import (CRITERION_NAMES, SelectionCriterion, build_problems,
                        estimate_edge_set, fit_qmgm, score_path, select_lambda)

# Dependency structure of the generator: node -> parents (1-based).
MAIN_EDGES = ((1, 2), (1, 3), (1, 5), (1, 6), (2, 8), (3, 4),
              (3, 7), (5, 7), (5, 8), (7, 8), (8, 9), (9, 10))


@dataclass(frozen=True, eq=False)
class TrueGraph:
    """Adjacency of the generating structure."""

    adjacency: np.ndarray

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise DataError("true graph adjacency must be square")
        if not np.array_equal(adj, adj.T) or adj.diagonal().any():
            raise DataError("true graph must be symmetric with a false diagonal")
        object.__setattr__(self, "adjacency", _readonly(adj))

    @property
    def p(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_edges(self) -> int:
        return int(np.triu(self.adjacency, 1).sum())


@dataclass(frozen=True)
class DgpVariant:
    """Which generator ('main' or 'binary'), sample size, and seed."""

    kind: str = "main"
    n: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("main", "binary"):
            raise DataError(f"unknown generator variant {self.kind!r}")
        if self.n < 10:
            raise DataError("variant needs n >= 10")


def true_graph(kind: str = "main") -> TrueGraph:
    """Twelve-edge truth shared by both generator variants."""
    adj = np.zeros((10, 10), dtype=bool)
    for a, b in MAIN_EDGES:
        adj[a - 1, b - 1] = adj[b - 1, a - 1] = True
    return TrueGraph(adj)


def poisson_quantile(u, rate):
    """Poisson quantile by direct CDF search: smallest m with CDF(m) >= u."""
    u = np.asarray(u, dtype=float)
    rate = np.broadcast_to(np.asarray(rate, dtype=float), u.shape).copy()
    out = np.zeros(u.shape)
    pmf = np.exp(-rate)
    cdf = pmf.copy()
    unresolved = cdf < u
    m = 0
    while unresolved.any():
        m += 1
        if m > 100000:
            raise DataError("poisson quantile search exceeded its support cap")
        pmf *= rate / m
        cdf += pmf
        done = unresolved & (cdf >= u)
        out[done] = m
        unresolved &= ~done
    return out


def bernoulli_quantile(u, prob):
    """Bernoulli quantile 1{u > 1 - p}; p is clamped into [0, 1]."""
    p = np.clip(np.asarray(prob, dtype=float), 0.0, 1.0)
    return (np.asarray(u, dtype=float) > 1.0 - p).astype(float)


def generate_sample(variant: DgpVariant):
    """Draw one dataset from the benchmark generator.

    Each row draws ten independent uniforms feeding the conditional quantile
    formulas in node order; the three discrete-uniform noise terms are drawn
    independently afterwards.  Identical seeds give bit-identical samples.

    In the binary variant the probability of the last node, taken as
    printed, always clamps to one, so that column is constant and the
    resulting dataset fails validation; see the docs.
    """
    rng = np.random.default_rng(variant.seed)
    n = variant.n
    U = np.clip(rng.random((n, 10)), 1e-15, 1.0 - 1e-16)
    du6 = rng.integers(1, 4, n).astype(float)
    du8 = rng.integers(1, 4, n).astype(float)
    du9 = rng.integers(1, 6, n).astype(float)

    y = np.zeros((n, 10))
    y[:, 0] = stats.t.ppf(U[:, 0], df=3)
    y1 = y[:, 0]
    y[:, 1] = -0.5 * U[:, 1] ** 2 * (y1 + 3.0)
    y[:, 2] = y1 + stats.gamma.ppf(U[:, 2], a=np.abs(y1) + 0.1, scale=0.5)
    y3 = y[:, 2]
    y[:, 3] = 0.1 * (y3 + 5.0) ** 2 * np.sqrt(np.abs(y3 + 5.0)) * stats.norm.ppf(U[:, 3])
    y[:, 4] = (2.0 * np.cos(np.pi * y1 / 4.0) * (U[:, 4] - 0.5) * (y1 + 2.0)
               + (0.1 + 0.1 * np.abs(y1)) * stats.norm.ppf(U[:, 4]))
    y5 = y[:, 4]
    y[:, 5] = np.floor((U[:, 5] + 0.5) * np.abs(y1)) + du6
    rate7 = np.abs(y3 + 5.0) ** -0.5 + np.abs(np.log(np.abs(y5) + 1.0))
    if variant.kind == "main":
        y[:, 6] = poisson_quantile(U[:, 6], rate7)
    else:
        p7 = expit(2.0 + np.abs(y3 + 5.0) ** -0.5 - np.abs(np.log(np.abs(y5) + 1.0)))
        y[:, 6] = bernoulli_quantile(U[:, 6], p7)
    y7 = y[:, 6]
    y[:, 7] = (np.floor(U[:, 7] * y7 + np.abs(y[:, 1] + 0.5) ** 1.3)
               + du8 * np.floor(1.0 + np.abs(y5)))
    y[:, 8] = np.floor(1.0 + U[:, 8] * y[:, 7]) + du9
    y9 = y[:, 8]
    if variant.kind == "main":
        rate10 = np.exp(0.8 * U[:, 9] * np.log(np.abs(y9 + 0.1)))
        y[:, 9] = poisson_quantile(U[:, 9], rate10)
    else:
        p10 = np.exp(3.0 + 0.8 * U[:, 9] * np.log(np.abs(y9 + 0.1)))
        y[:, 9] = bernoulli_quantile(U[:, 9], p10)

    kinds = ["continuous"] * 5 + ["count"] * 5
    if variant.kind == "binary":
        kinds[6] = kinds[9] = "binary"
    schema = tuple(VariableSpec(f"Y{j + 1}", kinds[j]) for j in range(10))
    return Dataset(y, schema), true_graph(variant.kind)


def generate_null_sample(n: int, seed: int, n_continuous: int = 3, n_count: int = 3):
    """Mutually independent columns (edgeless truth) for null-structure checks."""
    rng = np.random.default_rng(seed)
    p = n_continuous + n_count
    cols = [rng.normal(size=n) for _ in range(n_continuous)]
    cols += [rng.poisson(3.0, size=n).astype(float) for _ in range(n_count)]
    schema = tuple(
        VariableSpec(f"V{j + 1}", "continuous" if j < n_continuous else "count")
        for j in range(p))
    return Dataset(np.column_stack(cols), schema), TrueGraph(np.zeros((p, p), dtype=bool))


@dataclass(frozen=True)
class RecoveryMetrics:
    """Confusion-based structure recovery scores over unordered node pairs."""

    precision: float
    tpr: float
    fpr: float
    f1: float
    mcc: float
    accuracy: float


def _adjacency_of(graph) -> np.ndarray:
    if isinstance(graph, np.ndarray):
        return np.asarray(graph, dtype=bool)
    return np.asarray(graph.adjacency, dtype=bool)


def pair_counts(truth, estimate):
    """(tp, fp, tn, fn) over the p(p-1)/2 unordered node pairs."""
    t = _adjacency_of(truth)
    e = _adjacency_of(estimate)
    if t.shape != e.shape:
        raise DataError("graphs must have the same number of nodes")
    iu = np.triu_indices(t.shape[0], 1)
    t, e = t[iu], e[iu]
    tp = int(np.sum(t & e))
    fp = int(np.sum(~t & e))
    tn = int(np.sum(~t & ~e))
    fn = int(np.sum(t & ~e))
    return tp, fp, tn, fn


def metrics_from_counts(tp: int, fp: int, tn: int, fn: int) -> RecoveryMetrics:
    """Zero denominators yield a zero metric by convention."""
    def ratio(num, den):
        return num / den if den > 0 else 0.0

    mcc_den = np.sqrt(float(tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    return RecoveryMetrics(
        precision=ratio(tp, tp + fp),
        tpr=ratio(tp, tp + fn),
        fpr=ratio(fp, fp + tn),
        f1=ratio(2 * tp, 2 * tp + fp + fn),
        mcc=float((tp * tn - fp * fn) / mcc_den) if mcc_den > 0 else 0.0,
        accuracy=ratio(tp + tn, tp + fp + tn + fn),
    )


def confusion_metrics(truth, estimate) -> RecoveryMetrics:
    return metrics_from_counts(*pair_counts(truth, estimate))


def roc_curve(truth, graphs):
    """ROC points along a penalty path plus the envelope AUC.

    One (FPR, TPR) point per graph, augmented with (0, 0) and (1, 1); the
    AUC integrates the monotone upper envelope (points sorted by FPR with
    cumulative-max TPR) by the trapezoidal rule.
    """
    pts = [(0.0, 0.0)]
    for g in graphs:
        m = confusion_metrics(truth, g)
        pts.append((m.fpr, m.tpr))
    pts.append((1.0, 1.0))
    pts = np.asarray(pts)
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    fpr = pts[order, 0]
    tpr = np.maximum.accumulate(pts[order, 1])
    auc = float(np.trapezoid(tpr, fpr))
    return pts, auc


@dataclass(frozen=True)
class LearnerConfig:
    """A named learner: 'mgm' or 'qmgm<L>' for an L-level quantile grid."""

    name: str
    kind: str
    levels: QuantileGrid | None = None

    @classmethod
    def from_name(cls, name: str) -> "LearnerConfig":
        name = name.strip().lower()
        if name == "mgm":
            return cls("mgm", "mgm")
        if name.startswith("qmgm"):
            try:
                count = int(name[4:])
            except ValueError:
                raise DataError(f"unknown learner {name!r}") from None
            return cls(name, "qmgm", standard_levels(count))
        raise DataError(f"unknown learner {name!r}")


def default_lambda_grid(lo: float = 0.001, hi: float = 5.0, count: int = 50) -> np.ndarray:
    """Log-equispaced penalty grid, returned in decreasing order."""
    if not 0 < lo < hi:
        raise DataError("lambda grid needs 0 < lo < hi")
    if count < 1:
        raise DataError("lambda grid needs at least one value")
    if count == 1:
        return np.asarray([hi])
    return np.exp(np.linspace(np.log(hi), np.log(lo), count))


def run_learner(dataset: Dataset, truth: TrueGraph, learner: LearnerConfig,
                lambdas, criteria=CRITERION_NAMES, *,
                nonzero_tol: float = NONZERO_TOL, problems=None) -> dict:
    """Fit one learner on one dataset: path AUC plus per-criterion selection."""
    start = time.perf_counter()
    if learner.kind == "qmgm":
        cube = fit_qmgm(dataset, learner.levels, lambdas,
                        nonzero_tol=nonzero_tol, problems=problems)
        block_loss = None
    else:
        cube = fit_mgm(dataset, lambdas, nonzero_tol=nonzero_tol)
        block_loss = deviance_block_loss(dataset)
    graphs = [estimate_edge_set(cube, mi, nonzero_tol)
              for mi in range(cube.n_lambdas)]
    _, auc = roc_curve(truth, graphs)
    by_criterion = {}
    for cname in criteria:
        crit = SelectionCriterion.from_name(cname, dataset.p)
        scores = score_path(cube, dataset, crit, block_loss=block_loss,
                            nonzero_tol=nonzero_tol)
        mi, lam = select_lambda(scores, lambdas)
        rec = asdict(confusion_metrics(truth, graphs[mi]))
        rec["edges"] = graphs[mi].n_edges
        rec["lambda"] = lam
        by_criterion[cname] = rec
    return {"auc": auc, "seconds": time.perf_counter() - start,
            "criteria": by_criterion}


def _replication_worker(args):
    (kind, n, seed, index, learner_names, lambdas, criteria,
     nonzero_tol, sample_fn) = args
    variant = DgpVariant(kind, n, seed)
    sample = sample_fn if sample_fn is not None else generate_sample
    try:
        dataset, truth = sample(variant)
        dataset = validate_and_standardize(dataset)
        learners = [LearnerConfig.from_name(name) for name in learner_names]
        problems = (build_problems(dataset)
                    if any(lc.kind == "qmgm" for lc in learners) else None)
        record = {}
        for lc in learners:
            record[lc.name] = run_learner(dataset, truth, lc, lambdas, criteria,
                                          nonzero_tol=nonzero_tol,
                                          problems=problems)
        return index, seed, record, None
    except Exception as exc:  # noqa: BLE001 - failures are recorded, not fatal
        return index, seed, None, f"{type(exc).__name__}: {exc}"


METRIC_FIELDS = ("precision", "tpr", "fpr", "f1", "mcc", "accuracy", "edges")


@dataclass
class BenchmarkRun:
    """Replication records plus summary helpers."""

    variant_kind: str
    n: int
    base_seed: int
    R: int
    learner_names: tuple
    criteria: tuple
    lambdas: np.ndarray
    records: list          # (index, seed, record) for successes
    failures: list         # (index, seed, message)

    def _collect(self, learner, getter):
        return np.asarray([getter(rec) for _, _, rec in self.records
                           if learner in rec])

    @staticmethod
    def _stats(values: np.ndarray):
        return (float(np.median(values)),
                float(np.percentile(values, 10)),
                float(np.percentile(values, 90)))

    def summary_rows(self) -> list:
        """Per learner: path AUC row plus one row per criterion and metric."""
        rows = []
        for learner in self.learner_names:
            auc = self._collect(learner, lambda r: r[learner]["auc"])
            if auc.size == 0:
                continue
            med, p10, p90 = self._stats(auc)
            rows.append({"learner": learner, "criterion": "path", "metric": "auc",
                         "median": med, "p10": p10, "p90": p90})
            for cname in self.criteria:
                for metric in METRIC_FIELDS:
                    vals = self._collect(
                        learner, lambda r: r[learner]["criteria"][cname][metric])
                    med, p10, p90 = self._stats(vals)
                    rows.append({"learner": learner, "criterion": cname,
                                 "metric": metric, "median": med,
                                 "p10": p10, "p90": p90})
        return rows

    def timing_rows(self) -> list:
        rows = []
        for learner in self.learner_names:
            secs = self._collect(learner, lambda r: r[learner]["seconds"])
            if secs.size == 0:
                continue
            med, p10, p90 = self._stats(secs)
            rows.append({"learner": learner, "criterion": "path",
                         "metric": "seconds", "median": med,
                         "p10": p10, "p90": p90})
        return rows

    def detail_rows(self) -> list:
        rows = []
        for index, seed, rec in self.records:
            for learner in self.learner_names:
                if learner not in rec:
                    continue
                rows.append({"replication": index, "seed": seed,
                             "learner": learner, "criterion": "path",
                             "metric": "auc", "value": rec[learner]["auc"]})
                for cname in self.criteria:
                    crit = rec[learner]["criteria"][cname]
                    for metric in METRIC_FIELDS + ("lambda",):
                        rows.append({"replication": index, "seed": seed,
                                     "learner": learner, "criterion": cname,
                                     "metric": metric, "value": crit[metric]})
        return rows

    def config_digest(self) -> str:
        payload = {
            "variant": self.variant_kind, "n": self.n, "seed": self.base_seed,
            "R": self.R, "learners": list(self.learner_names),
            "criteria": list(self.criteria),
            "lambdas": [float(v) for v in self.lambdas],
        }
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


SUMMARY_FIELDS = ("learner", "criterion", "metric", "median", "p10", "p90")
DETAIL_FIELDS = ("replication", "seed", "learner", "criterion", "metric", "value")


def write_outputs(run: BenchmarkRun, outdir: str, *, threads: int = 1):
    """Write summary/timing/detail tables, the truth document and the
    manifest into a directory.  Wall-clock lives in its own file so the
    summary stays byte-identical across reruns of the same config."""
    import os

    from .io import document_from_adjacency, export_graph, write_rows_csv

    os.makedirs(outdir, exist_ok=True)
    write_rows_csv(run.summary_rows(), SUMMARY_FIELDS,
                   os.path.join(outdir, "summary.csv"))
    write_rows_csv(run.timing_rows(), SUMMARY_FIELDS,
                   os.path.join(outdir, "timing.csv"))
    write_rows_csv(run.detail_rows(), DETAIL_FIELDS,
                   os.path.join(outdir, "details.csv"))
    truth = true_graph(run.variant_kind)
    export_graph(document_from_adjacency([f"Y{i + 1}" for i in range(truth.p)],
                                         truth.adjacency),
                 os.path.join(outdir, "truth.json"))
    lam = run.lambdas
    manifest = [
        f"config_digest: {run.config_digest()}",
        f"variant: {run.variant_kind}",
        f"n: {run.n}",
        f"R: {run.R}",
        f"base_seed: {run.base_seed}",
        f"learners: {','.join(run.learner_names)}",
        f"criteria: {','.join(run.criteria)}",
        f"lambda_grid: max={lam[0]:.12g} min={lam[-1]:.12g} count={lam.size}",
        f"threads: {threads}",
        f"replication_seeds: {','.join(str(run.base_seed + r) for r in range(run.R))}",
        f"failures: {len(run.failures)}",
    ]
    manifest += [f"failure: replication={i} seed={s} error={msg}"
                 for i, s, msg in run.failures]
    with open(os.path.join(outdir, "manifest.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(manifest) + "\n")


def run_replications(learner_names, variant: DgpVariant, R: int, *,
                     lambdas=None, criteria=CRITERION_NAMES,
                     nonzero_tol: float = NONZERO_TOL, threads: int = 1,
                     sample_fn=None) -> BenchmarkRun:
    """Run R Monte Carlo replications (replication r uses seed base + r).

    Individual replication failures are recorded and excluded from the
    summaries.  Results are independent of the thread count.
    """
    if R < 1:
        raise DataError("R must be >= 1")
    lambdas = default_lambda_grid() if lambdas is None else np.asarray(lambdas, float)
    learner_names = tuple(LearnerConfig.from_name(nm).name for nm in learner_names)
    tasks = [(variant.kind, variant.n, variant.seed + r, r, learner_names,
              lambdas, tuple(criteria), nonzero_tol, sample_fn)
             for r in range(R)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_replication_worker, tasks, chunksize=1))
    else:
        outcomes = [_replication_worker(t) for t in tasks]
    records, failures = [], []
    for index, seed, record, error in sorted(outcomes, key=lambda o: o[0]):
        if error is None:
            records.append((index, seed, record))
        else:
            failures.append((index, seed, error))
    return BenchmarkRun(variant.kind, variant.n, variant.seed, R,
                        learner_names, tuple(criteria), lambdas,
                        records, failures)
