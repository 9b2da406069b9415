"""Report metrics: discrimination, disparity, triviality and sweep measures.

Analytic reports are exact functions of the policy and the empirical
model (no randomness); sampled reports draw adjusted predictions on a
holdout and measure the same quantities from counts. Disparity is the
mean over unordered group pairs of the elementwise mean absolute
difference of the post-adjustment confusion matrices; the sweep measure
is the criterion-specific analogue with a max over pairs.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Any

import numpy as np

from .data_model import AdjustmentDataset, make_splits
from .estimation import EmpiricalModel, EstimationError, fit_empirical
from .fairness_lp import CRITERIA, FairnessSpec, ObjectiveSpec
from .lp_solver import SolverError
from .policy import AdjustmentPolicy, PolicyError, analytic_confusions, fit_policy, predict_rows
from .rng import derive_seed

TRIVIAL_EPS = 1e-9


@dataclass(frozen=True)
class EvaluationReport:
    accuracy: float
    mean_tdr: float
    fdr: np.ndarray        # (G, C)
    disparity: float
    brier: float
    youden_j: np.ndarray   # (G, C)
    trivial: bool
    sweep_measure: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "accuracy": self.accuracy,
            "mean_tdr": self.mean_tdr,
            "fdr": self.fdr.tolist(),
            "disparity": self.disparity,
            "brier": self.brier,
            "youden_j": self.youden_j.tolist(),
            "trivial": bool(self.trivial),
            "sweep_measure": self.sweep_measure,
        }


@dataclass(frozen=True)
class FoldReport:
    fold: int
    n_test: int
    pre: EvaluationReport
    post: EvaluationReport


@dataclass(frozen=True)
class CrossvalResult:
    folds: tuple[FoldReport, ...]
    pooled_pre: EvaluationReport
    pooled_post: EvaluationReport
    percent_change: dict[str, float]

    def to_dict(self) -> dict[str, Any]:
        return {
            "folds": [
                {"fold": fr.fold, "n_test": fr.n_test,
                 "pre": fr.pre.to_dict(), "post": fr.post.to_dict()}
                for fr in self.folds
            ],
            "pooled_pre": self.pooled_pre.to_dict(),
            "pooled_post": self.pooled_post.to_dict(),
            "percent_change": self.percent_change,
        }


def relative_pct_change(old: float, new: float) -> float:
    """Relative change in percent, (new - old) / old * 100."""
    if old == 0.0 or not np.isfinite(old):
        return float("nan")
    return 100.0 * (new - old) / old


def _finite_mean(arr: np.ndarray) -> float:
    vals = arr[np.isfinite(arr)]
    return float(vals.mean()) if vals.size else float("nan")


def _pair_stat(objects: np.ndarray, reduce) -> float:
    """`reduce` over unordered group pairs of nan-aware mean |difference|."""
    g = objects.shape[0]
    vals = []
    for a, b in combinations(range(g), 2):
        vals.append(_finite_mean(np.abs(objects[a] - objects[b])))
    return float(reduce(vals)) if vals else 0.0


def _criterion_objects(criterion: str, w: np.ndarray, fdr: np.ndarray,
                       d: np.ndarray) -> np.ndarray:
    """Per-group metric object compared across groups in the sweep measure."""
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}")
    if criterion == "term-by-term":
        return w
    tdr = np.diagonal(w, axis1=1, axis2=2)
    if criterion == "classwise":
        return tdr - fdr                           # Youden's J per class
    if criterion == "opportunity":
        return tdr
    return d


def sweep_measure(policy: AdjustmentPolicy, em: EmpiricalModel, criterion: str) -> float:
    """Max over group pairs of the mean |difference| of the criterion's metric."""
    w = analytic_confusions(policy, em)
    fdr = np.einsum("acj,ajc->ac", policy.p, em.v)
    d = np.einsum("aik,ak->ai", policy.p, em.p_yhat_given_a)
    return _pair_stat(_criterion_objects(criterion, w, fdr, d), max)


def evaluate_analytic(policy: AdjustmentPolicy, em: EmpiricalModel) -> EvaluationReport:
    """Exact in-sample report from w[a] = p[a] z[a]; no randomness."""
    p = policy.p
    w = analytic_confusions(policy, em)
    fdr = np.einsum("acj,ajc->ac", p, em.v)
    tdr = np.diagonal(w, axis1=1, axis2=2)
    accuracy = float(np.einsum("aj,ajj->", em.p_ya, w))
    mean_tdr = float(tdr.mean(axis=1).mean())
    disparity = _pair_stat(w, np.mean)
    ssq = np.einsum("aik,aik->ak", p, p)
    brier = float(np.einsum("aj,akj,ak->", em.p_ya, em.z, ssq + 1.0)
                  - 2.0 * np.einsum("aj,akj,ajk->", em.p_ya, em.z, p))
    youden = tdr - fdr
    trivial = bool(np.all(w < TRIVIAL_EPS, axis=2).any())
    d = np.einsum("aik,ak->ai", p, em.p_yhat_given_a)
    measure = _pair_stat(_criterion_objects(policy.meta.criterion, w, fdr, d), max)
    return EvaluationReport(accuracy=accuracy, mean_tdr=mean_tdr, fdr=fdr,
                            disparity=disparity, brier=brier, youden_j=youden,
                            trivial=trivial, sweep_measure=measure)


def remap_to_policy(policy: AdjustmentPolicy, ds: AdjustmentDataset):
    """Dataset rows re-indexed into the policy's class/group spaces."""
    if ds.class_names == policy.class_names and ds.group_names == policy.group_names:
        return ds.y, ds.y_hat, ds.a
    cidx = {name: i for i, name in enumerate(policy.class_names)}
    gidx = {name: i for i, name in enumerate(policy.group_names)}
    missing_c = set(ds.class_names) - set(cidx)
    missing_g = set(ds.group_names) - set(gidx)
    if missing_c or missing_g:
        raise PolicyError(
            "dataset values unseen in training: "
            + ", ".join(sorted(missing_c | missing_g)))
    cmap = np.array([cidx[name] for name in ds.class_names], dtype=np.int64)
    gmap = np.array([gidx[name] for name in ds.group_names], dtype=np.int64)
    return cmap[ds.y], cmap[ds.y_hat], gmap[ds.a]


def brier_score(policy: AdjustmentPolicy, ds: AdjustmentDataset) -> float:
    """Mean squared distance of the adjusted column distribution to the truth."""
    y, y_hat, a = remap_to_policy(policy, ds)
    return _brier_from_rows(policy, y, y_hat, a)


def _brier_from_rows(policy: AdjustmentPolicy, y, y_hat, a) -> float:
    cols = policy.p[a, :, y_hat]                     # (N, C)
    onehot = (np.arange(policy.n_classes)[None, :] == y[:, None]).astype(np.float64)
    return float(((cols - onehot) ** 2).sum(axis=1).mean())


def report_from_predictions(y: np.ndarray, y_pred: np.ndarray, a: np.ndarray,
                            n_classes: int, n_groups: int, brier: float,
                            criterion: str = "term-by-term") -> EvaluationReport:
    """Report measured from realized predictions.

    Confusion columns for (Y=j, A=a) cells absent from the data are
    undefined and excluded (nan-aware) from the aggregate means.
    """
    c, g = n_classes, n_groups
    flat = (a * c + y_pred) * c + y
    counts = np.bincount(flat, minlength=g * c * c).reshape(g, c, c).astype(np.float64)
    col_n = counts.sum(axis=1)                       # (G, C) counts of (Y=j, A=a)
    n_a = col_n.sum(axis=1)
    present = n_a > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        w = counts / col_n[:, None, :]
        pred_n = counts.sum(axis=2)                  # (G, C) counts of (pred=i, A=a)
        d = pred_n / n_a[:, None]
        fdr_num = pred_n - np.diagonal(counts, axis1=1, axis2=2)
        fdr_den = n_a[:, None] - col_n
        fdr = fdr_num / fdr_den
    accuracy = float(np.mean(y_pred == y))
    tdr = np.diagonal(w, axis1=1, axis2=2)
    group_tdr = [_finite_mean(tdr[ai]) for ai in range(g) if present[ai]]
    mean_tdr = float(np.mean(group_tdr)) if group_tdr else float("nan")
    disparity = _pair_stat(w, np.mean)
    youden = tdr - fdr
    trivial = bool((pred_n[present] == 0).any())
    measure = _pair_stat(_criterion_objects(criterion, w, fdr, d), max)
    return EvaluationReport(accuracy=accuracy, mean_tdr=mean_tdr, fdr=fdr,
                            disparity=disparity, brier=brier, youden_j=youden,
                            trivial=trivial, sweep_measure=measure)


def blackbox_report(y: np.ndarray, y_hat: np.ndarray, a: np.ndarray, n_classes: int,
                    n_groups: int, criterion: str = "term-by-term") -> EvaluationReport:
    """Metrics of the unadjusted predictions; Brier of a hard label is 2*(1-acc)."""
    acc = float(np.mean(y_hat == y))
    return report_from_predictions(y, y_hat, a, n_classes, n_groups,
                                   brier=2.0 * (1.0 - acc), criterion=criterion)


def evaluate_sampled(policy: AdjustmentPolicy, ds: AdjustmentDataset, seed: int,
                     row_keys: np.ndarray | None = None) -> EvaluationReport:
    """Draw adjusted predictions for the holdout and report empirical metrics.

    There is deliberately no fairness assertion here: on data that
    deviates from the training distribution, post-adjustment disparity
    can exceed the pre-adjustment value.
    """
    y, y_hat, a = remap_to_policy(policy, ds)
    y_adj = predict_rows(policy, y_hat, a, seed, row_keys=row_keys)
    brier = _brier_from_rows(policy, y, y_hat, a)
    return report_from_predictions(y, y_adj, a, policy.n_classes, policy.n_groups,
                                   brier, policy.meta.criterion)


def crossval(ds: AdjustmentDataset, folds: int, seed: int, obj: ObjectiveSpec,
             spec: FairnessSpec, smoothing: float = 0.0) -> CrossvalResult:
    """Per-fold fit/solve/evaluate plus a pooled out-of-fold report.

    Each fold trains on the other folds' rows, solves the LP, and samples
    predictions for its own rows keyed by their original row index, so the
    pooled predictions are identical however folds are executed.
    """
    plan = make_splits(ds, folds, derive_seed(seed, 0xF01D))
    c, g = ds.n_classes, ds.n_groups
    y_adj_all = np.full(ds.n, -1, dtype=np.int64)
    brier_total = 0.0
    fold_reports = []
    for f in range(folds):
        train = ds.subset(plan.train_rows(f))
        try:
            em_f = fit_empirical(train, smoothing)
        except EstimationError as exc:
            raise EstimationError(f"fold {f}: {exc}") from exc
        try:
            pol = fit_policy(em_f, obj, spec, smoothing=smoothing, seed=seed)
        except SolverError as exc:
            raise SolverError(f"fold {f}: {exc}", exc.status) from exc
        rows = plan.test_rows(f)
        y_t, yhat_t, a_t = ds.y[rows], ds.y_hat[rows], ds.a[rows]
        y_adj = predict_rows(pol, yhat_t, a_t, seed, row_keys=rows)
        y_adj_all[rows] = y_adj
        brier_f = _brier_from_rows(pol, y_t, yhat_t, a_t)
        brier_total += brier_f * len(rows)
        post = report_from_predictions(y_t, y_adj, a_t, c, g, brier_f, spec.criterion)
        pre = blackbox_report(y_t, yhat_t, a_t, c, g, spec.criterion)
        fold_reports.append(FoldReport(fold=f, n_test=len(rows), pre=pre, post=post))
    pooled_post = report_from_predictions(ds.y, y_adj_all, ds.a, c, g,
                                          brier_total / ds.n, spec.criterion)
    pooled_pre = blackbox_report(ds.y, ds.y_hat, ds.a, c, g, spec.criterion)
    change = {
        "accuracy": relative_pct_change(pooled_pre.accuracy, pooled_post.accuracy),
        "mean_tdr": relative_pct_change(pooled_pre.mean_tdr, pooled_post.mean_tdr),
        "disparity": relative_pct_change(pooled_pre.disparity, pooled_post.disparity),
    }
    return CrossvalResult(folds=tuple(fold_reports), pooled_pre=pooled_pre,
                          pooled_post=pooled_post, percent_change=change)


def fairness_sweep(em: EmpiricalModel, objective: ObjectiveSpec,
                   criteria=CRITERIA, steps: int = 101) -> list[dict[str, Any]]:
    """Solve the LP over the epsilon grid 0.00, 0.01, ..., 1.00 per criterion.

    Solver failures are recorded in the row's status field rather than
    raised, so a sweep always yields steps x len(criteria) rows.
    """
    rows: list[dict[str, Any]] = []
    for criterion in criteria:
        for step in range(steps):
            eps = round(step / (steps - 1) * 1.0, 10) if steps > 1 else 0.0
            spec = FairnessSpec(criterion=criterion, epsilon=eps)
            row: dict[str, Any] = {"epsilon": eps, "criterion": criterion}
            try:
                pol = fit_policy(em, objective, spec)
                rep = evaluate_analytic(pol, em)
                row.update(objective_value=pol.meta.objective_value, brier=rep.brier,
                           sweep_measure=rep.sweep_measure, accuracy=rep.accuracy,
                           mean_tdr=rep.mean_tdr, trivial=rep.trivial,
                           status=pol.meta.solver_status)
            except SolverError as exc:
                row.update(objective_value=float("nan"), brier=float("nan"),
                           sweep_measure=float("nan"), accuracy=float("nan"),
                           mean_tdr=float("nan"), trivial=False, status=exc.status)
            rows.append(row)
    return rows
