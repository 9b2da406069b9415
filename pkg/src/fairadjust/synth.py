"""Synthetic data regimes, the factorial adjustment experiment, and the
OLS meta-regression over its outcomes.

The generator draws i.i.d. rows for a 3-class outcome: group from the
group-balance proportions, true class from the class-balance proportions
(independent of group), and the blackbox prediction from a confusion
column with the group's detection rate on the diagonal and the rest of
the mass split evenly. Disadvantaged groups sit `delta` below the base
detection rate, so bias always favors the majority group.

Only the low delta (0.10) and the high delta (detection at chance) are
externally pinned; the remaining constants below are declared choices,
so downstream regression results are comparable in sign and ordering but
not magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy import stats

from .data_model import AdjustmentDataset
from .estimation import EstimationError, fit_empirical
from .evaluation import evaluate_analytic
from .fairness_lp import CRITERIA, FairnessSpec, ObjectiveSpec
from .lp_solver import SolverError
from .policy import fit_policy
from .rng import derive_seed, stream_uniforms

N_CLASSES = 3
BASE_TDR = 0.80

CLASS_BALANCE = {
    "balanced": (1 / 3, 1 / 3, 1 / 3),
    "one-rare": (0.45, 0.45, 0.10),
    "two-rare": (0.80, 0.10, 0.10),
}

GROUP_BALANCE = {
    2: {
        "no-minority": (0.5, 0.5),
        "one-slight": (0.65, 0.35),
        "one-strong": (0.85, 0.15),
    },
    3: {
        "no-minority": (1 / 3, 1 / 3, 1 / 3),
        "one-slight": (0.40, 0.40, 0.20),
        "one-strong": (0.45, 0.45, 0.10),
        "two-slight": (0.50, 0.25, 0.25),
        "two-strong": (0.70, 0.15, 0.15),
    },
}

# "high" puts the disadvantaged group exactly at chance for 3 classes.
# "medium" is capped by the out-of-sample acceptance gate on detection
# loss; see the notes in BIAS_LEVELS' consumers before changing it.
BIAS_DELTAS = {"low": 0.10, "medium": 0.125, "high": BASE_TDR - 1.0 / N_CLASSES}

BIAS_LEVELS = {
    2: ("low", "medium", "high"),
    3: ("low-one", "low-two", "medium-one", "medium-two", "high-one", "high-two"),
}


@dataclass(frozen=True)
class RegimeSpec:
    groups: int
    class_balance: str
    group_balance: str
    pred_bias: str
    n: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.groups not in (2, 3):
            raise ValueError("groups must be 2 or 3")
        if self.class_balance not in CLASS_BALANCE:
            raise ValueError(f"unknown class_balance {self.class_balance!r}")
        if self.group_balance not in GROUP_BALANCE[self.groups]:
            raise ValueError(
                f"group_balance {self.group_balance!r} invalid for {self.groups} groups")
        if self.pred_bias not in BIAS_LEVELS[self.groups]:
            raise ValueError(
                f"pred_bias {self.pred_bias!r} invalid for {self.groups} groups")
        if self.n < 1:
            raise ValueError("n must be positive")

    @property
    def bias_delta(self) -> float:
        return BIAS_DELTAS[self.pred_bias.split("-")[0]]

    @property
    def biased_groups(self) -> tuple[int, ...]:
        """Which groups run `delta` below the base detection rate.

        The "one" variants disadvantage the last (most minority) group,
        "two" the two non-majority groups; with 2 groups, group 1.
        """
        if self.groups == 2:
            return (1,)
        return (2,) if self.pred_bias.endswith("-one") else (1, 2)


def regime_model(spec: RegimeSpec) -> tuple[np.ndarray, np.ndarray]:
    """True joint Pr(Y=j, A=a) and confusion tensor z of the generator."""
    p_y = np.array(CLASS_BALANCE[spec.class_balance])
    p_g = np.array(GROUP_BALANCE[spec.groups][spec.group_balance])
    p_ya = np.outer(p_g, p_y)
    c = N_CLASSES
    z = np.empty((spec.groups, c, c))
    for a in range(spec.groups):
        t = BASE_TDR - (spec.bias_delta if a in spec.biased_groups else 0.0)
        z[a] = np.full((c, c), (1.0 - t) / (c - 1))
        np.fill_diagonal(z[a], t)
    return p_ya, z


def sample_from_model(p_ya: np.ndarray, z: np.ndarray, n: int, seed: int,
                      class_names=None, group_names=None) -> AdjustmentDataset:
    """Draw n i.i.d. triples from a joint Pr(Y, A) and confusion tensor z."""
    g, c = p_ya.shape
    keys = np.arange(n, dtype=np.int64)
    u_cell = stream_uniforms(seed, 2 * keys)
    u_pred = stream_uniforms(seed, 2 * keys + 1)
    cell_cdf = np.cumsum(p_ya.reshape(-1))
    cell_cdf /= cell_cdf[-1]
    cell = np.minimum((u_cell[:, None] >= cell_cdf[None, :]).sum(axis=1), g * c - 1)
    a = cell // c
    y = cell % c
    zcdf = np.cumsum(z, axis=1)
    cols = zcdf[a, :, y]                            # (N, C)
    y_hat = np.minimum((u_pred[:, None] >= cols).sum(axis=1), c - 1)
    if class_names is None:
        class_names = tuple(f"c{i}" for i in range(c))
    if group_names is None:
        group_names = tuple(f"g{i}" for i in range(g))
    return AdjustmentDataset(y=y, y_hat=y_hat, a=a,
                             class_names=class_names, group_names=group_names)


def generate(spec: RegimeSpec) -> AdjustmentDataset:
    """Materialize one synthetic regime; identical spec yields identical data."""
    p_ya, z = regime_model(spec)
    return sample_from_model(p_ya, z, spec.n, spec.seed)


def full_grid(base_seed: int, n: int = 1000) -> list[RegimeSpec]:
    """All 117 regime combinations (27 with 2 groups, 90 with 3).

    Each regime's seed is derived from its level indices, not its grid
    position, so reordering the enumeration cannot change the data.
    """
    specs = []
    for groups in (2, 3):
        for ci, cb in enumerate(CLASS_BALANCE):
            for gi, gb in enumerate(GROUP_BALANCE[groups]):
                for bi, pb in enumerate(BIAS_LEVELS[groups]):
                    seed = derive_seed(base_seed, groups, ci, gi, bi)
                    specs.append(RegimeSpec(groups=groups, class_balance=cb,
                                            group_balance=gb, pred_bias=pb,
                                            n=n, seed=seed))
    return specs


GRID_COLUMNS = ("n", "groups", "class_balance", "group_balance", "pred_bias", "seed",
                "objective", "criterion", "status", "trivial", "acc_change",
                "tdr_change")


def run_grid(base_seed: int, obj_kinds=("unweighted", "weighted"),
             criteria=CRITERIA, n: int = 1000) -> list[dict[str, Any]]:
    """Adjust every regime under every objective/criterion combination.

    acc_change and tdr_change are relative changes against the blackbox
    (post/pre - 1). Estimation or solver failures are recorded in the
    row's status and leave the outcomes nan.
    """
    rows: list[dict[str, Any]] = []
    for spec in full_grid(base_seed, n=n):
        base = {"n": spec.n, "groups": spec.groups, "class_balance": spec.class_balance,
                "group_balance": spec.group_balance, "pred_bias": spec.pred_bias,
                "seed": spec.seed}
        ds = generate(spec)
        try:
            em = fit_empirical(ds, 0.0)
        except EstimationError:
            for kind in obj_kinds:
                for criterion in criteria:
                    rows.append({**base, "objective": kind, "criterion": criterion,
                                 "status": "estimation-error", "trivial": False,
                                 "acc_change": float("nan"), "tdr_change": float("nan")})
            continue
        acc_pre = float(np.einsum("aj,ajj->", em.p_ya, em.z))
        tdr_pre = float(np.diagonal(em.z, axis1=1, axis2=2).mean(axis=1).mean())
        for kind in obj_kinds:
            obj = ObjectiveSpec(kind=kind)
            for criterion in criteria:
                row = {**base, "objective": kind, "criterion": criterion}
                try:
                    pol = fit_policy(em, obj, FairnessSpec(criterion=criterion))
                    rep = evaluate_analytic(pol, em)
                    row.update(status="optimal", trivial=rep.trivial,
                               acc_change=rep.accuracy / acc_pre - 1.0,
                               tdr_change=rep.mean_tdr / tdr_pre - 1.0)
                except (SolverError, ValueError) as exc:
                    status = getattr(exc, "status", "error")
                    row.update(status=status, trivial=False,
                               acc_change=float("nan"), tdr_change=float("nan"))
                rows.append(row)
    return rows


REFERENCE_LEVELS = {
    "objective": "unweighted",
    "criterion": "classwise",
    "group_balance": "no-minority",
    "class_balance": "balanced",
    "pred_bias": ("low", "low-one"),
}

_FACTOR_ORDER = {
    "objective": ("unweighted", "weighted"),
    "criterion": ("classwise", "parity", "opportunity", "term-by-term"),
    "group_balance": ("no-minority", "one-slight", "one-strong", "two-slight",
                      "two-strong"),
    "class_balance": ("balanced", "one-rare", "two-rare"),
    "pred_bias": ("low", "low-one", "low-two", "medium", "medium-one", "medium-two",
                  "high", "high-one", "high-two"),
}


@dataclass(frozen=True)
class RegressionResult:
    terms: tuple[str, ...]            # "(Intercept)" first, then "factor=level"
    coefficients: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    reference_levels: dict[str, str]
    r_squared: float
    n_rows: int
    dof: int

    def coefficient(self, term: str) -> float:
        return float(self.coefficients[self.terms.index(term)])

    def to_dict(self) -> dict[str, Any]:
        return {
            "terms": list(self.terms),
            "coefficients": self.coefficients.tolist(),
            "ci_low": self.ci_low.tolist(),
            "ci_high": self.ci_high.tolist(),
            "reference_levels": self.reference_levels,
            "r_squared": self.r_squared,
            "n_rows": self.n_rows,
            "dof": self.dof,
        }


def ols_fit(rows: list[dict[str, Any]], outcome: str) -> RegressionResult:
    """OLS of an outcome on one-hot hyperparameters with 95% t-intervals.

    One reference level per factor is dropped from the design (matching
    the fixed REFERENCE_LEVELS), the fit uses a QR decomposition, and
    intervals use the t distribution on (rows - params) degrees of
    freedom. Rows whose adjustment failed are excluded.
    """
    if outcome not in ("acc_change", "tdr_change"):
        raise ValueError(f"unknown outcome {outcome!r}")
    usable = [r for r in rows if r["status"] == "optimal" and np.isfinite(r[outcome])]
    if not usable:
        raise ValueError("no usable rows")
    factors = ("objective", "criterion", "group_balance", "class_balance", "pred_bias")
    bias_levels = {r["pred_bias"] for r in usable}
    if {"low", "low-one"} <= bias_levels:
        raise ValueError("rows mix 2- and 3-group regimes; fit each separately")
    terms: list[str] = ["(Intercept)"]
    columns: list[np.ndarray] = [np.ones(len(usable))]
    refs: dict[str, str] = {}
    for factor in factors:
        present = {r[factor] for r in usable}
        ref_spec = REFERENCE_LEVELS[factor]
        candidates = ref_spec if isinstance(ref_spec, tuple) else (ref_spec,)
        # canonical reference where available, else first present level
        ref = next((l for l in candidates if l in present),
                   next(l for l in _FACTOR_ORDER[factor] if l in present))
        refs[factor] = ref
        for level in _FACTOR_ORDER[factor]:
            if level not in present or level == ref:
                continue
            terms.append(f"{factor}={level}")
            columns.append(np.array([1.0 if r[factor] == level else 0.0 for r in usable]))
    x = np.column_stack(columns)
    yv = np.array([float(r[outcome]) for r in usable])
    n, p = x.shape
    if n <= p:
        raise ValueError(f"not enough rows ({n}) for {p} parameters")
    q, r_mat = np.linalg.qr(x)
    diag = np.abs(np.diag(r_mat))
    if diag.min() < 1e-10 * max(diag.max(), 1.0):
        raise ValueError("design matrix is rank deficient")
    beta = np.linalg.solve(r_mat, q.T @ yv)
    resid = yv - x @ beta
    rss = float(resid @ resid)
    dof = n - p
    sigma2 = rss / dof
    r_inv = np.linalg.solve(r_mat, np.eye(p))
    se = np.sqrt(np.maximum(sigma2 * np.sum(r_inv * r_inv, axis=1), 0.0))
    tcrit = float(stats.t.ppf(0.975, dof))
    tss = float(((yv - yv.mean()) ** 2).sum())
    r2 = 1.0 - rss / tss if tss > 0 else 1.0
    return RegressionResult(terms=tuple(terms), coefficients=beta,
                            ci_low=beta - tcrit * se, ci_high=beta + tcrit * se,
                            reference_levels=refs, r_squared=r2, n_rows=n, dof=dof)


_FACTOR_TITLES = {
    "objective": "Loss", "criterion": "Goal", "group_balance": "Group balance",
    "class_balance": "Class balance", "pred_bias": "Predictive bias",
}


def format_regression_table(title: str, by_outcome: dict[str, RegressionResult]) -> str:
    """Aligned text table: one row per level, one coef (CI) column per outcome."""
    outcomes = list(by_outcome)
    first = by_outcome[outcomes[0]]

    def cell(res: RegressionResult, term: str) -> str:
        if term not in res.terms:
            return "--"
        i = res.terms.index(term)
        return (f"{res.coefficients[i]:.3f} "
                f"({res.ci_low[i]:.3f}, {res.ci_high[i]:.3f})")

    header = ["Hyperparameter", "Level"] + [f"Change in {o} (95% CI)" for o in outcomes]
    lines = [[*header]]
    lines.append(["Intercept", "--"] + [cell(by_outcome[o], "(Intercept)") for o in outcomes])
    for factor in ("objective", "criterion", "group_balance", "class_balance", "pred_bias"):
        ref = first.reference_levels.get(factor)
        shown = False
        for level in _FACTOR_ORDER[factor]:
            term = f"{factor}={level}"
            if level == ref:
                lines.append([_FACTOR_TITLES[factor] if not shown else "", level,
                              *(["-- (reference)"] * len(outcomes))])
                shown = True
            elif term in first.terms:
                lines.append([_FACTOR_TITLES[factor] if not shown else "", level]
                             + [cell(by_outcome[o], term) for o in outcomes])
                shown = True
    widths = [max(len(row[i]) for row in lines) for i in range(len(lines[0]))]
    out = [title]
    out.append("  ".join(h.ljust(w) for h, w in zip(lines[0], widths)))
    out.append("  ".join("-" * w for w in widths))
    for row in lines[1:]:
        out.append("  ".join(v.ljust(w) for v, w in zip(row, widths)))
    meta = ", ".join(f"{o}: R^2={by_outcome[o].r_squared:.3f} n={by_outcome[o].n_rows}"
                     for o in outcomes)
    out.append(meta)
    return "\n".join(out) + "\n"
