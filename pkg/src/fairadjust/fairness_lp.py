"""Assembly of the adjustment linear program.

Decision variables are the entries of the group-conditional adjustment
matrices p[a][i][k] = Pr(Yadj=i | Yhat=k, A=a), flattened as
a*C*C + i*C + k. The LP minimizes an expected loss that is linear in
these variables, subject to column-stochasticity (each column of each
p[a] sums to 1), box bounds [0, 1], and the chosen fairness criterion
written as pairwise equalities across groups -- exact when epsilon is 0,
or relaxed to |difference| <= epsilon otherwise.

Supported criteria:

* ``term-by-term``  every entry of W^a = p[a] z[a] equal across groups
* ``classwise``     diagonals of W^a and the false-detection-rate vector
                    diag(p[a] v[a]) equal across groups
* ``opportunity``   diagonals of W^a equal across groups
* ``parity``        class marginals p[a] @ Pr(Yhat|A=a) equal across groups
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .estimation import EmpiricalModel

CRITERIA = ("term-by-term", "classwise", "opportunity", "parity")
OBJECTIVES = ("unweighted", "weighted", "custom")
PAIRINGS = ("star", "all-pairs")


@dataclass(frozen=True)
class FairnessSpec:
    """Criterion selector, relaxation bound and pairing topology.

    `pairing=None` resolves to "star" (every group against group 0) for
    exact constraints and "all-pairs" under relaxation, where a star
    would let two non-reference groups drift 2*epsilon apart.
    """

    criterion: str = "term-by-term"
    epsilon: float = 0.0
    pairing: str | None = None

    def __post_init__(self):
        if self.criterion not in CRITERIA:
            raise ValueError(f"unknown criterion {self.criterion!r}; expected one of {CRITERIA}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if self.pairing is not None and self.pairing not in PAIRINGS:
            raise ValueError(f"unknown pairing {self.pairing!r}; expected one of {PAIRINGS}")

    @property
    def resolved_pairing(self) -> str:
        if self.pairing is not None:
            return self.pairing
        return "star" if self.epsilon == 0.0 else "all-pairs"

    def group_pairs(self, n_groups: int) -> list[tuple[int, int]]:
        if self.resolved_pairing == "star":
            return [(0, b) for b in range(1, n_groups)]
        return list(combinations(range(n_groups), 2))


@dataclass(frozen=True)
class ObjectiveSpec:
    """Loss selector for the LP objective.

    * unweighted: zero-one loss, minimizes overall mismatch probability.
    * weighted: loss 1/Pr(Y=j, A=a), equivalent to maximizing the summed
      diagonals (true detection rates) of the W^a.
    * custom: caller-supplied loss[a][i][j]; diagonals are ignored since
      matching predictions carry no loss.
    """

    kind: str = "weighted"
    custom_loss: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.kind!r}; expected one of {OBJECTIVES}")
        if self.kind == "custom":
            if self.custom_loss is None:
                raise ValueError("custom objective requires custom_loss")
            loss = np.asarray(self.custom_loss, dtype=np.float64)
            if not np.all(np.isfinite(loss)) or np.any(loss < 0):
                raise ValueError("custom_loss entries must be finite and nonnegative")
            object.__setattr__(self, "custom_loss", loss)
        elif self.custom_loss is not None:
            raise ValueError("custom_loss only valid with kind='custom'")


@dataclass(frozen=True)
class FairnessRow:
    """One scalar fairness functional: coeffs . x compares `quantity` between `pair`."""

    coeffs: np.ndarray
    pair: tuple[int, int]
    quantity: str


@dataclass(frozen=True)
class AssembledLP:
    c: np.ndarray          # (n,) objective coefficients
    a_eq: np.ndarray       # (m_eq, n)
    b_eq: np.ndarray
    a_ub: np.ndarray       # (m_ub, n), rows are <= constraints
    b_ub: np.ndarray
    lower: np.ndarray      # (n,)
    upper: np.ndarray      # (n,)
    n_classes: int
    n_groups: int
    n_stochastic_rows: int
    row_tags: tuple[str, ...]

    @property
    def n_vars(self) -> int:
        return len(self.c)

    def var_index(self, a: int, i: int, k: int) -> int:
        """Flat position of p[a][i][k]."""
        c = self.n_classes
        return (a * c + i) * c + k

    def var_unindex(self, idx: int) -> tuple[int, int, int]:
        c = self.n_classes
        return idx // (c * c), (idx // c) % c, idx % c

    def policy_tensor(self, x: np.ndarray) -> np.ndarray:
        """Reshape a solution vector into the (G, C, C) adjustment tensor."""
        return np.asarray(x, dtype=np.float64).reshape(self.n_groups, self.n_classes,
                                                       self.n_classes)


def objective_vector(em: EmpiricalModel, obj: ObjectiveSpec) -> np.ndarray:
    """Coefficient of p[a][i][k]: sum_{j != i} z[a][k][j] Pr(Y=j, A=a) l(i, j, a)."""
    g, c = em.n_groups, em.n_classes
    z, p_ya = em.z, em.p_ya
    if obj.kind == "unweighted":
        # s[a][k] = sum_j z[a][k][j] p_ya[a][j]; subtract the j = i term
        s = np.einsum("akj,aj->ak", z, p_ya)
        coef = s[:, None, :] - np.transpose(z, (0, 2, 1)) * p_ya[:, :, None]
    elif obj.kind == "weighted":
        if np.any(p_ya == 0.0):
            bad = [f"(y={em.class_names[j] if em.class_names else j},"
                   f" a={em.group_names[a] if em.group_names else a})"
                   for a, j in zip(*np.nonzero(p_ya == 0.0))]
            raise ValueError("weighted objective undefined, Pr(Y=j, A=a) = 0 for: "
                             + ", ".join(bad))
        rowsum = z.sum(axis=2)
        coef = rowsum[:, None, :] - np.transpose(z, (0, 2, 1))
    else:
        loss = obj.custom_loss.copy()
        if loss.shape != (g, c, c):
            raise ValueError(f"custom_loss must have shape {(g, c, c)}, got {loss.shape}")
        idx = np.arange(c)
        loss[:, idx, idx] = 0.0
        coef = np.einsum("akj,aj,aij->aik", z, p_ya, loss)
    return coef.reshape(-1)


def _functional(g: int, c: int, a: int, row_coeffs: np.ndarray, i: int) -> np.ndarray:
    """Embed coefficients over p[a][i][:] into the flat variable space."""
    out = np.zeros(g * c * c)
    base = (a * c + i) * c
    out[base:base + c] = row_coeffs
    return out


def fairness_rows(em: EmpiricalModel, spec: FairnessSpec) -> list[FairnessRow]:
    """One scalar row per constrained quantity per group pair.

    Counts per pair: term-by-term C^2, classwise 2C, opportunity C,
    parity C.
    """
    g, c = em.n_groups, em.n_classes
    rows: list[FairnessRow] = []

    def w_entry(a: int, i: int, j: int) -> np.ndarray:
        # W^a[i][j] = sum_k p[a][i][k] z[a][k][j]
        return _functional(g, c, a, em.z[a, :, j], i)

    def fdr_entry(a: int, ci: int) -> np.ndarray:
        # FDR^a[ci] = sum_j p[a][ci][j] v[a][j][ci]
        return _functional(g, c, a, em.v[a, :, ci], ci)

    def parity_entry(a: int, i: int) -> np.ndarray:
        # D^a[i] = sum_k p[a][i][k] Pr(Yhat=k|A=a)
        return _functional(g, c, a, em.p_yhat_given_a[a], i)

    for pa, pb in spec.group_pairs(g):
        if spec.criterion == "term-by-term":
            for i in range(c):
                for j in range(c):
                    rows.append(FairnessRow(w_entry(pa, i, j) - w_entry(pb, i, j),
                                            (pa, pb), f"W[{i},{j}]"))
        elif spec.criterion == "classwise":
            for i in range(c):
                rows.append(FairnessRow(w_entry(pa, i, i) - w_entry(pb, i, i),
                                        (pa, pb), f"TDR[{i}]"))
            for i in range(c):
                rows.append(FairnessRow(fdr_entry(pa, i) - fdr_entry(pb, i),
                                        (pa, pb), f"FDR[{i}]"))
        elif spec.criterion == "opportunity":
            for i in range(c):
                rows.append(FairnessRow(w_entry(pa, i, i) - w_entry(pb, i, i),
                                        (pa, pb), f"TDR[{i}]"))
        else:
            for i in range(c):
                rows.append(FairnessRow(parity_entry(pa, i) - parity_entry(pb, i),
                                        (pa, pb), f"D[{i}]"))
    return rows


def assemble(em: EmpiricalModel, obj: ObjectiveSpec, spec: FairnessSpec) -> AssembledLP:
    """Combine objective, stochasticity equalities, fairness rows and bounds."""
    g, c = em.n_groups, em.n_classes
    n = g * c * c
    cost = objective_vector(em, obj)

    eq_rows, eq_rhs, tags = [], [], []
    for a in range(g):
        for k in range(c):
            row = np.zeros(n)
            for i in range(c):
                row[(a * c + i) * c + k] = 1.0
            eq_rows.append(row)
            eq_rhs.append(1.0)
            tags.append(f"colsum[a={a},k={k}]")
    n_stoch = len(eq_rows)

    frows = fairness_rows(em, spec)
    ub_rows, ub_rhs = [], []
    if spec.epsilon == 0.0:
        for fr in frows:
            eq_rows.append(fr.coeffs)
            eq_rhs.append(0.0)
            tags.append(f"{fr.quantity} pair{fr.pair}")
    else:
        for fr in frows:
            ub_rows.append(fr.coeffs)
            ub_rhs.append(spec.epsilon)
            tags.append(f"{fr.quantity} pair{fr.pair} <= eps")
            ub_rows.append(-fr.coeffs)
            ub_rhs.append(spec.epsilon)
            tags.append(f"{fr.quantity} pair{fr.pair} >= -eps")

    a_eq = np.array(eq_rows) if eq_rows else np.zeros((0, n))
    a_ub = np.array(ub_rows) if ub_rows else np.zeros((0, n))
    return AssembledLP(
        c=cost,
        a_eq=a_eq, b_eq=np.array(eq_rhs, dtype=np.float64),
        a_ub=a_ub, b_ub=np.array(ub_rhs, dtype=np.float64),
        lower=np.zeros(n), upper=np.ones(n),
        n_classes=c, n_groups=g, n_stochastic_rows=n_stoch,
        row_tags=tuple(tags),
    )


def write_lp_text(lp: AssembledLP, path) -> None:
    """Plain-text dump for cross-checking with external solvers.

    Line 1: `n m_eq m_ub`; line 2: objective coefficients; then one line
    per eq row and per ub row, coefficients followed by the rhs.
    """
    def fmt(vals) -> str:
        return " ".join(repr(float(v)) for v in vals)

    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{lp.n_vars} {len(lp.b_eq)} {len(lp.b_ub)}\n")
        fh.write(fmt(lp.c) + "\n")
        for row, rhs in zip(lp.a_eq, lp.b_eq):
            fh.write(fmt(row) + " " + repr(float(rhs)) + "\n")
        for row, rhs in zip(lp.a_ub, lp.b_ub):
            fh.write(fmt(row) + " " + repr(float(rhs)) + "\n")
