"""Adjustment policies: the solved probability tensor plus prediction.

A policy stores p[a][i][k] = Pr(Yadj=i | Yhat=k, A=a). Predictions MUST
be sampled from these columns; replacing the draw with an argmax can
silently reproduce the unfair blackbox predictions (there is a test
exhibiting exactly that), so the argmax shortcut is deliberately not
offered by this API.

Sampling is inverse-CDF over the column in fixed class order, with one
splitmix64 draw per row keyed by the row index, so results do not depend
on row processing order. Policies serialize to JSON losslessly (floats
round-trip exactly through their shortest decimal form).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import _kernels
from .estimation import EmpiricalModel
from .fairness_lp import AssembledLP, FairnessSpec, ObjectiveSpec, assemble
from .lp_solver import OPTIMAL, LPSolution, SolverError, solve
from .rng import SplitMix64, stream_uniforms

POLICY_FORMAT_VERSION = 1


class PolicyError(ValueError):
    """Raised for invalid policy construction or incompatible spaces."""


@dataclass(frozen=True)
class PolicyMeta:
    criterion: str = "term-by-term"
    epsilon: float = 0.0
    pairing: str = "star"
    objective: str = "weighted"
    solver_status: str = OPTIMAL
    objective_value: float = float("nan")
    iterations: int = 0
    train_n: int = 0
    smoothing: float = 0.0
    seed: int | None = None

    def to_dict(self) -> dict[str, Any]:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class AdjustmentPolicy:
    p: np.ndarray                      # (G, C, C), columns over k sum to 1
    class_names: tuple[str, ...]
    group_names: tuple[str, ...]
    meta: PolicyMeta = field(default_factory=PolicyMeta)

    def __post_init__(self):
        p = np.ascontiguousarray(self.p, dtype=np.float64)
        if p.ndim != 3 or p.shape[1] != p.shape[2] or p.shape[0] < 1:
            raise PolicyError(f"policy tensor must be (G, C, C), got {p.shape}")
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise PolicyError("policy entries must lie in [0, 1]")
        colsums = p.sum(axis=1)
        if np.max(np.abs(colsums - 1.0)) > 1e-8:
            raise PolicyError("policy columns must sum to 1 within 1e-8")
        p.flags.writeable = False
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "class_names", tuple(self.class_names))
        object.__setattr__(self, "group_names", tuple(self.group_names))

    @property
    def n_classes(self) -> int:
        return self.p.shape[1]

    @property
    def n_groups(self) -> int:
        return self.p.shape[0]

    def column_cdf(self) -> np.ndarray:
        """Running sums down each column, used by the samplers."""
        return np.cumsum(self.p, axis=1)

    def to_dict(self) -> dict[str, Any]:
        return {
            "version": POLICY_FORMAT_VERSION,
            "class_names": list(self.class_names),
            "group_names": list(self.group_names),
            # matrices[a][i][k] = Pr(Yadj=i | Yhat=k, A=group a), row-major
            "matrices": self.p.tolist(),
            "meta": self.meta.to_dict(),
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "AdjustmentPolicy":
        if d.get("version") != POLICY_FORMAT_VERSION:
            raise PolicyError(f"unsupported policy format version {d.get('version')!r}")
        meta = PolicyMeta(**d.get("meta", {}))
        return cls(p=np.array(d["matrices"], dtype=np.float64),
                   class_names=tuple(d["class_names"]),
                   group_names=tuple(d["group_names"]), meta=meta)

    @classmethod
    def load(cls, path) -> "AdjustmentPolicy":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def from_solution(lp: AssembledLP, sol: LPSolution, class_names=None, group_names=None,
                  meta: PolicyMeta | None = None) -> AdjustmentPolicy:
    """Un-flatten an optimal solution vector into a policy.

    Solver residuals leave column sums within 1e-8 of one; entries are
    clipped into [0, 1] and each column renormalized by its exact sum.
    """
    if sol.status != OPTIMAL:
        raise PolicyError(f"cannot build a policy from a {sol.status!r} solution")
    g, c = lp.n_groups, lp.n_classes
    clip = float(np.maximum(-sol.x, sol.x - 1.0).max())
    if clip > 1e-6:
        raise PolicyError(f"solution leaves [0, 1] by {clip:.2e}; solver output unusable")
    p = lp.policy_tensor(np.clip(sol.x, 0.0, 1.0))
    colsums = p.sum(axis=1)
    if np.max(np.abs(colsums - 1.0)) > 1e-6:
        raise PolicyError("solution columns deviate from stochasticity beyond tolerance")
    p = p / colsums[:, None, :]
    if class_names is None:
        class_names = tuple(f"c{i}" for i in range(c))
    if group_names is None:
        group_names = tuple(f"g{i}" for i in range(g))
    return AdjustmentPolicy(p=p, class_names=class_names, group_names=group_names,
                            meta=meta or PolicyMeta())


def fit_policy(em: EmpiricalModel, obj: ObjectiveSpec, spec: FairnessSpec,
               tol: float = 1e-9, smoothing: float = 0.0,
               seed: int | None = None) -> AdjustmentPolicy:
    """Assemble, solve and wrap in one step; raises SolverError unless optimal."""
    lp = assemble(em, obj, spec)
    sol = solve(lp, tol=tol)
    if sol.status != OPTIMAL:
        raise SolverError(f"adjustment LP ended with status {sol.status}", sol.status)
    meta = PolicyMeta(criterion=spec.criterion, epsilon=spec.epsilon,
                      pairing=spec.resolved_pairing, objective=obj.kind,
                      solver_status=sol.status, objective_value=sol.objective,
                      iterations=sol.iterations, train_n=em.n, smoothing=smoothing,
                      seed=seed)
    return from_solution(lp, sol, em.class_names or None, em.group_names or None, meta)


def predict(policy: AdjustmentPolicy, y_hat: int, a: int, rng: SplitMix64) -> int:
    """Draw one adjusted class for a single observation, advancing `rng`.

    Sequential calls on SplitMix64(seed) reproduce predict_rows(seed) in
    row order.
    """
    c, g = policy.n_classes, policy.n_groups
    if not (0 <= y_hat < c and 0 <= a < g):
        raise PolicyError(f"indices out of range: y_hat={y_hat}, a={a}")
    u = rng.next_uniform()
    acc = 0.0
    for i in range(c - 1):
        acc += policy.p[a, i, y_hat]
        if u < acc:
            return i
    return c - 1


def predict_rows(policy: AdjustmentPolicy, y_hat: np.ndarray, a: np.ndarray,
                 seed: int, row_keys: np.ndarray | None = None) -> np.ndarray:
    """Sample adjusted classes for many rows.

    Row i consumes output `row_keys[i]` (default: i) of the splitmix64
    stream for `seed`, so a row's draw is independent of which other rows
    are predicted alongside it.
    """
    y_hat = np.asarray(y_hat, dtype=np.int64)
    a = np.asarray(a, dtype=np.int64)
    c, g = policy.n_classes, policy.n_groups
    if y_hat.size and (y_hat.min() < 0 or y_hat.max() >= c):
        raise PolicyError("y_hat contains out-of-range indices")
    if a.size and (a.min() < 0 or a.max() >= g):
        raise PolicyError("a contains out-of-range indices")
    if row_keys is None:
        row_keys = np.arange(len(y_hat), dtype=np.int64)
    u = stream_uniforms(seed, np.asarray(row_keys, dtype=np.int64))
    cdf = np.ascontiguousarray(policy.column_cdf())
    return _kernels.sample_rows(cdf, y_hat, a, u)


def analytic_confusions(policy: AdjustmentPolicy, em: EmpiricalModel) -> np.ndarray:
    """Post-adjustment confusion matrices w[a] = p[a] @ z[a], column-stochastic."""
    if policy.p.shape != em.z.shape:
        raise PolicyError(f"shape mismatch: policy {policy.p.shape} vs model {em.z.shape}")
    return np.einsum("aik,akj->aij", policy.p, em.z)
