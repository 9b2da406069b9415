"""Empirical estimates of every distribution the adjustment LP consumes.

From the raw triples we estimate, per protected group a:

* z[a][k][j]  = Pr(Yhat=k | Y=j, A=a), the blackbox's group-conditional
  confusion matrix (column-stochastic in j),
* v[a][j][c]  = sum_{c'!=c} z[a][j][c'] Pr(Y=c', A=a) / Pr(Y!=c, A=a),
  the mixture matrix that makes false detection rates linear in the
  adjustment variables,
* p_yhat_given_a[a][k] = Pr(Yhat=k | A=a),

together with the joint Pr(Y=j, A=a) and marginal Pr(A=a).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .data_model import AdjustmentDataset


class EstimationError(ValueError):
    """Raised when a required probability cannot be estimated from the data."""


@dataclass(frozen=True)
class EmpiricalModel:
    p_a: np.ndarray               # (G,)    Pr(A=a)
    p_ya: np.ndarray              # (G, C)  Pr(Y=j, A=a)
    z: np.ndarray                 # (G, C, C)  z[a][k][j] = Pr(Yhat=k|Y=j,A=a)
    v: np.ndarray                 # (G, C, C)  see module docstring
    p_yhat_given_a: np.ndarray    # (G, C)  Pr(Yhat=k|A=a)
    n_cells: np.ndarray           # (G, C)  raw counts of (Y=j, A=a)
    n: int
    class_names: tuple[str, ...] = field(default=())
    group_names: tuple[str, ...] = field(default=())

    @property
    def n_classes(self) -> int:
        return self.p_ya.shape[1]

    @property
    def n_groups(self) -> int:
        return self.p_ya.shape[0]

    def to_dict(self) -> dict:
        """Row-major, group-indexed layout for debugging dumps."""
        return {
            "n": self.n,
            "class_names": list(self.class_names),
            "group_names": list(self.group_names),
            "p_a": self.p_a.tolist(),
            "p_ya": self.p_ya.tolist(),
            "z": self.z.tolist(),
            "v": self.v.tolist(),
            "p_yhat_given_a": self.p_yhat_given_a.tolist(),
            "n_cells": self.n_cells.tolist(),
        }

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)


def build_v(z: np.ndarray, p_ya: np.ndarray, group_names=None) -> np.ndarray:
    """Mixture matrices v from (z, p_ya).

    Column c of v[a] is the p_ya-weighted mixture of the columns c' != c
    of z[a], so each column sums to 1. Requires every group to carry mass
    on at least two classes.
    """
    z = np.asarray(z, dtype=np.float64)
    p_ya = np.asarray(p_ya, dtype=np.float64)
    g, c = p_ya.shape
    p_group = p_ya.sum(axis=1)
    denom = p_group[:, None] - p_ya            # (G, C)  Pr(Y!=c, A=a)
    bad = np.flatnonzero(np.any(denom <= 0.0, axis=1))
    if bad.size:
        names = [group_names[i] if group_names else str(i) for i in bad]
        raise EstimationError(
            "group(s) with all mass on a single class, Pr(Y!=c, A=a) = 0: "
            + ", ".join(names))
    num = np.einsum("ajc,ac->aj", z, p_ya)      # (G, C)  sum_c' z[a][j][c'] p_ya[a][c']
    v = (num[:, :, None] - z * p_ya[:, None, :]) / denom[:, None, :]
    return v


def fit_empirical(ds: AdjustmentDataset, smoothing: float = 0.0) -> EmpiricalModel:
    """Estimate all distributions by counting.

    `smoothing` is added to every count of each conditional distribution
    (the columns of z and the rows of p_yhat_given_a) before normalizing;
    0 gives exact maximum-likelihood estimates but raises if any (Y, A)
    cell is empty, since the corresponding column of z is then undefined.
    """
    if smoothing < 0:
        raise ValueError("smoothing must be nonnegative")
    c, g, n = ds.n_classes, ds.n_groups, ds.n
    flat = (ds.a * c + ds.y_hat) * c + ds.y
    counts = np.bincount(flat, minlength=g * c * c).reshape(g, c, c).astype(np.float64)
    n_cells = counts.sum(axis=1)               # (G, C) over predicted axis
    if smoothing == 0.0 and np.any(n_cells == 0):
        empty = [
            f"(y={ds.class_names[j]}, a={ds.group_names[a]})"
            for a, j in zip(*np.nonzero(n_cells == 0))
        ]
        raise EstimationError(
            "empty (Y, A) cells with smoothing=0: " + ", ".join(empty))
    z = (counts + smoothing) / (n_cells[:, None, :] + c * smoothing)
    p_ya = n_cells / n
    p_a = p_ya.sum(axis=1)
    counts_ka = counts.sum(axis=2)             # (G, C) counts of (Yhat=k, A=a)
    n_a = counts_ka.sum(axis=1)
    p_yhat_given_a = (counts_ka + smoothing) / (n_a[:, None] + c * smoothing)
    v = build_v(z, p_ya, ds.group_names)
    return EmpiricalModel(p_a=p_a, p_ya=p_ya, z=z, v=v,
                          p_yhat_given_a=p_yhat_given_a, n_cells=n_cells, n=n,
                          class_names=ds.class_names, group_names=ds.group_names)
