"""Confidence-weighted matrix factorization trained by alternating least squares.

The binary similarity matrix P is factored as X Y^T with every cell carrying
a confidence weight: c = 1 + alpha on observed cells and 1 elsewhere. The
objective is

    sum_ij c_ij (p_ij - x_i . y_j)^2  +  lam * (||X||_F^2 + ||Y||_F^2)

Each half-sweep solves the exact ridge-regression closed form for every row
of one factor while the other is held fixed, so the objective can never
increase. Per-row systems use the standard acceleration: Y^T Y is computed
once per half-sweep and only observed entries contribute corrections, which
keeps a sweep linear in the number of edges.

A user is a sparse indicator vector over artists; ``fold_in_user`` embeds it
with the same closed form, and candidates are ranked by dot product against
their column factors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from scenerec.catalog import Catalog, SimilarityGraph, UserVector
from scenerec.persist import check_index_hash, config_to_json, scalar_str


@dataclass(frozen=True)
class WrmfConfig:
    k: int = 128
    lam: float = 0.1
    alpha: float = 15.0
    sweeps: int = 15
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.lam < 0 or self.alpha < 0:
            raise ValueError("lam and alpha must be >= 0")
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")


@dataclass(frozen=True, eq=False)
class FactorModel:
    """Trained factors: ``row_factors[i]`` embeds artist i's similar-list
    row, ``col_factors[j]`` embeds artist j as a target. ``objective_trace``
    holds the objective at initialization and after every half-sweep."""

    row_factors: np.ndarray
    col_factors: np.ndarray
    config: WrmfConfig
    index_hash: str = ""
    objective_trace: tuple[float, ...] = ()

    @property
    def n(self) -> int:
        return self.row_factors.shape[0]


def solve_row(obs: np.ndarray, other: np.ndarray, gram_reg: np.ndarray, alpha: float) -> np.ndarray:
    """Exact minimizer of the weighted ridge problem for one row:
    (other^T C other + lam I) x = other^T C p, where C is 1 + alpha on the
    observed entries and 1 elsewhere, and p is the binary indicator of
    ``obs``. ``gram_reg`` must be other^T other + lam I."""
    if obs.size == 0:
        return np.zeros(other.shape[1])
    m = other[obs]
    a = gram_reg + alpha * (m.T @ m)
    b = (1.0 + alpha) * m.sum(axis=0)
    return np.linalg.solve(a, b)


def half_sweep(rows: Sequence[np.ndarray], this: np.ndarray, other: np.ndarray, lam: float, alpha: float) -> None:
    """Update every row of ``this`` in place against fixed ``other``."""
    k = other.shape[1]
    gram_reg = other.T @ other + lam * np.eye(k)
    for i, obs in enumerate(rows):
        this[i] = solve_row(obs, other, gram_reg, alpha)


def _objective_value(x: np.ndarray, y: np.ndarray, rows: Sequence[np.ndarray], lam: float, alpha: float) -> float:
    # sum over all cells of s_ij^2 equals tr((X^T X)(Y^T Y)); observed cells
    # then swap their s^2 term for (1 + alpha)(1 - s)^2.
    total_sq = float(np.trace((x.T @ x) @ (y.T @ y)))
    observed = 0.0
    for i, obs in enumerate(rows):
        if obs.size == 0:
            continue
        s = y[obs] @ x[i]
        observed += float(((1.0 + alpha) * np.square(1.0 - s) - np.square(s)).sum())
    return total_sq + observed + lam * (float(np.square(x).sum()) + float(np.square(y).sum()))


def objective(model: FactorModel, graph: SimilarityGraph) -> float:
    """Exact weighted squared error plus regularization for the model on the
    given graph."""
    if graph.n != model.n:
        raise ValueError(f"graph has {graph.n} artists but model has {model.n}")
    return _objective_value(model.row_factors, model.col_factors, graph.rows, model.config.lam, model.config.alpha)


def train_wrmf(graph: SimilarityGraph, config: WrmfConfig, *, index_hash: str = "") -> FactorModel:
    """Run ALS: factors start as seeded noise scaled by 1/sqrt(k), then each
    sweep updates all rows of X and then all rows of Y with the closed-form
    solve. Deterministic for a given seed and graph."""
    n = graph.n
    if n == 0:
        raise ValueError("cannot train on an empty graph")
    rng = np.random.default_rng(config.seed)
    scale = 1.0 / np.sqrt(config.k)
    x = rng.standard_normal((n, config.k)) * scale
    y = rng.standard_normal((n, config.k)) * scale
    rows = graph.rows
    cols = graph.transpose().rows
    trace = [_objective_value(x, y, rows, config.lam, config.alpha)]
    for sweep in range(config.sweeps):
        half_sweep(rows, x, y, config.lam, config.alpha)
        trace.append(_objective_value(x, y, rows, config.lam, config.alpha))
        half_sweep(cols, y, x, config.lam, config.alpha)
        trace.append(_objective_value(x, y, rows, config.lam, config.alpha))
        if not (np.isfinite(x).all() and np.isfinite(y).all()):
            raise FloatingPointError(f"non-finite factors after sweep {sweep} (ill-conditioned; raise lam)")
    return FactorModel(x, y, config, index_hash, tuple(trace))


def fold_in_user(model: FactorModel, user: UserVector) -> np.ndarray:
    """Embed a seed-indicator vector into the factor space via the same
    closed-form ridge solve used for row updates."""
    if user.indices.size == 0:
        raise ValueError("fold-in requires at least one seed artist")
    if user.n != model.n:
        raise ValueError(f"user vector has dimension {user.n} but model has {model.n}")
    y = model.col_factors
    gram_reg = y.T @ y + model.config.lam * np.eye(model.config.k)
    return solve_row(user.indices, y, gram_reg, model.config.alpha)


def rank_candidates(
    model: FactorModel, user_vec: np.ndarray, candidates: Sequence[str], catalog: Catalog
) -> list[tuple[str, float]]:
    """Score candidates by dot product with the user embedding; return
    (id, score) pairs sorted by descending score, ties by ascending id."""
    if not candidates:
        raise ValueError("candidates must be nonempty")
    scored = []
    for cid in candidates:
        if cid not in catalog.index:
            raise ValueError(f"unknown candidate id {cid!r}")
        scored.append((cid, float(model.col_factors[catalog.index[cid]] @ user_vec)))
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored


def save_factor_model(model: FactorModel, path: str | Path) -> None:
    np.savez(
        path,
        row_factors=model.row_factors,
        col_factors=model.col_factors,
        config_json=np.str_(config_to_json(model.config)),
        index_hash=np.str_(model.index_hash),
        objective_trace=np.asarray(model.objective_trace),
    )


def load_factor_model(path: str | Path, expected_index_hash: str | None = None) -> FactorModel:
    with np.load(path) as data:
        stored_hash = scalar_str(data["index_hash"])
        check_index_hash(stored_hash, expected_index_hash, path)
        config = WrmfConfig(**json.loads(scalar_str(data["config_json"])))
        return FactorModel(
            row_factors=data["row_factors"],
            col_factors=data["col_factors"],
            config=config,
            index_hash=stored_hash,
            objective_trace=tuple(float(v) for v in data["objective_trace"]),
        )
