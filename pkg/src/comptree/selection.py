"""Cross-validated choice of the edge penalty and final refit."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arborescence import TreeStructure, build_augmented_graph, chu_liu_edmonds
from .edge_model import EmConfig, sample_risk
from .errors import DimensionMismatch, MissingParams, TooFewSamples
from .risk import RiskTable, build_risk_table, largest_signal

LOO = "loo"


@dataclass(frozen=True)
class CvConfig:
    k_folds: int | str = 5
    alpha_grid: tuple | None = None  # None -> default_alpha_grid on the full data
    fold_seed: int = 0

    def __post_init__(self):
        if self.k_folds != LOO and (not isinstance(self.k_folds, int) or self.k_folds < 2):
            raise ValueError("k_folds must be an integer >= 2 or 'loo'")
        if self.alpha_grid is not None:
            grid = tuple(float(a) for a in self.alpha_grid)
            if not grid:
                raise ValueError("alpha_grid must be non-empty")
            if grid[0] < 0 or any(b <= a for a, b in zip(grid, grid[1:])):
                raise ValueError("alpha_grid must be non-negative and strictly increasing")
            object.__setattr__(self, "alpha_grid", grid)


@dataclass
class CvReport:
    alpha_grid: tuple
    mean_validation_risk: dict
    per_fold_risk: np.ndarray  # shape (len(alpha_grid), K)
    selected_alpha: float
    final_tree: TreeStructure
    final_params: RiskTable
    folds: np.ndarray  # fold label per row


def default_alpha_grid(delta_max: float, size: int = 20) -> tuple:
    """Zero plus ``size`` log-spaced values from ``1e-4 * delta_max`` to ``2 * delta_max``."""
    if not delta_max > 0:
        return (0.0,)
    return (0.0,) + tuple(float(a) for a in np.geomspace(1e-4 * delta_max, 2.0 * delta_max, size))


def assign_folds(n: int, k_folds, fold_seed: int) -> np.ndarray:
    """Shuffled round-robin fold labels, reproducible from ``fold_seed``."""
    k = n if k_folds == LOO else int(k_folds)
    if n < k:
        raise TooFewSamples(f"{n} rows cannot fill {k} folds")
    perm = np.random.default_rng(fold_seed).permutation(n)
    folds = np.empty(n, dtype=np.int64)
    folds[perm] = np.arange(n) % k
    return folds


def validation_risk(tree: TreeStructure, train_table: RiskTable, val_data) -> float:
    """Sum over nodes of the held-out mean KL under training parameters."""
    val_data = list(val_data)
    if tree.p != train_table.p or len(val_data) != tree.p:
        raise DimensionMismatch("tree, table and validation data disagree on p")
    total = 0.0
    for j, k in enumerate(tree.parent):
        if k is None:
            if j not in train_table.root_params:
                raise MissingParams(f"no root parameters for node {j}")
            total += sample_risk(train_table.root_params[j], val_data[j])
        else:
            if (j, k) not in train_table.edge_params:
                raise MissingParams(f"no edge parameters for {k} -> {j}")
            total += sample_risk(train_table.edge_params[(j, k)], val_data[j], val_data[k])
    return total


def solve(table: RiskTable, alpha: float) -> TreeStructure:
    return chu_liu_edmonds(build_augmented_graph(table, alpha))


def cross_validate(data, cv: CvConfig = CvConfig(), em: EmConfig = EmConfig(),
                   threads: int | None = None, full_table: RiskTable | None = None) -> CvReport:
    """K-fold (or leave-one-out) selection of ``alpha`` followed by a full-data refit.

    The selected penalty minimizes the fold-averaged validation risk; ties go
    to the largest ``alpha``. EM seeds for fold ``t`` mix ``t`` into each pair's
    stream, the full-data refit uses the unmixed stream.
    """
    data = list(data)
    n = data[0].n
    folds = assign_folds(n, cv.k_folds, cv.fold_seed)
    k = int(folds.max()) + 1

    if full_table is None:
        full_table = build_risk_table(data, em, threads=threads)
    grid = cv.alpha_grid if cv.alpha_grid is not None else default_alpha_grid(largest_signal(full_table))

    per_fold = np.empty((len(grid), k))
    for t in range(k):
        train_idx = np.flatnonzero(folds != t)
        val_idx = np.flatnonzero(folds == t)
        train = [s.take(train_idx) for s in data]
        val = [s.take(val_idx) for s in data]
        table = build_risk_table(train, em, threads=threads, stream=(t,))
        cache: dict = {}
        for a_i, alpha in enumerate(grid):
            tree = solve(table, alpha)
            if tree not in cache:
                cache[tree] = validation_risk(tree, table, val)
            per_fold[a_i, t] = cache[tree]

    mean = per_fold.mean(axis=1)
    best = min(range(len(grid)), key=lambda i: (mean[i], -grid[i]))
    selected = float(grid[best])
    return CvReport(
        alpha_grid=tuple(grid),
        mean_validation_risk={float(a): float(m) for a, m in zip(grid, mean)},
        per_fold_risk=per_fold,
        selected_alpha=selected,
        final_tree=solve(full_table, selected),
        final_params=full_table,
        folds=folds,
    )
