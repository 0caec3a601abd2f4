"""Pairwise risk table, edge signals and the penalized tree score."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .edge_model import EdgeParams, EmConfig, EmFitResult, RootParams, em_fit, fit_root, sample_risk
from .errors import DimensionMismatch, InconsistentSampleCount


@dataclass
class RiskTable:
    """Optimized sample risks for every ordered pair and every root.

    ``edge_risk[j, k]`` is the risk of child ``j`` given parent ``k``; the
    diagonal is ``nan``. Indices are 0-based.
    """

    p: int
    edge_risk: np.ndarray
    root_risk: np.ndarray
    edge_params: dict[tuple[int, int], EdgeParams] = field(default_factory=dict)
    root_params: dict[int, RootParams] = field(default_factory=dict)
    fits: dict[tuple[int, int], EmFitResult] = field(default_factory=dict, repr=False)

    @classmethod
    def from_risks(cls, edge_risk, root_risk) -> "RiskTable":
        """A parameter-free table, handy for solver tests."""
        edge_risk = np.array(edge_risk, dtype=np.float64)
        root_risk = np.array(root_risk, dtype=np.float64)
        p = root_risk.size
        if edge_risk.shape != (p, p):
            raise DimensionMismatch("edge_risk must be p x p")
        np.fill_diagonal(edge_risk, np.nan)
        return cls(p, edge_risk, root_risk)


def _default_threads() -> int:
    return os.cpu_count() or 1


def build_risk_table(data, config: EmConfig = EmConfig(), threads: int | None = None,
                     stream=(), backend=None) -> RiskTable:
    """Fit all ``p (p - 1)`` edge models and ``p`` root models.

    Pair fits are independent and run on a thread pool; each pair seeds its
    own generator from ``(config.seed, j, k, *stream)`` so the table does not
    depend on ``threads``.
    """
    data = list(data)
    p = len(data)
    if p == 0:
        raise DimensionMismatch("no nodes")
    ns = {s.n for s in data}
    if len(ns) != 1:
        raise InconsistentSampleCount(f"nodes disagree on sample count: {sorted(ns)}")

    root_params = {j: fit_root(s, config.eta_min) for j, s in enumerate(data)}
    root_risk = np.array([sample_risk(root_params[j], data[j]) for j in range(p)])

    pairs = [(j, k) for j in range(p) for k in range(p) if j != k]

    def fit(pair):
        j, k = pair
        return em_fit(data[j], data[k], config, stream=(j, k, *stream), backend=backend)

    threads = threads or _default_threads()
    if threads > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(fit, pairs))
    else:
        results = [fit(pair) for pair in pairs]

    edge_risk = np.full((p, p), np.nan)
    fits = dict(zip(pairs, results))
    for (j, k), res in fits.items():
        edge_risk[j, k] = res.risk
    return RiskTable(
        p=p,
        edge_risk=edge_risk,
        root_risk=root_risk,
        edge_params={pair: res.params for pair, res in fits.items()},
        root_params=root_params,
        fits=fits,
    )


def edge_signals(table: RiskTable) -> np.ndarray:
    """KL reduction ``delta[j, k] = root_risk[j] - edge_risk[j, k]`` (diagonal ``nan``)."""
    return table.root_risk[:, None] - table.edge_risk


def largest_signal(table: RiskTable) -> float:
    delta = edge_signals(table)
    if table.p < 2:
        return 0.0
    return float(np.nanmax(delta))


def _check_tree(table: RiskTable, tree) -> None:
    if tree.p != table.p:
        raise DimensionMismatch(f"tree has {tree.p} nodes, table has {table.p}")


def node_terms(table: RiskTable, tree, alpha: float) -> np.ndarray:
    """Per-node contribution to the score: root risk, or edge risk plus ``alpha``."""
    _check_tree(table, tree)
    out = np.empty(table.p)
    for j, k in enumerate(tree.parent):
        out[j] = table.root_risk[j] if k is None else table.edge_risk[j, k] + alpha
    return out


def tree_score(table: RiskTable, tree, alpha: float) -> float:
    """Penalized sample score of ``tree``: edge risks + root risks + alpha * |E|."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    _check_tree(table, tree)
    edges = [(j, k) for j, k in enumerate(tree.parent) if k is not None]
    roots = [j for j, k in enumerate(tree.parent) if k is None]
    return (
        float(sum(table.edge_risk[j, k] for j, k in edges))
        + float(sum(table.root_risk[j] for j in roots))
        + alpha * len(edges)
    )


def separation_diagnostic(table: RiskTable, tree) -> tuple[float, float]:
    """Empirical ``(min true-edge signal, max best-false-candidate signal)`` for a reference tree.

    For each node the false candidate is the non-parent with the smallest
    edge risk. Either entry is ``nan`` when undefined (no edges / p = 1).
    """
    delta = edge_signals(table)
    true_sig = [delta[j, k] for j, k in enumerate(tree.parent) if k is not None]
    false_sig = []
    for j, k_true in enumerate(tree.parent):
        cands = [k for k in range(table.p) if k != j and k != k_true]
        if cands:
            k_best = min(cands, key=lambda k: (table.edge_risk[j, k], k))
            false_sig.append(delta[j, k_best])
    return (
        float(min(true_sig)) if true_sig else float("nan"),
        float(max(false_sig)) if false_sig else float("nan"),
    )
