"""Exact minimum-weight arborescence over the virtual-root augmented graph.

Real nodes are 0-based in :class:`TreeStructure`. In
:class:`WeightedDigraph` index 0 is the virtual root and real node ``j``
sits at index ``j + 1``.

Both the solver and the brute-force oracle rank trees by exact integer
arithmetic on the float64 weights, with ties resolved towards the
lexicographically smallest parent vector (root before any parent, then the
smallest parent index, earlier nodes first). The tie rule is folded into the
weights as a low-order perturbation, so the two agree on every input.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import InvalidTree, TooLarge


@dataclass(frozen=True)
class TreeStructure:
    """Parent assignment encoding a directed forest (``None`` marks a root)."""

    parent: tuple

    def __post_init__(self):
        parent = tuple(None if k is None else int(k) for k in self.parent)
        object.__setattr__(self, "parent", parent)
        p = len(parent)
        if p == 0:
            raise InvalidTree("empty tree")
        for j, k in enumerate(parent):
            if k is None:
                continue
            if k == j:
                raise InvalidTree(f"node {j} is its own parent")
            if not 0 <= k < p:
                raise InvalidTree(f"node {j} has out-of-range parent {k}")
        if _has_cycle(parent):
            raise InvalidTree(f"parent vector {parent} contains a cycle")

    @property
    def p(self) -> int:
        return len(self.parent)

    @property
    def edges(self) -> frozenset:
        """Ordered ``(parent, child)`` pairs."""
        return frozenset((k, j) for j, k in enumerate(self.parent) if k is not None)

    @property
    def roots(self) -> list[int]:
        return [j for j, k in enumerate(self.parent) if k is None]

    @classmethod
    def empty(cls, p: int) -> "TreeStructure":
        return cls((None,) * p)


def _has_cycle(parent) -> bool:
    p = len(parent)
    state = [0] * p  # 0 unseen, 1 on current path, 2 done
    for start in range(p):
        path = []
        v = start
        while v is not None and state[v] == 0:
            state[v] = 1
            path.append(v)
            v = parent[v]
        if v is not None and state[v] == 1:
            return True
        for u in path:
            state[u] = 2
    return False


@dataclass(frozen=True)
class WeightedDigraph:
    """Dense weights ``weight[k, j]`` for edge ``k -> j`` on ``p + 1`` nodes."""

    p: int
    weight: np.ndarray

    def edge(self, k: int, j: int) -> float:
        return float(self.weight[k, j])


def build_augmented_graph(table, alpha: float) -> WeightedDigraph:
    """Virtual root edges get ``root_risk``, real edges ``edge_risk + alpha``."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    p = table.p
    w = np.full((p + 1, p + 1), np.nan)
    w[0, 1:] = table.root_risk
    w[1:, 1:] = table.edge_risk.T + alpha
    np.fill_diagonal(w, np.nan)
    return WeightedDigraph(p, w)


def _exact_keys(g: WeightedDigraph) -> dict[tuple[int, int], int]:
    """Integer keys whose order is (weight, tie rule), exact for float64 inputs.

    Each weight is scaled by a common power of two; the tie perturbation
    ``rank(k) * B**(p-1-j)`` with ``B = p + 1`` sits below the weight digits,
    so the sum over a tree compares like ``(total weight, parent vector)``.
    """
    p = g.p
    items = []
    for k in range(p + 1):
        for jj in range(1, p + 1):
            if k == jj:
                continue
            w = g.weight[k, jj]
            if not np.isfinite(w):
                raise ValueError(f"weight {k}->{jj} is not finite")
            items.append(((k, jj), float(w).as_integer_ratio()))
    den = max(d for _, (_, d) in items)
    base = p + 1
    shift = base**p
    keys = {}
    for (k, jj), (num, d) in items:
        j = jj - 1
        keys[(k, jj)] = num * (den // d) * shift + k * base ** (p - 1 - j)
    return keys


def _find_cycle(best: dict) -> list | None:
    done = set()
    for start in best:
        path = []
        on_path = set()
        v = start
        while v in best and v not in done and v not in on_path:
            path.append(v)
            on_path.add(v)
            v = best[v]
        if v in on_path:
            return path[path.index(v):]
        done.update(path)
    return None


def _edmonds(nodes: list, root, edges: dict, next_id: int) -> dict:
    """Chu-Liu/Edmonds by recursive cycle contraction. Returns ``child -> parent``."""
    incoming: dict = {}
    for (u, v), w in edges.items():
        if v == root or u == v:
            continue
        cur = incoming.get(v)
        if cur is None or (w, u) < cur:
            incoming[v] = (w, u)
    best = {v: incoming[v][1] for v in nodes if v != root}
    cycle = _find_cycle(best)
    if cycle is None:
        return best

    in_cycle = set(cycle)
    c = next_id
    best_w = {v: incoming[v][0] for v in cycle}
    new_edges: dict = {}
    origin: dict = {}
    for (u, v), w in edges.items():
        if u in in_cycle and v in in_cycle:
            continue
        if v in in_cycle:
            key, nw = (u, c), w - best_w[v]
        elif u in in_cycle:
            key, nw = (c, v), w
        else:
            key, nw = (u, v), w
        if key not in new_edges or nw < new_edges[key]:
            new_edges[key] = nw
            origin[key] = (u, v)
    new_nodes = [v for v in nodes if v not in in_cycle] + [c]
    sub = _edmonds(new_nodes, root, new_edges, next_id + 1)

    result = {}
    for v, u in sub.items():
        ou, ov = origin[(u, v)]
        result[ov] = ou
    entered = origin[(sub[c], c)][1]
    for v in cycle:
        if v != entered:
            result[v] = best[v]
    return result


def chu_liu_edmonds(g: WeightedDigraph) -> TreeStructure:
    """Minimum-weight arborescence rooted at the virtual root, as a forest."""
    keys = _exact_keys(g)
    nodes = list(range(g.p + 1))
    chosen = _edmonds(nodes, 0, keys, g.p + 1)
    return TreeStructure(tuple(None if chosen[jj] == 0 else chosen[jj] - 1 for jj in range(1, g.p + 1)))


def tree_key(keys: dict, tree: TreeStructure) -> int:
    return sum(keys[(0 if k is None else k + 1, j + 1)] for j, k in enumerate(tree.parent))


def brute_force_search(table, alpha: float) -> TreeStructure:
    """Enumerate every parent vector and keep the best (testing oracle, p <= 8)."""
    p = table.p
    if p > 8:
        raise TooLarge(f"brute force is limited to p <= 8, got {p}")
    keys = _exact_keys(build_augmented_graph(table, alpha))
    choices = [[None] + [k for k in range(p) if k != j] for j in range(p)]
    best_key, best = None, None
    for parent in itertools.product(*choices):
        if _has_cycle(parent):
            continue
        key = sum(keys[(0 if k is None else k + 1, j + 1)] for j, k in enumerate(parent))
        if best_key is None or key < best_key:
            best_key, best = key, parent
    return TreeStructure(best)


def greedy_parents(g: WeightedDigraph) -> tuple:
    """Per-node cheapest in-edge under the same tie rule; may contain cycles."""
    keys = _exact_keys(g)
    out = []
    for jj in range(1, g.p + 1):
        k = min((k for k in range(g.p + 1) if k != jj), key=lambda k: keys[(k, jj)])
        out.append(None if k == 0 else k - 1)
    return tuple(out)
