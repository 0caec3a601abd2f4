"""Ground-truth forests and zero-inflated compositional samples.

Only the conditional mean of each child is fixed by the edge model; the
noise around it is an artifact choice. Rows are Dirichlet draws centred on
the predicted mean with total concentration ``concentration``; afterwards
each part is zeroed independently with probability ``zero_inflation`` and
the row renormalized. Zeroing biases the conditional mean, and the bias
vanishes as ``zero_inflation -> 0``.

Children are generated from the parent's *observed* (post-zeroing) row, so
the emitted data are Markov with respect to the true forest.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arborescence import TreeStructure
from .edge_model import EdgeParams, RootParams, predict
from .simplex import CompositionSample

STRUCTURES = ("chain", "star", "multi_root", "random_tree")


@dataclass(frozen=True)
class GeneratorSpec:
    p: int
    dims: tuple
    structure: str = "chain"
    n: int = 500
    concentration: float = 50.0
    zero_inflation: float = 0.0
    omega1_range: tuple = (0.6, 0.9)
    seed: int = 0
    n_roots: int = 1  # only read by multi_root
    eta_concentration: float = 1.0
    m_concentration: float = 0.1
    margin: float = 0.05
    # Dirichlet concentration for root rows; None reuses ``concentration``
    root_concentration: float | None = None
    # every M = m 1^T; deliberately breaks identifiability, for null experiments
    degenerate: bool = False

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) == 1 and self.p > 1:
            dims = dims * self.p
        object.__setattr__(self, "dims", dims)
        if self.p < 1 or len(dims) != self.p:
            raise ValueError(f"need {self.p} dimensions, got {len(dims)}")
        if min(dims) < 2:
            raise ValueError("every node needs dimension >= 2")
        if self.structure not in STRUCTURES:
            raise ValueError(f"structure must be one of {STRUCTURES}")
        if self.structure == "multi_root" and not 1 <= self.n_roots <= self.p:
            raise ValueError("multi_root needs 1 <= n_roots <= p")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.concentration <= 0:
            raise ValueError("concentration must be > 0")
        if not 0.0 <= self.zero_inflation < 1.0:
            raise ValueError("zero_inflation must lie in [0, 1)")
        lo, hi = self.omega1_range
        if not 0.0 < lo <= hi < 1.0:
            raise ValueError("omega1_range must lie within (0, 1)")


@dataclass(frozen=True)
class GroundTruth:
    tree: TreeStructure
    params: dict  # node -> EdgeParams | RootParams


def _rng(spec: GeneratorSpec, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(stream,)))


def make_topology(spec: GeneratorSpec, rng: np.random.Generator) -> TreeStructure:
    """Parents always precede children in index order."""
    p = spec.p
    if spec.structure == "chain":
        parent = [None] + list(range(p - 1))
    elif spec.structure == "star":
        parent = [None] + [0] * (p - 1)
    else:
        r = spec.n_roots if spec.structure == "multi_root" else 1
        parent = [None] * r + [int(rng.integers(0, j)) for j in range(r, p)]
    return TreeStructure(tuple(parent))


def column_spread(M: np.ndarray) -> float:
    """Largest entry-wise difference between any two columns of ``M``."""
    return float(np.max(M.max(axis=1) - M.min(axis=1)))


def sample_ground_truth(spec: GeneratorSpec) -> GroundTruth:
    rng = _rng(spec, 0)
    tree = make_topology(spec, rng)
    params: dict = {}
    for j, k in enumerate(tree.parent):
        dj = spec.dims[j]
        eta = rng.dirichlet(np.full(dj, spec.eta_concentration))
        if k is None:
            params[j] = RootParams(eta)
            continue
        omega1 = rng.uniform(*spec.omega1_range)
        dk = spec.dims[k]
        if spec.degenerate:
            m = rng.dirichlet(np.full(dj, spec.m_concentration))
            M = np.repeat(m[:, None], dk, axis=1)
        else:
            while True:
                M = rng.dirichlet(np.full(dj, spec.m_concentration), size=dk).T
                if column_spread(M) >= spec.margin:
                    break
        params[j] = EdgeParams(1.0 - omega1, eta, M)
    return GroundTruth(tree, params)


def topological_order(tree: TreeStructure) -> list[int]:
    order, seen = [], set()

    def visit(j):
        if j in seen:
            return
        k = tree.parent[j]
        if k is not None:
            visit(k)
        seen.add(j)
        order.append(j)

    for j in range(tree.p):
        visit(j)
    return order


def _dirichlet_rows(rng, means: np.ndarray, concentration: float) -> np.ndarray:
    shape = concentration * means
    g = rng.standard_gamma(shape)
    while True:
        s = g.sum(axis=1)
        bad = s <= 0.0
        if not bad.any():
            return g / s[:, None]
        # every part underflowed to zero; redraw those rows
        g[bad] = rng.standard_gamma(shape[bad])


def _zero_inflate(rng, x: np.ndarray, rate: float) -> np.ndarray:
    if rate <= 0.0:
        return x
    keep = rng.random(x.shape) >= rate
    while True:
        dead = ~np.any(keep & (x > 0.0), axis=1)
        if not dead.any():
            break
        keep[dead] = rng.random((int(dead.sum()), x.shape[1])) >= rate
    out = np.where(keep, x, 0.0)
    return out / out.sum(axis=1, keepdims=True)


def sample_data(truth: GroundTruth, spec: GeneratorSpec) -> list[CompositionSample]:
    rng = _rng(spec, 1)
    rows: dict[int, np.ndarray] = {}
    for j in topological_order(truth.tree):
        prm = truth.params[j]
        if isinstance(prm, RootParams):
            means = np.broadcast_to(prm.eta, (spec.n, prm.eta.size))
            conc = spec.concentration if spec.root_concentration is None else spec.root_concentration
        else:
            means = predict(prm, rows[truth.tree.parent[j]])
            conc = spec.concentration
        x = _dirichlet_rows(rng, np.ascontiguousarray(means), conc)
        rows[j] = _zero_inflate(rng, x, spec.zero_inflation)
    return [CompositionSample(j, rows[j]) for j in range(truth.tree.p)]


def simulate(spec: GeneratorSpec) -> tuple[GroundTruth, list[CompositionSample]]:
    truth = sample_ground_truth(spec)
    return truth, sample_data(truth, spec)


def mean_recursion(truth: GroundTruth) -> dict[int, np.ndarray]:
    """Analytic marginal means before zero inflation, propagated down the forest."""
    out: dict[int, np.ndarray] = {}
    for j in topological_order(truth.tree):
        prm = truth.params[j]
        if isinstance(prm, RootParams):
            out[j] = prm.eta.copy()
        else:
            out[j] = predict(prm, out[truth.tree.parent[j]])
    return out


def effective_map(params: EdgeParams) -> np.ndarray:
    """``omega0 * eta 1^T + omega1 * M``: the identifiable part of an edge model.

    Column ``c`` is the predicted child mean when the parent sits at vertex ``c``.
    """
    return params.omega0 * params.eta[:, None] + params.omega1 * params.M
