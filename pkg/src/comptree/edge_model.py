"""Pairwise conditional-mean model and its EM estimator.

For a candidate edge ``parent -> child`` the predicted child composition is

    xhat = omega0 * eta + (1 - omega0) * (M @ x_parent)

where ``eta`` is a baseline composition on the child simplex and ``M`` is a
column-stochastic ``(d_child, d_parent)`` matrix. Parameters are fitted by
minimizing the mean KL divergence from observed to predicted rows, which is
a multinomial mixture likelihood in disguise and is solved with EM.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import DimensionMismatch, EmptyData
from .simplex import CompositionSample, floor_project, mean_kl


@dataclass(frozen=True)
class EdgeParams:
    omega0: float
    eta: np.ndarray
    M: np.ndarray

    @property
    def omega1(self) -> float:
        return 1.0 - self.omega0

    @property
    def d_child(self) -> int:
        return self.M.shape[0]

    @property
    def d_parent(self) -> int:
        return self.M.shape[1]

    def check(self, omega_min: float = 0.0, eta_min: float = 0.0, atol: float = 1e-9) -> None:
        """Raise ``ValueError`` if the bundle violates its invariants."""
        if self.eta.shape != (self.M.shape[0],):
            raise DimensionMismatch("eta length must equal the row count of M")
        if not omega_min - 1e-15 <= self.omega0 <= 1.0 - omega_min + 1e-15:
            raise ValueError(f"omega0={self.omega0} outside [{omega_min}, {1 - omega_min}]")
        if self.eta.min() < eta_min * (1 - 1e-12) or abs(self.eta.sum() - 1.0) > atol:
            raise ValueError("eta is not a floored composition")
        if self.M.min() < 0.0 or np.max(np.abs(self.M.sum(axis=0) - 1.0)) > atol:
            raise ValueError("M is not column-stochastic")


@dataclass(frozen=True)
class RootParams:
    eta: np.ndarray


@dataclass(frozen=True)
class EmConfig:
    max_iters: int = 500
    rel_tol: float = 1e-8
    omega_min: float = 1e-4
    eta_min: float = 1e-6
    restarts: int = 5
    seed: int = 0
    # squared extrapolation between EM steps; the risk trace stays monotone
    accelerate: bool = True

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be > 0")
        if not 0.0 < self.omega_min < 0.5:
            raise ValueError("omega_min must lie in (0, 0.5)")
        if self.eta_min <= 0:
            raise ValueError("eta_min must be > 0")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def epsilon0(self) -> float:
        """Lower bound on every predicted part."""
        return self.omega_min * self.eta_min


@dataclass
class EmFitResult:
    params: EdgeParams
    risk: float
    iterations: int
    converged: bool
    risk_trace: np.ndarray
    # projected[t] marks steps whose M-step engaged the eta floor or omega clamp
    projected: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    restart: int = 0


def _rows(sample) -> np.ndarray:
    rows = sample.rows if isinstance(sample, CompositionSample) else np.asarray(sample, dtype=np.float64)
    if rows.ndim != 2:
        raise DimensionMismatch(f"expected an (n, d) array, got shape {rows.shape}")
    if rows.shape[0] == 0:
        raise EmptyData("no rows")
    return np.ascontiguousarray(rows, dtype=np.float64)


def predict(params: EdgeParams, x_parent) -> np.ndarray:
    """Predicted child composition(s) for one parent row or an ``(n, d)`` block."""
    x = np.asarray(x_parent, dtype=np.float64)
    if x.shape[-1] != params.d_parent:
        raise DimensionMismatch(f"parent has {x.shape[-1]} parts, M expects {params.d_parent}")
    return params.omega0 * params.eta + params.omega1 * (x @ params.M.T)


def responsibilities(params: EdgeParams, child, parent):
    """E-step quantities for every sample ``i`` and child part ``r``.

    Returns ``(gamma0, gamma1, alloc)`` with shapes ``(n, dc)``, ``(n, dc)``
    and ``(n, dc, dp)``; ``alloc[i, r, c]`` is the share of the parent-driven
    component attributed to parent part ``c``. Cells where ``(M x_i)_r`` is
    zero get ``gamma1 = 0`` and a uniform allocation.
    """
    xc, xp = _rows(child), _rows(parent)
    mx = xp @ params.M.T
    xhat = params.omega0 * params.eta + params.omega1 * mx
    gamma0 = params.omega0 * params.eta / xhat
    gamma1 = params.omega1 * mx / xhat
    joint = xp[:, None, :] * params.M[None, :, :]
    dp = xp.shape[1]
    with np.errstate(invalid="ignore", divide="ignore"):
        alloc = np.where(mx[:, :, None] > 0.0, joint / mx[:, :, None], 1.0 / dp)
    gamma1 = np.where(mx > 0.0, gamma1, 0.0)
    return gamma0, gamma1, alloc


def _check_pair(xc: np.ndarray, xp: np.ndarray) -> None:
    if xc.shape[0] != xp.shape[0]:
        raise DimensionMismatch(f"child has {xc.shape[0]} rows, parent has {xp.shape[0]}")
    if xc.shape[1] < 2 or xp.shape[1] < 2:
        raise DimensionMismatch("compositions need at least 2 parts")


def root_eta(xc: np.ndarray, eta_min: float) -> np.ndarray:
    eta, _ = floor_project(xc.mean(axis=0), eta_min)
    return eta


def initial_params(xc: np.ndarray, dp: int, config: EmConfig, restart: int, stream=()) -> EdgeParams:
    """Starting point for restart ``restart`` (0-based).

    Restart 0 is the degenerate start ``M = eta 1^T``, which reproduces the
    root fit exactly. Later restarts jitter each column of ``M`` with
    log-normal noise from a stream keyed on ``(seed, *stream, restart)``.
    """
    eta = root_eta(xc, config.eta_min)
    M = np.repeat(eta[:, None], dp, axis=1)
    if restart > 0:
        ss = np.random.SeedSequence(config.seed, spawn_key=(*stream, restart))
        rng = np.random.default_rng(ss)
        M = M * np.exp(rng.standard_normal(M.shape))
        M /= M.sum(axis=0, keepdims=True)
    return EdgeParams(0.5, eta, M)


def em_iterate(params: EdgeParams, child, parent, config: EmConfig, max_iters=None, backend=None):
    """Run EM from ``params`` and return ``(EdgeParams, trace, projected, iterations, converged)``."""
    xc, xp = _rows(child), _rows(parent)
    _check_pair(xc, xp)
    if params.d_child != xc.shape[1] or params.d_parent != xp.shape[1]:
        raise DimensionMismatch("parameter shapes do not match the data")
    run_em = _backend.get_run_em(backend)
    omega0, eta, M, trace, projected, iters, converged = run_em(
        xc,
        xp,
        float(params.omega0),
        params.eta,
        params.M,
        int(config.max_iters if max_iters is None else max_iters),
        float(config.rel_tol),
        float(config.omega_min),
        float(config.eta_min),
        bool(config.accelerate),
    )
    return EdgeParams(omega0, eta, M), trace, projected, iters, converged


def em_fit(child, parent, config: EmConfig = EmConfig(), stream=(), backend=None) -> EmFitResult:
    """Fit the edge model for ``parent -> child`` by EM with restarts.

    ``stream`` is mixed into the seed of the jittered restarts, typically
    ``(child_index, parent_index)``, so each pair draws from its own
    generator. Returns the restart with the smallest final risk; ties go to
    the earliest restart.
    """
    xc, xp = _rows(child), _rows(parent)
    _check_pair(xc, xp)
    if config.eta_min * xc.shape[1] >= 1.0:
        raise ValueError("eta_min * d_child must be < 1")
    best = None
    for restart in range(config.restarts):
        start = initial_params(xc, xp.shape[1], config, restart, stream)
        params, trace, projected, iters, converged = em_iterate(start, xc, xp, config, backend=backend)
        risk = sample_risk(params, xc, xp)
        if best is None or risk < best.risk:
            best = EmFitResult(params, risk, iters, converged, trace, projected, restart)
    return best


def fit_root(node, eta_min: float = EmConfig.eta_min) -> RootParams:
    """Closed-form root fit: the sample mean, floored at ``eta_min``."""
    xc = _rows(node)
    return RootParams(root_eta(xc, eta_min))


def sample_risk(params, child, parent=None) -> float:
    """Mean KL divergence of observed child rows from their predictions."""
    xc = _rows(child)
    if isinstance(params, RootParams):
        if parent is not None:
            raise ValueError("root parameters take no parent data")
        if params.eta.shape != (xc.shape[1],):
            raise DimensionMismatch("eta length does not match child dimension")
        return mean_kl(xc, params.eta)
    if parent is None:
        raise ValueError("edge parameters need parent data")
    xp = _rows(parent)
    _check_pair(xc, xp)
    if params.d_child != xc.shape[1]:
        raise DimensionMismatch("M rows do not match child dimension")
    return mean_kl(xc, predict(params, xp))
