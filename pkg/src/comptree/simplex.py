"""Simplex-valued data: validation, the KL loss, and floor projection.

A composition is represented as a 1-D ``float64`` numpy array with
non-negative entries summing to one. A sample of ``n`` compositions for one
node is an ``(n, d)`` array wrapped in :class:`CompositionSample`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyData,
    NegativeEntry,
    NonPositivePrediction,
    SumOutOfTolerance,
)

ZERO_CLAMP = 1e-12
SUM_TOL = 1e-9


def validate_composition(v, tolerance: float = SUM_TOL) -> np.ndarray:
    """Check that ``v`` lies on the simplex and return a renormalized copy.

    Entries with magnitude below 1e-12 are clamped to exactly zero before
    renormalizing. The operation is idempotent.

    Raises
    ------
    NegativeEntry
        If any entry is below -1e-12.
    SumOutOfTolerance
        If the entries do not sum to one within ``tolerance``.
    """
    x = np.array(v, dtype=np.float64, copy=True).reshape(-1)
    if x.size < 2:
        raise DimensionMismatch(f"a composition needs at least 2 parts, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise SumOutOfTolerance("composition contains non-finite entries")
    if np.any(x < -ZERO_CLAMP):
        raise NegativeEntry(f"negative entry {x.min()!r}")
    x[np.abs(x) < ZERO_CLAMP] = 0.0
    s = x.sum()
    if abs(s - 1.0) > tolerance:
        raise SumOutOfTolerance(f"parts sum to {s!r}")
    # a sum already equal to one up to rounding is left alone, which keeps this idempotent
    if abs(s - 1.0) <= _round_off(x.size):
        return x
    return x / s


def _round_off(d: int) -> float:
    return 4.0 * d * np.finfo(np.float64).eps


def validate_rows(rows, tolerance: float = SUM_TOL) -> np.ndarray:
    """Row-wise :func:`validate_composition` for an ``(n, d)`` array.

    Errors carry the offending row index in their message.
    """
    x = np.array(rows, dtype=np.float64, copy=True)
    if x.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D array, got shape {x.shape}")
    if x.shape[1] < 2:
        raise DimensionMismatch(f"a composition needs at least 2 parts, got {x.shape[1]}")
    if not np.all(np.isfinite(x)):
        bad = int(np.argwhere(~np.isfinite(x))[0, 0])
        raise SumOutOfTolerance(f"row {bad}: non-finite entry")
    neg = np.any(x < -ZERO_CLAMP, axis=1)
    if neg.any():
        bad = int(np.flatnonzero(neg)[0])
        raise NegativeEntry(f"row {bad}: negative entry {x[bad].min()!r}")
    x[np.abs(x) < ZERO_CLAMP] = 0.0
    s = x.sum(axis=1)
    off = np.abs(s - 1.0) > tolerance
    if off.any():
        bad = int(np.flatnonzero(off)[0])
        raise SumOutOfTolerance(f"row {bad}: parts sum to {s[bad]!r}")
    s[np.abs(s - 1.0) <= _round_off(x.shape[1])] = 1.0
    return x / s[:, None]


def kl_divergence(x, xhat) -> float:
    """KL divergence ``D(x || xhat)`` with the ``0 log 0 = 0`` convention.

    Parts where ``x`` is zero are skipped entirely, so exact zeros in the
    observed composition never produce ``nan``.
    """
    x = np.asarray(x, dtype=np.float64)
    xhat = np.asarray(xhat, dtype=np.float64)
    if x.shape != xhat.shape:
        raise DimensionMismatch(f"lengths differ: {x.shape} vs {xhat.shape}")
    if np.any(xhat <= 0.0):
        raise NonPositivePrediction("predicted composition has a non-positive part")
    pos = x > 0.0
    xp = x[pos]
    return float(np.sum(xp * np.log(xp / xhat[pos])))


def mean_kl(x: np.ndarray, xhat: np.ndarray) -> float:
    """Average row-wise KL divergence between two ``(n, d)`` arrays.

    ``xhat`` may also be a single length-``d`` composition, broadcast across
    rows.
    """
    x = np.asarray(x, dtype=np.float64)
    xhat = np.broadcast_to(np.asarray(xhat, dtype=np.float64), x.shape)
    if np.any(xhat <= 0.0):
        raise NonPositivePrediction("predicted composition has a non-positive part")
    pos = x > 0.0
    xp = x[pos]
    return float(np.sum(xp * np.log(xp / xhat[pos])) / x.shape[0])


def floor_project(weights, floor: float) -> tuple[np.ndarray, bool]:
    """Normalize non-negative ``weights`` onto ``{eta : sum 1, eta_r >= floor}``.

    Returns the maximizer of ``sum_r w_r log eta_r`` over that set, which has
    the form ``max(floor, w_r / lam)``, together with a flag telling whether
    the floor was active. A zero weight vector maps to the uniform composition.
    """
    w = np.asarray(weights, dtype=np.float64)
    d = w.size
    if floor * d >= 1.0:
        raise ValueError(f"floor {floor} is infeasible for {d} parts")
    fixed = np.zeros(d, dtype=bool)
    engaged = False
    while True:
        free_mass = 1.0 - floor * fixed.sum()
        wf = np.where(fixed, 0.0, w)
        total = wf.sum()
        if total > 0.0:
            eta = np.where(fixed, floor, (wf / total) * free_mass)
        else:
            n_free = d - fixed.sum()
            eta = np.where(fixed, floor, free_mass / n_free)
        low = (~fixed) & (eta < floor)
        if not low.any():
            return eta, engaged
        fixed |= low
        engaged = True


@dataclass(frozen=True)
class CompositionSample:
    """``n`` compositions observed at one node."""

    node_index: int
    rows: np.ndarray

    def __post_init__(self):
        rows = np.ascontiguousarray(self.rows, dtype=np.float64)
        if rows.ndim != 2:
            raise DimensionMismatch(f"rows must be 2-D, got shape {rows.shape}")
        if rows.shape[0] < 1:
            raise EmptyData(f"node {self.node_index} has no rows")
        if rows.shape[1] < 2:
            raise DimensionMismatch(f"node {self.node_index}: dimension must be >= 2")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @classmethod
    def from_raw(cls, node_index: int, rows, tolerance: float = SUM_TOL) -> "CompositionSample":
        """Validate and renormalize every row before wrapping."""
        return cls(node_index, validate_rows(rows, tolerance))

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    def take(self, idx) -> "CompositionSample":
        return CompositionSample(self.node_index, self.rows[np.asarray(idx)])
