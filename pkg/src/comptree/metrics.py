"""Edge-recovery metrics between an estimated and a true forest.

Edges are ordered pairs, so a reversed edge costs 2 in SHD (one deletion
plus one insertion).
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

from .errors import DimensionMismatch

CSV_FIELDS = ("tpr", "fdr", "shd", "exact_match")


@dataclass(frozen=True)
class RecoveryMetrics:
    tpr: float
    fdr: float
    shd: int
    exact_match: bool

    def to_dict(self) -> dict:
        return asdict(self)

    def csv_header(self) -> str:
        return ",".join(CSV_FIELDS)

    def csv_row(self) -> str:
        return f"{self.tpr!r},{self.fdr!r},{self.shd},{str(self.exact_match).lower()}"


def compare_trees(estimated, truth) -> RecoveryMetrics:
    if estimated.p != truth.p:
        raise DimensionMismatch(f"estimated has {estimated.p} nodes, truth has {truth.p}")
    est, ref = estimated.edges, truth.edges
    hit = len(est & ref)
    tpr = hit / len(ref) if ref else (1.0 if not est else 0.0)
    fdr = (len(est) - hit) / len(est) if est else 0.0
    shd = len(est) + len(ref) - 2 * hit
    return RecoveryMetrics(float(tpr), float(fdr), shd, shd == 0)
