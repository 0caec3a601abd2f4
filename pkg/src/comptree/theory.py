"""Finite-sample recovery bound and the implied sample complexity.

    P(wrong tree) <= 4 (p^2 + p) (24 R L / gamma)^D exp(-n gamma^2 / (32 log^2(1/eps0)))

with ``L = d_max sqrt(D) / eps0``. Everything is evaluated in log space and
the probability is clamped to [0, 1].
"""
from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class BoundInputs:
    n: int
    p: int
    gamma: float
    epsilon0: float
    R: float
    d_max: int
    D_max: int

    def __post_init__(self):
        if self.n < 1 or self.p < 1:
            raise ValueError("n and p must be >= 1")
        if self.gamma <= 0 or self.R <= 0:
            raise ValueError("gamma and R must be > 0")
        if not 0.0 < self.epsilon0 < 1.0:
            raise ValueError("epsilon0 must lie in (0, 1)")
        if self.d_max < 2 or self.D_max < 1:
            raise ValueError("need d_max >= 2 and D_max >= 1")

    @property
    def L(self) -> float:
        return self.d_max * math.sqrt(self.D_max) / self.epsilon0

    @classmethod
    def from_dims(cls, n: int, dims, gamma: float, epsilon0: float, R: float) -> "BoundInputs":
        """Derive ``p``, ``d_max`` and ``D_max = max_{j != k} (1 + d_j + d_j d_k)`` from node dimensions."""
        dims = [int(d) for d in dims]
        if len(dims) >= 2:
            D = max(1 + dj + dj * dk for j, dj in enumerate(dims) for k, dk in enumerate(dims) if j != k)
        else:
            D = 1 + dims[0] + dims[0] ** 2
        return cls(n, len(dims), gamma, epsilon0, R, max(dims), D)


def _log_prefactor(inp) -> float:
    return math.log(4 * (inp.p**2 + inp.p)) + inp.D_max * math.log(24 * inp.R * inp.L / inp.gamma)


def _rate(inp) -> float:
    return inp.gamma**2 / (32 * math.log(1 / inp.epsilon0) ** 2)


def log_recovery_bound(inp: BoundInputs) -> float:
    """Natural log of the unclamped bound."""
    return _log_prefactor(inp) - inp.n * _rate(inp)


def recovery_bound(inp: BoundInputs) -> float:
    lb = log_recovery_bound(inp)
    return 1.0 if lb >= 0.0 else math.exp(lb)


def sample_complexity_real(inp: BoundInputs, delta: float) -> float:
    """Unrounded sample size at which the bound reaches ``delta``."""
    if not 0.0 < delta <= 1.0:
        raise ValueError("delta must lie in (0, 1]")
    lead = 32 * math.log(1 / inp.epsilon0) ** 2 / inp.gamma**2
    return lead * (
        inp.D_max * math.log(24 * inp.R * inp.L / inp.gamma)
        + math.log(4 * (inp.p**2 + inp.p) / delta)
    )


def sample_complexity(inp: BoundInputs, delta: float) -> int:
    """Smallest integer ``n >= 1`` for which the bound is at most ``delta``.

    ``inp.n`` is ignored.
    """
    n = max(1, math.ceil(sample_complexity_real(inp, delta)))
    # guard against the last-ulp rounding of the closed form
    while log_recovery_bound(_with_n(inp, n)) > math.log(delta):
        n += 1
    while n > 1 and log_recovery_bound(_with_n(inp, n - 1)) <= math.log(delta):
        n -= 1
    return n


def _with_n(inp: BoundInputs, n: int) -> BoundInputs:
    return BoundInputs(n, inp.p, inp.gamma, inp.epsilon0, inp.R, inp.d_max, inp.D_max)
