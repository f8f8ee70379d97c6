"""Exact Dice optimizers for a marginal map, extremal-volume marginals and a brute-force oracle.

For a marginal m the best hard segmentation keeps every cell with m above
tau = sup Dice / 2 and drops every cell below it; cells with m == tau may go
either way.  Only the super-level sets {m >= t} for t among the cell values
need to be scanned to find the supremum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidFraction, SolutionMismatch, TooLarge
from .grid import HardSegmentation, MarginalMap, l1_norm, threshold
from .metrics import dice

MIN_VOLUME = "min_volume"
MAX_VOLUME = "max_volume"
MIN_ATTAINER = "min_attainer"
MAX_ATTAINER = "max_attainer"

BRUTE_FORCE_MAX_N = 20
ATTAIN_TOL = 1e-12
# Relative slack for treating two candidate thresholds as tied during the scan.
_SCAN_TIE_RTOL = 8 * np.finfo(float).eps


def tie_tolerance(tau: float) -> float:
    return 1e-9 * max(1.0, tau)


@dataclass(frozen=True)
class OptimalDiceSolution:
    sup_dice: float
    tau: float
    below_mass: float
    tie_mass: float
    above_mass: float
    argmax_threshold_value: float
    degenerate: bool = False
    dims: tuple[int, ...] = field(default=(), compare=False)

    @property
    def tie_tol(self) -> float:
        return tie_tolerance(self.tau)


def solve_optimal_dice(m: MarginalMap) -> OptimalDiceSolution:
    x = m.cells
    n = x.size
    total = float(np.sum(x))
    if total == 0.0:
        # every segmentation scores 0; all of them are optimal
        zeros = np.count_nonzero(x == 0.0) / n
        return OptimalDiceSolution(0.0, 0.0, 0.0, zeros, 1.0 - zeros, 0.0, True, m.dims)

    vals = np.sort(x)[::-1]
    prefix = np.cumsum(vals)
    # last position of every run of equal values = super-level set {m >= t}
    run_end = np.append(vals[1:] != vals[:-1], True)
    t = vals[run_end]
    counts = np.arange(1, n + 1, dtype=np.float64)[run_end]
    scores = 2.0 * prefix[run_end] / (counts + total)

    best = float(scores.max())
    # smallest t among (numerically) tied maxima -> largest optimizer
    idx = np.flatnonzero(scores >= best * (1.0 - _SCAN_TIE_RTOL))[-1]
    tau = best / 2.0
    tol = tie_tolerance(tau)
    return OptimalDiceSolution(
        sup_dice=best,
        tau=tau,
        below_mass=np.count_nonzero(x < tau - tol) / n,
        tie_mass=np.count_nonzero(np.abs(x - tau) <= tol) / n,
        above_mass=np.count_nonzero(x > tau + tol) / n,
        argmax_threshold_value=float(t[idx]),
        dims=m.dims,
    )


def optimal_segmentation(sol: OptimalDiceSolution, m: MarginalMap, mode: str = MAX_VOLUME) -> HardSegmentation:
    """Smallest (``min_volume``) or largest (``max_volume``) Dice-optimal segmentation."""
    tol = sol.tie_tol
    if mode == MIN_VOLUME:
        mask = m.cells > sol.tau + tol
    elif mode == MAX_VOLUME:
        mask = m.cells >= sol.tau - tol
    else:
        raise ValueError(f"unknown mode {mode!r}")
    s = HardSegmentation(m.dims, mask.astype(np.float64))
    got = dice(m, s)
    # moving a cell with |m_i - tau| <= tol shifts Dice by at most 2 tol / N / (|s|_1 + |m|_1)
    mass = l1_norm(m)
    slack = ATTAIN_TOL + (2.0 * tol * sol.tie_mass / mass if mass > 0 else 0.0)
    if abs(got - sol.sup_dice) > slack:
        raise SolutionMismatch(f"dice {got!r} != sup {sol.sup_dice!r}; solution was computed for another marginal")
    return s


def construct_extremal(v: float, which: str, dims) -> tuple[MarginalMap, float]:
    """Marginal of mass ~``v`` whose optimizer volume hits an end of [v**2, 1].

    ``max_attainer`` is the constant map v.  ``min_attainer`` puts value 1 on
    k = round(v**2 N) cells and u/(1+u) elsewhere, u = sqrt(k/N); then the
    complement sits exactly on the tie level, ``||m||_1 = u`` and the smallest
    optimizer is the k-cell block.  Returns the map and the realized mass u.
    """
    if not 0.0 < v <= 1.0:
        raise InvalidFraction(f"v must lie in (0, 1], got {v}")
    dims = tuple(dims)
    n = int(np.prod(dims))
    if which == MAX_ATTAINER:
        return MarginalMap.full(dims, v), float(v)
    if which != MIN_ATTAINER:
        raise ValueError(f"unknown attainer {which!r}")
    k = min(n, max(1, math.floor(v * v * n + 0.5)))
    u = math.sqrt(k / n)
    cells = np.full(n, u / (1.0 + u))
    cells[:k] = 1.0
    return MarginalMap(dims, cells), u


@dataclass(frozen=True)
class BruteForceResult:
    sup_dice: float
    optimizers: list[int]
    n: int

    def segmentation(self, bitmask: int, dims=None) -> HardSegmentation:
        bits = (bitmask >> np.arange(self.n)) & 1
        return HardSegmentation(dims or (self.n,), bits.astype(np.float64))


def bitmask_of(s: HardSegmentation) -> int:
    return int(sum(1 << i for i in np.flatnonzero(s.cells)))


def brute_force_optimal(m: MarginalMap, chunk: int = 1 << 15) -> BruteForceResult:
    """Score all 2**N hard segmentations; bit i of a mask is cell i (row-major)."""
    x = m.cells
    n = x.size
    if n > BRUTE_FORCE_MAX_N:
        raise TooLarge(f"brute force limited to N <= {BRUTE_FORCE_MAX_N}, got {n}")
    total = float(np.sum(x))
    shifts = np.arange(n, dtype=np.int64)
    scores = np.empty(1 << n)
    for start in range(0, 1 << n, chunk):
        ids = np.arange(start, min(start + chunk, 1 << n), dtype=np.int64)
        bits = ((ids[:, None] >> shifts) & 1).astype(np.float64)
        inter = bits @ x
        denom = bits.sum(axis=1) + total
        scores[start : start + ids.size] = np.where(denom > 0, 2.0 * inter / np.where(denom > 0, denom, 1.0), 0.0)
    best = float(scores.max())
    attained = np.flatnonzero(scores >= best - ATTAIN_TOL)
    return BruteForceResult(best, [int(i) for i in attained], n)


@dataclass(frozen=True)
class VolumeReport:
    m_volume: float
    lower_bound: float
    vol_min: float
    vol_max: float
    ce_volume: float
    bounds_ok: bool
    ordering_ok: bool

    @property
    def ok(self) -> bool:
        return self.bounds_ok and self.ordering_ok


def volume_bounds_check(m: MarginalMap) -> VolumeReport:
    """Optimizer volumes against [||m||_1**2, 1] and against the 1/2-thresholded marginal."""
    sol = solve_optimal_dice(m)
    vol_min = l1_norm(optimal_segmentation(sol, m, MIN_VOLUME))
    vol_max = l1_norm(optimal_segmentation(sol, m, MAX_VOLUME))
    ce_volume = l1_norm(threshold(m, 0.5))
    mv = l1_norm(m)
    lower = mv * mv - 1.0 / m.n
    return VolumeReport(
        m_volume=mv,
        lower_bound=lower,
        vol_min=vol_min,
        vol_max=vol_max,
        ce_volume=ce_volume,
        bounds_ok=lower <= vol_min <= vol_max <= 1.0,
        ordering_ok=ce_volume <= vol_min,
    )
