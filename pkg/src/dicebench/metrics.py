"""Dice, soft-Dice, cross-entropy and the convergence error metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .grid import (
    Grid,
    HardSegmentation,
    LogitField,
    MarginalMap,
    check_same_dims,
    l1_distance,
    threshold,
)

CE_EPS = 1e-12


@dataclass(frozen=True)
class ErrorPair:
    e0: float
    e1: float
    iteration: int


def _overlap_ratio(m: Grid, c: Grid) -> float:
    # 2 <c, m> / (|c|_1 + |m|_1), with 0/0 := 0; the 1/N factors cancel.
    check_same_dims(m, c)
    denom = np.sum(c.cells) + np.sum(m.cells)
    if denom == 0.0:
        return 0.0
    return float(2.0 * np.sum(c.cells * m.cells) / denom)


def dice(m: MarginalMap, s: HardSegmentation) -> float:
    return _overlap_ratio(m, s)


def soft_dice_extension(m: MarginalMap, c: MarginalMap) -> float:
    """Dice extended to soft predictions ``c``; agrees with :func:`dice` on hard ``c``."""
    return _overlap_ratio(m, c)


def soft_dice(m: MarginalMap, c: MarginalMap) -> float:
    return 1.0 - _overlap_ratio(m, c)


def cross_entropy(m: MarginalMap, c: MarginalMap) -> float:
    check_same_dims(m, c)
    p = np.clip(c.cells, CE_EPS, 1.0 - CE_EPS)
    mm = m.cells
    return float(np.sum(-(mm * np.log(p) + (1.0 - mm) * np.log1p(-p))) / m.n)


def sigmoid(f: LogitField) -> MarginalMap:
    return MarginalMap(f.dims, expit(f.cells))


def error_pair(f: LogitField, s_star: HardSegmentation, iteration: int) -> ErrorPair:
    check_same_dims(f, s_star)
    c = sigmoid(f)
    e0 = l1_distance(c, s_star)
    e1 = l1_distance(threshold(c, 0.5), s_star)
    return ErrorPair(e0, e1, int(iteration))
