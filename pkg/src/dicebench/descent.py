"""Full-batch gradient descent on soft-Dice over sigmoid logits, plus a cross-entropy baseline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import DimensionMismatch
from .grid import Grid, HardSegmentation, LogitField, MarginalMap, Rng, check_same_dims, threshold
from .metrics import ErrorPair, error_pair, soft_dice

DEFAULT_RECORD = (1, 10, 20, 100, 200)
# With step (factor * N) * (sigma - m) / N the per-cell map contracts only for factor < 8.
CE_DEFAULT_FACTOR = 4.0


@dataclass(frozen=True)
class DescentConfig:
    learning_rate_factor: float = 10.0
    iterations: int = 200
    record_at: tuple[int, ...] = DEFAULT_RECORD
    seed: int = 0

    def __post_init__(self):
        rec = tuple(int(r) for r in self.record_at)
        object.__setattr__(self, "record_at", rec)
        if self.learning_rate_factor <= 0:
            raise ValueError("learning_rate_factor must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if list(rec) != sorted(set(rec)) or (rec and (rec[0] < 1 or rec[-1] > self.iterations)):
            raise ValueError(f"record_at must be increasing within [1, {self.iterations}], got {rec}")


@dataclass
class DescentTrace:
    errors: list[ErrorPair]
    losses: list[float]
    final_logits: LogitField
    snapshots: dict[int, MarginalMap] = field(default_factory=dict)

    @property
    def iterations(self) -> list[int]:
        return [e.iteration for e in self.errors]


def init_logits(dims, rng: Rng) -> LogitField:
    dims = tuple(dims)
    return LogitField(dims, rng.normal(int(np.prod(dims))))


def _soft_dice_grad_cells(m: np.ndarray, f: np.ndarray) -> np.ndarray:
    n = m.size
    p = expit(f)
    a = (np.sum(p) + np.sum(m)) / n
    overlap = np.sum(p * m) / n
    return p * expit(-f) * (2.0 * m * a - 2.0 * overlap) / (n * a * a)


def soft_dice_gradient(m: MarginalMap, f: LogitField) -> Grid:
    """Gradient of the soft Dice overlap 2<σ(f), m> / (|σ(f)|_1 + |m|_1) in f.

    The soft-Dice loss gradient is its negation.
    """
    check_same_dims(m, f)
    return Grid(f.dims, _soft_dice_grad_cells(m.cells, f.cells))


def run_descent(
    m: MarginalMap,
    cfg: DescentConfig,
    s_star: HardSegmentation,
    snapshot: bool = False,
    init: LogitField | None = None,
) -> DescentTrace:
    """Minimize soft-Dice from a standard-normal start; iterate l = 1 is the start itself."""
    check_same_dims(m, s_star)
    f = init_logits(m.dims, Rng(cfg.seed)) if init is None else init
    check_same_dims(m, f)
    step = cfg.learning_rate_factor * m.n
    return _iterate(m, f, cfg, s_star, snapshot, lambda x: x + step * _soft_dice_grad_cells(m.cells, x))


def run_ce_descent(
    m: MarginalMap,
    cfg: DescentConfig,
    snapshot: bool = False,
    init: LogitField | None = None,
) -> DescentTrace:
    """Gradient descent on mean binary cross-entropy; errors are taken against I{m >= 1/2}."""
    f = init_logits(m.dims, Rng(cfg.seed)) if init is None else init
    check_same_dims(m, f)
    target = threshold(m, 0.5)
    factor = cfg.learning_rate_factor
    return _iterate(m, f, cfg, target, snapshot, lambda x: x - factor * (expit(x) - m.cells))


def _iterate(m, f, cfg, target, snapshot, update) -> DescentTrace:
    if m.dims != target.dims:
        raise DimensionMismatch(f"dims differ: {m.dims} vs {target.dims}")
    x = np.array(f.cells, dtype=np.float64)
    record = set(cfg.record_at)
    errors, losses, snaps = [], [], {}
    for it in range(1, cfg.iterations + 1):
        if it > 1:
            x = update(x)
        if it in record:
            logits = LogitField(m.dims, x)
            c = MarginalMap(m.dims, expit(x))
            errors.append(error_pair(logits, target, it))
            losses.append(soft_dice(m, c))
            if snapshot:
                snaps[it] = c
    return DescentTrace(errors, losses, LogitField(m.dims, x), snaps)
