"""Dense grids with uniform cell measure 1/N, their I/O and a reproducible RNG.

Every grid lives on a domain of total measure one, so an L1 norm is a plain
cell average.  Reductions go through ``np.sum`` on the flat row-major array,
which is deterministic for a given array and numpy build.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyStack,
    IoFailure,
    MalformedHeader,
    ThresholdOutOfRange,
    ValueOutOfRange,
)

MAGIC = b"DGRD"
FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class Grid:
    dims: tuple[int, ...]
    cells: np.ndarray

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d <= 0 for d in dims):
            raise DimensionMismatch(f"extents must be positive, got {self.dims}")
        cells = np.array(self.cells, dtype=np.float64).reshape(-1)
        if cells.size != int(np.prod(dims)):
            raise DimensionMismatch(f"{cells.size} cells do not fill dims {dims}")
        if not np.all(np.isfinite(cells)):
            raise ValueOutOfRange("grid cells must be finite")
        cells.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "cells", cells)
        self._check()

    def _check(self):
        pass

    @classmethod
    def from_array(cls, values) -> "Grid":
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        return cls(arr.shape, arr.ravel())

    @classmethod
    def full(cls, dims, value: float) -> "Grid":
        dims = tuple(dims)
        return cls(dims, np.full(int(np.prod(dims)), float(value)))

    def as_role(self, role: type["Grid"]) -> "Grid":
        """Re-wrap the same cells as ``role``, validating its value constraints."""
        return role(self.dims, self.cells)

    @property
    def n(self) -> int:
        return self.cells.size

    @property
    def array(self) -> np.ndarray:
        return self.cells.reshape(self.dims)

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return self.dims == other.dims and np.array_equal(self.cells, other.cells)

    def __hash__(self):
        return hash((self.dims, self.cells.tobytes()))

    def __repr__(self):
        return f"{type(self).__name__}(dims={self.dims})"


class MarginalMap(Grid):
    """Values in [0, 1]: a marginal m or a soft segmentation c."""

    def _check(self):
        if self.cells.size and (self.cells.min() < 0.0 or self.cells.max() > 1.0):
            raise ValueOutOfRange("marginal values must lie in [0, 1]")


class HardSegmentation(MarginalMap):
    def _check(self):
        if not np.all((self.cells == 0.0) | (self.cells == 1.0)):
            raise ValueOutOfRange("hard segmentation cells must be exactly 0 or 1")


class LogitField(Grid):
    pass


def check_same_dims(a: Grid, b: Grid):
    if a.dims != b.dims:
        raise DimensionMismatch(f"dims differ: {a.dims} vs {b.dims}")


def l1_norm(g: Grid) -> float:
    return float(np.sum(np.abs(g.cells)) / g.n)


def l1_distance(a: Grid, b: Grid) -> float:
    check_same_dims(a, b)
    return float(np.sum(np.abs(a.cells - b.cells)) / a.n)


def threshold(c: Grid, a: float, strict: bool = False) -> HardSegmentation:
    """Indicator of ``c >= a`` (or ``c > a`` when ``strict``)."""
    if not 0.0 < a < 1.0:
        raise ThresholdOutOfRange(f"threshold must lie in (0, 1), got {a}")
    mask = c.cells > a if strict else c.cells >= a
    return HardSegmentation(c.dims, mask.astype(np.float64))


def average_masks(masks: Sequence[Grid]) -> MarginalMap:
    """Cell-wise mean of rater masks, i.e. the empirical marginal."""
    if len(masks) == 0:
        raise EmptyStack("need at least one mask")
    dims = masks[0].dims
    acc = np.zeros(masks[0].n)
    for s in masks:
        if s.dims != dims:
            raise DimensionMismatch(f"dims differ: {dims} vs {s.dims}")
        acc += s.cells
    return MarginalMap(dims, np.clip(acc / len(masks), 0.0, 1.0))


class Rng:
    """Counter-based generator (Philox-4x64 keyed by ``seed``).

    Uniforms are Philox doubles in [0, 1).  Normals use the cosine branch of
    Box-Muller, consuming two uniforms per variate.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._gen = np.random.Generator(np.random.Philox(key=self.seed))

    def uniform(self, size) -> np.ndarray:
        return self._gen.random(size)

    def normal(self, size) -> np.ndarray:
        n = int(np.prod(size))
        u = self._gen.random(2 * n)
        u1 = 1.0 - u[:n]
        u2 = u[n:]
        z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
        return z.reshape(size)


def parse_dims(text: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(t) for t in text.lower().split("x"))
    except ValueError as exc:
        raise MalformedHeader(f"bad dims {text!r}") from exc
    if not dims or any(d <= 0 for d in dims):
        raise MalformedHeader(f"bad dims {text!r}")
    return dims


def format_dims(dims) -> str:
    return "x".join(str(d) for d in dims)


def write_grid(g: Grid, path) -> None:
    """Write ``g`` as DGRD binary, or as CSV when ``path`` ends in ``.csv``."""
    path = Path(path)
    try:
        if path.suffix.lower() == ".csv":
            if len(g.dims) != 2:
                raise DimensionMismatch("CSV grids must be 2D")
            lines = [f"dims={format_dims(g.dims)}"]
            lines += [",".join(repr(float(v)) for v in row) for row in g.array]
            path.write_text("\n".join(lines) + "\n")
        else:
            header = MAGIC + struct.pack("<BB", FORMAT_VERSION, len(g.dims))
            header += struct.pack(f"<{len(g.dims)}I", *g.dims)
            path.write_bytes(header + g.cells.astype("<f8").tobytes())
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def read_grid(path, role: type[Grid] = Grid) -> Grid:
    """Read a grid written by :func:`write_grid`; ``role`` validates value ranges."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    if path.suffix.lower() == ".csv":
        dims, cells = _parse_csv(raw.decode())
    else:
        dims, cells = _parse_binary(raw)
    g = Grid(dims, cells)
    return g if role is Grid else g.as_role(role)


def _parse_binary(raw: bytes):
    if len(raw) < 6 or raw[:4] != MAGIC:
        raise MalformedHeader("missing DGRD magic")
    version, ndim = struct.unpack_from("<BB", raw, 4)
    if version != FORMAT_VERSION:
        raise MalformedHeader(f"unsupported version {version}")
    if ndim == 0:
        raise MalformedHeader("zero dimensions")
    off = 6 + 4 * ndim
    if len(raw) < off:
        raise MalformedHeader("truncated extents")
    dims = struct.unpack_from(f"<{ndim}I", raw, 6)
    n = int(np.prod(dims, dtype=np.int64))
    if 0 in dims or len(raw) - off != 8 * n:
        raise MalformedHeader(f"cell payload does not match dims {dims}")
    return dims, np.frombuffer(raw, dtype="<f8", offset=off).astype(np.float64)


def _parse_csv(text: str):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("dims="):
        raise MalformedHeader("CSV grid must start with a dims= line")
    dims = parse_dims(lines[0][5:])
    if len(dims) != 2:
        raise MalformedHeader("CSV grids must be 2D")
    try:
        rows = [[float(v) for v in ln.split(",")] for ln in lines[1:]]
    except ValueError as exc:
        raise MalformedHeader(str(exc)) from exc
    if len(rows) != dims[0] or any(len(r) != dims[1] for r in rows):
        raise MalformedHeader(f"CSV body does not match dims {dims}")
    return dims, np.array(rows, dtype=np.float64).ravel()
