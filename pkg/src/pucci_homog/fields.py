"""Coefficient patterns: checkerboards, stripes, random media, smooth fields.

Patterns are defined on a coarse cells_per_side x cells_per_side tiling of the
torus and sampled pointwise onto a TorusGrid, so coefficient values are
cell-constant (the discontinuity is the data's, the scheme deals with it).
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np

from .errors import ConfigurationError
from .grid import GridFunction, TorusGrid

# Recorded in run metadata; random fields are reproducible given a seed and
# this generator.
RNG_ALGORITHM = "numpy.random.PCG64"


class PatternKind(str, Enum):
    CONSTANT = "constant"
    CHECKERBOARD = "checkerboard"
    STRIPES = "stripes"
    RANDOM_CHECKERBOARD = "random_checkerboard"
    SMOOTH_COSINE = "smooth_cosine"
    UNIFORM_RANDOM = "uniform_random"


@dataclass(frozen=True)
class PatternSpec:
    """Recipe for one coefficient field.

    low/high are the two cell values (the classic setup is low=1, high=r);
    scale multiplies the sampled field, which is how a pair like
    (a, A) = (a0, 3*a0) is built from one underlying pattern.
    """

    kind: PatternKind
    cells_per_side: int = 20
    low: float = 1.0
    high: float = 2.0
    orientation: str = "vertical"
    p: float = 0.5
    seed: int = 0
    mean: float = 2.5
    amplitude: float = 0.5
    scale: float = 1.0

    @staticmethod
    def constant(value: float) -> "PatternSpec":
        return PatternSpec(PatternKind.CONSTANT, low=value, high=value)

    @staticmethod
    def checkerboard(r: float = 2.0, cells: int = 20, low: float = 1.0, scale: float = 1.0) -> "PatternSpec":
        return PatternSpec(PatternKind.CHECKERBOARD, cells_per_side=cells, low=low, high=low * r, scale=scale)

    @staticmethod
    def stripes(r: float = 2.0, orientation: str = "vertical", cells: int = 20, low: float = 1.0, scale: float = 1.0) -> "PatternSpec":
        if orientation not in ("vertical", "horizontal"):
            raise ConfigurationError(f"unknown stripe orientation {orientation!r}")
        return PatternSpec(
            PatternKind.STRIPES, cells_per_side=cells, low=low, high=low * r,
            orientation=orientation, scale=scale,
        )

    @staticmethod
    def random_checkerboard(p: float = 0.5, seed: int = 0, r: float = 2.0, cells: int = 20, low: float = 1.0, scale: float = 1.0) -> "PatternSpec":
        if not 0.0 <= p <= 1.0:
            raise ConfigurationError(f"probability must be in [0, 1], got {p}")
        return PatternSpec(
            PatternKind.RANDOM_CHECKERBOARD, cells_per_side=cells, low=low, high=low * r,
            p=p, seed=seed, scale=scale,
        )

    @staticmethod
    def smooth_cosine(mean: float = 2.5, amplitude: float = 0.5, scale: float = 1.0) -> "PatternSpec":
        return PatternSpec(PatternKind.SMOOTH_COSINE, mean=mean, amplitude=amplitude, scale=scale)

    @staticmethod
    def uniform_random(lo: float, hi: float, seed: int = 0, cells: int = 20, scale: float = 1.0) -> "PatternSpec":
        if not 0.0 < lo <= hi:
            raise ConfigurationError(f"uniform range must satisfy 0 < lo <= hi, got [{lo}, {hi}]")
        return PatternSpec(PatternKind.UNIFORM_RANDOM, cells_per_side=cells, low=lo, high=hi, seed=seed, scale=scale)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d

    @staticmethod
    def from_dict(d: dict) -> "PatternSpec":
        d = dict(d)
        d["kind"] = PatternKind(d["kind"])
        return PatternSpec(**d)


def _cell_index(n: int, cells: int) -> np.ndarray:
    if n % cells != 0:
        raise ConfigurationError(
            f"grid n={n} is not divisible by cells_per_side={cells}"
        )
    return np.arange(n) // (n // cells)


def sample(pattern: PatternSpec, grid: TorusGrid) -> GridFunction:
    """Sample a pattern onto the grid.  Random kinds draw their cell colors
    from a seeded generator in row-major cell order; the same seed reproduces
    the identical field."""
    n = grid.n
    if pattern.kind is PatternKind.CONSTANT:
        vals = np.full((n, n), pattern.low)
    elif pattern.kind is PatternKind.CHECKERBOARD:
        ci = _cell_index(n, pattern.cells_per_side)
        parity = (ci[:, None] + ci[None, :]) % 2
        vals = np.where(parity == 0, pattern.low, pattern.high)
    elif pattern.kind is PatternKind.STRIPES:
        ci = _cell_index(n, pattern.cells_per_side)
        parity = ci % 2
        stripe = np.where(parity == 0, pattern.low, pattern.high)
        # Vertical stripes vary with x (axis 0), horizontal with y (axis 1).
        if pattern.orientation == "vertical":
            vals = np.broadcast_to(stripe[:, None], (n, n)).copy()
        else:
            vals = np.broadcast_to(stripe[None, :], (n, n)).copy()
    elif pattern.kind is PatternKind.RANDOM_CHECKERBOARD:
        ci = _cell_index(n, pattern.cells_per_side)
        rng = np.random.default_rng(pattern.seed)
        c = pattern.cells_per_side
        colors = rng.random((c, c)) < pattern.p
        cell_vals = np.where(colors, pattern.high, pattern.low)
        vals = cell_vals[np.ix_(ci, ci)]
    elif pattern.kind is PatternKind.SMOOTH_COSINE:
        x, y = grid.coords()
        vals = pattern.mean + pattern.amplitude * np.cos(2 * np.pi * x) * np.cos(2 * np.pi * y)
    elif pattern.kind is PatternKind.UNIFORM_RANDOM:
        ci = _cell_index(n, pattern.cells_per_side)
        rng = np.random.default_rng(pattern.seed)
        c = pattern.cells_per_side
        cell_vals = rng.uniform(pattern.low, pattern.high, size=(c, c))
        vals = cell_vals[np.ix_(ci, ci)]
    else:  # pragma: no cover
        raise ConfigurationError(f"unknown pattern kind {pattern.kind}")
    vals = pattern.scale * np.asarray(vals, dtype=float)
    if vals.min() <= 0.0:
        raise ConfigurationError("sampled coefficient field is not strictly positive")
    return GridFunction(grid, vals)


def harmonic_mean(f) -> float:
    """(integral of 1/f)^-1 over the unit torus."""
    vals = f.values if isinstance(f, GridFunction) else np.asarray(f, dtype=float)
    if vals.min() <= 0.0:
        raise ValueError("harmonic mean requires a strictly positive field")
    return float(1.0 / np.mean(1.0 / vals))


@dataclass(frozen=True)
class CoefficientField:
    """Per-grid-point operator coefficients.

    Which arrays are populated depends on the operator family: Pucci-type
    pairs use (a, A); the eigenvalue-weighted family uses (a1, a2); the
    linear and Monge-Ampere-type families use a alone.
    """

    grid: TorusGrid
    a: np.ndarray | None = None
    A: np.ndarray | None = None
    a1: np.ndarray | None = None
    a2: np.ndarray | None = None
    delta: float = 1e-6

    def __post_init__(self) -> None:
        for name in ("a", "A", "a1", "a2"):
            arr = getattr(self, name)
            if arr is None:
                continue
            arr = np.ascontiguousarray(arr, dtype=float)
            if arr.shape != (self.grid.n, self.grid.n):
                raise ConfigurationError(
                    f"coefficient {name} has shape {arr.shape}, expected {(self.grid.n,) * 2}"
                )
            if arr.min() < self.delta:
                raise ConfigurationError(
                    f"coefficient {name} violates uniform ellipticity: "
                    f"min {arr.min():g} < delta {self.delta:g}"
                )
            object.__setattr__(self, name, arr)
        if self.a is not None and self.A is not None and np.any(self.A < self.a):
            raise ConfigurationError("pair coefficients require A(y) >= a(y) everywhere")

    @staticmethod
    def _as_values(grid: TorusGrid, v) -> np.ndarray:
        if isinstance(v, GridFunction):
            return v.values
        if np.isscalar(v):
            return np.full((grid.n, grid.n), float(v))
        return np.asarray(v, dtype=float)

    @classmethod
    def single(cls, grid: TorusGrid, a, delta: float = 1e-6) -> "CoefficientField":
        return cls(grid, a=cls._as_values(grid, a), delta=delta)

    @classmethod
    def pair(cls, grid: TorusGrid, a, A, delta: float = 1e-6) -> "CoefficientField":
        return cls(grid, a=cls._as_values(grid, a), A=cls._as_values(grid, A), delta=delta)

    @classmethod
    def eigen_weights(cls, grid: TorusGrid, a1, a2, delta: float = 1e-6) -> "CoefficientField":
        return cls(grid, a1=cls._as_values(grid, a1), a2=cls._as_values(grid, a2), delta=delta)


def field_to_csv(f: GridFunction, path) -> None:
    """Dump a field as (x, y, value) rows for inspection or plotting."""
    x, y = f.grid.coords()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "value"])
        for i in range(f.grid.n):
            for j in range(f.grid.n):
                writer.writerow([f"{x[i, j]:.12g}", f"{y[i, j]:.12g}", f"{f.values[i, j]:.12g}"])
