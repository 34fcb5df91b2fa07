"""Torus geometry, periodic grid fields, and 2x2 symmetric matrix algebra.

Fields live on the unit torus [0,1)^2 sampled on an n-by-n grid with spacing
h = 1/n.  values[i, j] is the sample at (x, y) = (i*h, j*h); all stencils wrap
periodically in both axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Minimal direction set that resolves both axes and both diagonals; the
# monotone scheme and the generator decomposition default to it.
DEFAULT_DIRECTIONS: tuple[tuple[int, int], ...] = ((1, 0), (0, 1), (1, 1), (1, -1))

# Below this discriminant the eigenvalues are treated as repeated and the
# axis-aligned tie-break applies.
REPEATED_EIG_TOL = 1e-14


@dataclass(frozen=True)
class Sym2:
    """Symmetric 2x2 matrix stored as its three independent entries."""

    a11: float
    a12: float
    a22: float

    @staticmethod
    def diag(l1: float, l2: float) -> "Sym2":
        return Sym2(float(l1), 0.0, float(l2))

    @staticmethod
    def identity() -> "Sym2":
        return Sym2(1.0, 0.0, 1.0)

    @staticmethod
    def from_array(m: np.ndarray) -> "Sym2":
        m = np.asarray(m, dtype=float)
        if m.shape != (2, 2):
            raise ValueError(f"expected a 2x2 array, got shape {m.shape}")
        # Symmetrize so tiny float asymmetries from rotations do not leak in.
        return Sym2(float(m[0, 0]), float(0.5 * (m[0, 1] + m[1, 0])), float(m[1, 1]))

    def as_array(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a12, self.a22]])

    @property
    def trace(self) -> float:
        return self.a11 + self.a22

    @property
    def det(self) -> float:
        return self.a11 * self.a22 - self.a12 * self.a12

    def norm(self) -> float:
        """Frobenius norm."""
        return math.sqrt(self.a11**2 + 2.0 * self.a12**2 + self.a22**2)

    def dot(self, other: "Sym2") -> float:
        """Frobenius inner product A:B."""
        return self.a11 * other.a11 + 2.0 * self.a12 * other.a12 + self.a22 * other.a22

    def eigenvalues(self) -> tuple[float, float]:
        """(lambda_min, lambda_max) in closed form."""
        mean = 0.5 * (self.a11 + self.a22)
        disc = math.hypot(0.5 * (self.a11 - self.a22), self.a12)
        return mean - disc, mean + disc

    def rotated(self, theta: float) -> "Sym2":
        """Conjugation R^T Q R by the rotation of angle theta (same spectrum)."""
        c, s = math.cos(theta), math.sin(theta)
        r = np.array([[c, -s], [s, c]])
        return Sym2.from_array(r.T @ self.as_array() @ r)

    def __add__(self, other: "Sym2") -> "Sym2":
        return Sym2(self.a11 + other.a11, self.a12 + other.a12, self.a22 + other.a22)

    def __sub__(self, other: "Sym2") -> "Sym2":
        return Sym2(self.a11 - other.a11, self.a12 - other.a12, self.a22 - other.a22)

    def __mul__(self, t: float) -> "Sym2":
        return Sym2(self.a11 * t, self.a12 * t, self.a22 * t)

    __rmul__ = __mul__


@dataclass(frozen=True)
class EigenFrame:
    """Spectral decomposition of a Sym2: eigenvalues with unit eigenvectors."""

    lambda_min: float
    lambda_max: float
    v_min: np.ndarray
    v_max: np.ndarray

    def reconstruct(self) -> Sym2:
        m = self.lambda_min * np.outer(self.v_min, self.v_min) + self.lambda_max * np.outer(
            self.v_max, self.v_max
        )
        return Sym2.from_array(m)


def eigen_decompose(q: Sym2) -> EigenFrame:
    """Closed-form spectral decomposition of a symmetric 2x2 matrix.

    For a repeated eigenvalue (discriminant below REPEATED_EIG_TOL) the
    eigenvectors are fixed to the coordinate axes so downstream
    linearizations are deterministic on the singular set.
    """
    mean = 0.5 * (q.a11 + q.a22)
    half_diff = 0.5 * (q.a11 - q.a22)
    disc = math.hypot(half_diff, q.a12)
    lam_min, lam_max = mean - disc, mean + disc
    if disc < REPEATED_EIG_TOL:
        return EigenFrame(lam_min, lam_max, np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    # Two candidate eigenvector formulas; pick the better-conditioned one.
    cand_a = np.array([q.a12, lam_max - q.a11])
    cand_b = np.array([lam_max - q.a22, q.a12])
    v_max = cand_a if cand_a @ cand_a >= cand_b @ cand_b else cand_b
    v_max = v_max / math.sqrt(v_max @ v_max)
    v_min = np.array([-v_max[1], v_max[0]])
    return EigenFrame(lam_min, lam_max, v_min, v_max)


@dataclass(frozen=True)
class TorusGrid:
    """Uniform n-by-n grid on the unit torus, spacing h = 1/n."""

    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"grid size must be positive, got n={self.n}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid arrays (x, y), each of shape (n, n), x varying along axis 0."""
        pts = np.arange(self.n) * self.h
        return np.meshgrid(pts, pts, indexing="ij")


@dataclass(frozen=True)
class GridFunction:
    """Periodic scalar field sampled on a TorusGrid."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.ascontiguousarray(self.values, dtype=float)
        if values.shape != (self.grid.n, self.grid.n):
            raise ValueError(
                f"values shape {values.shape} does not match grid n={self.grid.n}"
            )
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: TorusGrid) -> "GridFunction":
        return cls(grid, np.zeros((grid.n, grid.n)))

    @classmethod
    def sample(cls, grid: TorusGrid, fn) -> "GridFunction":
        x, y = grid.coords()
        return cls(grid, np.asarray(fn(x, y), dtype=float))

    def mean(self) -> float:
        """h^2 * sum(values), the integral over the unit torus."""
        return float(self.values.mean())

    def subtract_mean(self) -> "GridFunction":
        return GridFunction(self.grid, self.values - self.values.mean())

    def shifted(self, di: int, dj: int) -> "GridFunction":
        """Translate by (di, dj) grid points, wrapping periodically."""
        return GridFunction(self.grid, np.roll(self.values, (di, dj), axis=(0, 1)))


@dataclass(frozen=True)
class Sym2Field:
    """Symmetric-matrix-valued field stored entrywise (struct of arrays)."""

    m11: np.ndarray
    m12: np.ndarray
    m22: np.ndarray

    def eigenvalues(self) -> tuple[np.ndarray, np.ndarray]:
        mean = 0.5 * (self.m11 + self.m22)
        disc = np.sqrt((0.5 * (self.m11 - self.m22)) ** 2 + self.m12**2)
        return mean - disc, mean + disc

    def trace(self) -> np.ndarray:
        return self.m11 + self.m22

    def frobenius_sq(self) -> np.ndarray:
        return self.m11**2 + 2.0 * self.m12**2 + self.m22**2

    def at(self, i: int, j: int) -> Sym2:
        return Sym2(float(self.m11[i, j]), float(self.m12[i, j]), float(self.m22[i, j]))


def _second_diff(values: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (np.roll(values, -1, axis) - 2.0 * values + np.roll(values, 1, axis)) / (h * h)


def _cross_diff(values: np.ndarray, h: float) -> np.ndarray:
    # Four-corner stencil for u_xy.
    return (
        np.roll(values, (-1, -1), (0, 1))
        - np.roll(values, (-1, 1), (0, 1))
        - np.roll(values, (1, -1), (0, 1))
        + np.roll(values, (1, 1), (0, 1))
    ) / (4.0 * h * h)


def hessian_standard(u: GridFunction) -> Sym2Field:
    """Centered 9-point discrete Hessian with periodic wrapping.

    u_xx and u_yy by the usual second differences, u_xy by the four-corner
    cross stencil.  Requires n >= 3 so the stencil does not self-overlap.
    """
    if u.grid.n < 3:
        raise ValueError("hessian_standard needs a grid with n >= 3")
    h = u.grid.h
    return Sym2Field(
        m11=_second_diff(u.values, 0, h),
        m12=_cross_diff(u.values, h),
        m22=_second_diff(u.values, 1, h),
    )


def directional_second_difference_field(u: GridFunction, p: tuple[int, int]) -> np.ndarray:
    """(u(x+ph) - 2u(x) + u(x-ph)) / (h^2 |p|^2) at every grid point."""
    if p == (0, 0):
        raise ValueError("direction offset must be nonzero")
    h = u.grid.h
    norm_sq = float(p[0] * p[0] + p[1] * p[1])
    vals = u.values
    plus = np.roll(vals, (-p[0], -p[1]), (0, 1))
    minus = np.roll(vals, (p[0], p[1]), (0, 1))
    return (plus - 2.0 * vals + minus) / (h * h * norm_sq)


def directional_second_difference(u: GridFunction, p: tuple[int, int], at: tuple[int, int]) -> float:
    """Directional second difference at one grid index, periodic wrapping."""
    if p == (0, 0):
        raise ValueError("direction offset must be nonzero")
    n, h = u.grid.n, u.grid.h
    i, j = at
    norm_sq = float(p[0] * p[0] + p[1] * p[1])
    plus = u.values[(i + p[0]) % n, (j + p[1]) % n]
    minus = u.values[(i - p[0]) % n, (j - p[1]) % n]
    return float((plus - 2.0 * u.values[i, j] + minus) / (h * h * norm_sq))
