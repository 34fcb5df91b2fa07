"""Pointwise evaluation of the operator families, their linearizations, and
the generalized semi-concavity constants.

Every family acts on a symmetric 2x2 matrix argument through its eigenvalues
(except the linear family, which contracts against a fixed matrix):

  linear        a(y) * A0 : M
  eigen_pair    a1(y) * lam_min + a2(y) * lam_max
  pucci         a(y) * tr M + b(y) * (lam_min^+ + lam_max^+)      b = A - a
  pucci_max     a(y) * tr M + b(y) * lam_max^+
  pucci_smooth  a(y) * tr M + b(y) * S_k(lam_min, lam_max, 0)
  monge_ampere  a(y) * (tr M + lam_min^+ * lam_max^+)
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .fields import CoefficientField
from .grid import Sym2, eigen_decompose

# Distance below which a point counts as on the operator's singular set:
# constants blow up there and the axis-aligned gradient tie-break applies.
EPS_SINGULAR = 1e-10


class Family(str, Enum):
    LINEAR = "linear"
    EIGEN_PAIR = "eigen_pair"
    PUCCI = "pucci"
    PUCCI_MAX = "pucci_max"
    PUCCI_SMOOTH = "pucci_smooth"
    MONGE_AMPERE = "monge_ampere"


_PAIR_FAMILIES = (Family.PUCCI, Family.PUCCI_MAX, Family.PUCCI_SMOOTH)


@dataclass(frozen=True)
class OperatorSpec:
    """An operator family paired with its coefficient field."""

    family: Family
    coeff: CoefficientField
    a0_matrix: Sym2 | None = None
    k: float | None = None
    eps_singular: float = EPS_SINGULAR

    def __post_init__(self) -> None:
        f = self.family
        c = self.coeff
        if f in _PAIR_FAMILIES:
            if c.a is None or c.A is None:
                raise ValueError(f"{f.value} needs pair coefficients (a, A)")
        elif f is Family.EIGEN_PAIR:
            if c.a1 is None or c.a2 is None:
                raise ValueError("eigen_pair needs coefficients (a1, a2)")
        elif f in (Family.LINEAR, Family.MONGE_AMPERE):
            if c.a is None:
                raise ValueError(f"{f.value} needs coefficient a")
        if f is Family.LINEAR:
            if self.a0_matrix is None:
                raise ValueError("linear family needs a0_matrix")
            if self.a0_matrix.eigenvalues()[0] < c.delta:
                raise ValueError("linear family matrix must be uniformly elliptic")
        if f is Family.PUCCI_SMOOTH:
            if self.k is None or self.k <= 0.0:
                raise ValueError(f"smoothed family needs k > 0, got {self.k}")

    @property
    def grid(self):
        return self.coeff.grid


def smooth_max(x, k: float):
    """Softmax-weighted mean S_k(x) = sum x_i e^{k x_i} / sum e^{k x_i}.

    The max is subtracted from every exponent before exponentiating, so large
    k cannot overflow.  S_0 is the arithmetic mean; S_k -> max as k -> inf.
    """
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ValueError("smooth_max needs a nonempty vector")
    if k < 0.0:
        raise ValueError(f"smooth_max needs k >= 0, got {k}")
    w = np.exp(k * (x - x.max()))
    return float((x * w).sum() / w.sum())


def _smooth_max_3(k: float, x1, x2, x3):
    """Vectorized S_k over three stacked entries, overflow-guarded."""
    top = np.maximum(np.maximum(x1, x2), x3)
    e1 = np.exp(k * (x1 - top))
    e2 = np.exp(k * (x2 - top))
    e3 = np.exp(k * (x3 - top))
    z = e1 + e2 + e3
    return (x1 * e1 + x2 * e2 + x3 * e3) / z


def _smooth_weights(k: float, lam_min, lam_max):
    """d S_k(lam_min, lam_max, 0) / d lam_i for i = min, max."""
    top = np.maximum(np.maximum(lam_min, lam_max), 0.0)
    e1 = np.exp(k * (lam_min - top))
    e2 = np.exp(k * (lam_max - top))
    e3 = np.exp(k * (0.0 - top))
    z = e1 + e2 + e3
    s = (lam_min * e1 + lam_max * e2) / z
    w1, w2 = e1 / z, e2 / z
    g1 = w1 * (1.0 + k * (lam_min - s))
    g2 = w2 * (1.0 + k * (lam_max - s))
    return g1, g2


def _pair_coefficients(spec: OperatorSpec, at=None):
    """(c1, c2) coefficient values, full arrays or scalars at one index."""
    c = spec.coeff
    if spec.family in _PAIR_FAMILIES:
        c1, c2 = c.a, c.A - c.a
    elif spec.family is Family.EIGEN_PAIR:
        c1, c2 = c.a1, c.a2
    else:
        c1, c2 = c.a, None
    if at is not None:
        i, j = at
        c1 = float(c1[i, j])
        c2 = None if c2 is None else float(c2[i, j])
    return c1, c2


def value_from_eigen(spec: OperatorSpec, lam_min, lam_max, trace, c1, c2):
    """Family formula given eigenvalues/trace and coefficient values.

    Works elementwise on arrays; not defined for the linear family (which
    needs the full matrix, see `evaluate`).
    """
    f = spec.family
    if f is Family.EIGEN_PAIR:
        return c1 * lam_min + c2 * lam_max
    if f is Family.PUCCI:
        return c1 * trace + c2 * (np.maximum(lam_min, 0.0) + np.maximum(lam_max, 0.0))
    if f is Family.PUCCI_MAX:
        return c1 * trace + c2 * np.maximum(lam_max, 0.0)
    if f is Family.PUCCI_SMOOTH:
        return c1 * trace + c2 * _smooth_max_3(spec.k, lam_min, lam_max, 0.0 * lam_min)
    if f is Family.MONGE_AMPERE:
        return c1 * (trace + np.maximum(lam_min, 0.0) * np.maximum(lam_max, 0.0))
    raise ValueError(f"value_from_eigen does not handle family {f.value}")


def evaluate(spec: OperatorSpec, q: Sym2, at: tuple[int, int] | None = None):
    """F(Q, y): a float at one grid index, or the full field for at=None."""
    c1, c2 = _pair_coefficients(spec, at)
    if spec.family is Family.LINEAR:
        return c1 * spec.a0_matrix.dot(q)
    lam_min, lam_max = q.eigenvalues()
    val = value_from_eigen(spec, lam_min, lam_max, q.trace, c1, c2)
    return float(val) if at is not None else val


def gradient_weights(spec: OperatorSpec, q: Sym2, at: tuple[int, int] | None = None):
    """Spectral form of the linearization grad_Q F(Q, y).

    Returns (frame, w_min, w_max) with grad = w_min v v^T + w_max w w^T in the
    frame's eigenbasis; the weights are scalars at one index or full arrays.
    On the repeated-eigenvalue set the frame falls back to the coordinate
    axes (see eigen_decompose).
    """
    c1, c2 = _pair_coefficients(spec, at)
    f = spec.family
    if f is Family.LINEAR:
        frame = eigen_decompose(spec.a0_matrix)
        return frame, c1 * frame.lambda_min, c1 * frame.lambda_max
    frame = eigen_decompose(q)
    lam_min, lam_max = frame.lambda_min, frame.lambda_max
    ind_min = 1.0 if lam_min > 0.0 else 0.0
    ind_max = 1.0 if lam_max > 0.0 else 0.0
    if f is Family.EIGEN_PAIR:
        w_min, w_max = c1, c2
    elif f is Family.PUCCI:
        w_min, w_max = c1 + c2 * ind_min, c1 + c2 * ind_max
    elif f is Family.PUCCI_MAX:
        w_min, w_max = c1 + 0.0 * c2, c1 + c2 * ind_max
    elif f is Family.PUCCI_SMOOTH:
        g1, g2 = _smooth_weights(spec.k, lam_min, lam_max)
        w_min, w_max = c1 + c2 * g1, c1 + c2 * g2
    elif f is Family.MONGE_AMPERE:
        w_min = c1 * (1.0 + ind_min * max(lam_max, 0.0))
        w_max = c1 * (1.0 + ind_max * max(lam_min, 0.0))
    else:  # pragma: no cover
        raise ValueError(f"unknown family {f}")
    return frame, w_min, w_max


def gradient(spec: OperatorSpec, q: Sym2, at: tuple[int, int]) -> Sym2:
    """grad_Q F(Q, y) at one grid index, as a Sym2."""
    frame, w_min, w_max = gradient_weights(spec, q, at)
    m = w_min * np.outer(frame.v_min, frame.v_min) + w_max * np.outer(frame.v_max, frame.v_max)
    return Sym2.from_array(m)


def linearized_value(spec: OperatorSpec, q_base: Sym2, m: Sym2, at: tuple[int, int] | None = None):
    """Affine approximation grad_Q F(Q,y) : (M - Q) + F(Q, y)."""
    frame, w_min, w_max = gradient_weights(spec, q_base, at)
    d = m - q_base
    d_min = float(frame.v_min @ d.as_array() @ frame.v_min)
    d_max = float(frame.v_max @ d.as_array() @ frame.v_max)
    # Off-eigenbasis components of d are annihilated: grad is co-diagonal
    # with the frame, so grad : d = w_min d_min + w_max d_max.
    lin = w_min * d_min + w_max * d_max + evaluate(spec, q_base, at)
    return float(lin) if at is not None else lin


@dataclass(frozen=True)
class SemiConcavityValue:
    """A generalized semi-concavity constant; value None means unbounded.

    Upper constants are >= 0, lower constants are <= 0 (zero for convex
    operators).  Unbounded is returned on the family's singular set.
    """

    value: float | None

    @property
    def is_unbounded(self) -> bool:
        return self.value is None


UNBOUNDED = SemiConcavityValue(None)


def _c_bound_arrays(spec: OperatorSpec, q: Sym2, sign: int):
    """Per-point constants for the whole grid, or None when unbounded.

    The unbounded/bounded decision depends only on Q, so it is uniform over
    the grid; the coefficient dependence is linear.
    """
    eps = spec.eps_singular
    lam_min, lam_max = q.eigenvalues()
    gap = abs(lam_max - lam_min)
    c1, c2 = _pair_coefficients(spec)
    f = spec.family
    if f is Family.LINEAR:
        return np.zeros_like(c1)
    if f is Family.EIGEN_PAIR:
        if gap < eps:
            return None
        if sign > 0:
            return np.maximum(c2 - c1, 0.0) / gap
        return -np.maximum(c1 - c2, 0.0) / gap
    if f is Family.PUCCI:
        if sign < 0:
            return np.zeros_like(c1)  # convex
        if lam_min > 0.0 and lam_max > 0.0:
            if lam_min < eps:
                return None
            A = c1 + c2
            return np.maximum(c2 / (lam_min + lam_max), A / (2.0 * lam_min))
        den = min(abs(lam_min), abs(lam_max))
        if den < eps:
            return None
        return c2 / (2.0 * den)
    if f is Family.PUCCI_MAX:
        if sign < 0:
            return np.zeros_like(c1)  # convex
        # From the negative-definite cone the only kink is lam_max = 0 at
        # distance |lam_max|: C+ = b / (2 |lam_max|).  With lam_max > 0 the
        # operator is the b-weighted top eigenvalue plus an affine part, so
        # the eigenvalue-crossing constant b/gap applies, plus b/(2 lam_max)
        # to cover arguments whose top eigenvalue drops below zero.
        if lam_max < -eps:
            return c2 / (2.0 * abs(lam_max))
        if lam_max > eps and gap > eps:
            return c2 * (1.0 / gap + 1.0 / (2.0 * lam_max))
        return None
    if f is Family.PUCCI_SMOOTH:
        return None  # no closed-form constant is claimed for the smoothing
    if f is Family.MONGE_AMPERE:
        # Bounds are only claimed on the strictly negative-definite cone:
        # there F(M) - L(M) = a * lam_min^+(M) lam_max^+(M) in [0, a t^2]
        # for t = ||M - Q||, hence C- = 0 and C+ = 2 a.
        if lam_max < -eps:
            return np.zeros_like(c1) if sign < 0 else 2.0 * c1
        return None
    raise ValueError(f"unknown family {f}")


def c_plus(spec: OperatorSpec, q: Sym2, at: tuple[int, int]) -> SemiConcavityValue:
    """Upper quadratic-domination constant C+(Q, y) at one grid index."""
    arr = _c_bound_arrays(spec, q, +1)
    if arr is None:
        return UNBOUNDED
    return SemiConcavityValue(float(arr[at[0], at[1]]))


def c_minus(spec: OperatorSpec, q: Sym2, at: tuple[int, int]) -> SemiConcavityValue:
    """Lower quadratic-domination constant C-(Q, y) (nonpositive)."""
    arr = _c_bound_arrays(spec, q, -1)
    if arr is None:
        return UNBOUNDED
    return SemiConcavityValue(float(arr[at[0], at[1]]))


def c_bound_field(spec: OperatorSpec, q: Sym2, sign: int):
    """Grid-wide C+ (sign=+1) or C- (sign=-1) values; None if unbounded."""
    return _c_bound_arrays(spec, q, sign)


def c_plus_scalar_max(a: float, b: float, x: float) -> float:
    """Best upper constant for the scalar prototype f(x) = max(ax, bx).

    Normalized |a - b| / (2|x|) so the constant is nonnegative on both rays.
    """
    if x == 0.0:
        raise ValueError("the scalar max prototype is singular at x = 0")
    return abs(a - b) / (2.0 * abs(x))


def uniform_ellipticity_bound(spec: OperatorSpec, q: Sym2) -> float:
    """Largest linearization eigenvalue over the grid, for CFL time steps."""
    c = spec.coeff
    f = spec.family
    if f is Family.LINEAR:
        return float(c.a.max()) * spec.a0_matrix.eigenvalues()[1]
    if f is Family.EIGEN_PAIR:
        return float(max(c.a1.max(), c.a2.max()))
    if f in (Family.PUCCI, Family.PUCCI_MAX):
        return float(c.A.max())
    if f is Family.PUCCI_SMOOTH:
        # Softmax weights can exceed 1 (at most 1 + 2/e); use a safe factor.
        return 2.0 * float(c.A.max())
    if f is Family.MONGE_AMPERE:
        # Quadratic in Q: no uniform bound.  Heuristic based on the sweep
        # argument's size; the solver reports non-convergence if it is beaten.
        return float(c.a.max()) * (2.0 + 2.0 * q.norm())
    raise ValueError(f"unknown family {f}")
