"""Homogenization of the linearized operator via its invariant measure.

The linearization of F at Q freezes a coefficient matrix G(y) = grad_Q F(Q,y)
at every grid point.  Splitting each G(y) into nonnegative directional
weights turns G : D^2 into the generator of an irreducible jump chain on the
torus grid; the invariant probability measure solves the discrete adjoint
(double-divergence) equation and is computed by power iteration on the
transposed generator, which preserves nonnegativity and total mass by
construction.  Averaging F(Q, y) against the measure evaluates the
homogenized linearized operator at Q.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse

from .errors import NonConvergenceError
from .fields import CoefficientField, harmonic_mean
from .grid import GridFunction, Sym2
from .operators import Family, OperatorSpec, evaluate, gradient_weights
from .stencil import decompose_field


@dataclass(frozen=True)
class MeasureParams:
    residual_tol: float = 1e-10
    max_iter: int = 2_000_000
    widen: bool = True
    renorm_stride: int = 4096


@dataclass(frozen=True)
class InvariantMeasure:
    """Stationary density of the linearized operator's adjoint equation.

    rho is nonnegative with unit mass (h^2 * sum = 1); residual is the
    max-norm of the discrete adjoint equation applied to rho.
    """

    rho: GridFunction
    residual: float
    iterations: int

    def __post_init__(self) -> None:
        vals = self.rho.values
        if vals.min() < -1e-14:
            raise ValueError(f"invariant measure has negative entries (min {vals.min():g})")
        if abs(vals.mean() - 1.0) > 1e-12:
            raise ValueError("invariant measure is not normalized to unit mass")


def _gradient_entry_arrays(spec: OperatorSpec, q: Sym2):
    """Entrywise arrays (alpha, beta, gamma) of G(y) = grad_Q F(Q, y)."""
    frame, w_min, w_max = gradient_weights(spec, q)
    w_min = np.asarray(w_min, dtype=float)
    w_max = np.asarray(w_max, dtype=float)
    floor = min(float(w_min.min()), float(w_max.min()))
    if floor < spec.coeff.delta:
        raise ValueError(
            f"linearized operator is not uniformly elliptic at Q (min weight {floor:g})"
        )
    v1, v2 = frame.v_min, frame.v_max
    alpha = w_min * v1[0] * v1[0] + w_max * v2[0] * v2[0]
    beta = w_min * v1[0] * v1[1] + w_max * v2[0] * v2[1]
    gamma = w_min * v1[1] * v1[1] + w_max * v2[1] * v2[1]
    return alpha, beta, gamma


def build_generator(spec: OperatorSpec, q: Sym2, widen: bool = True):
    """Sparse monotone discretization of phi -> h^2 * G(y) : D^2 phi.

    Entries are the directional weights themselves (the physical generator
    carries an extra 1/h^2).  Returns (L, trace_G) with trace_G = alpha+gamma
    used for time-step bounds and measure initialization.
    """
    grid = spec.grid
    n = grid.n
    alpha, beta, gamma = _gradient_entry_arrays(spec, q)
    base, extras = decompose_field(alpha, beta, gamma, widen=widen)
    idx = np.arange(n * n).reshape(n, n)
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    data: list[np.ndarray] = []
    flat_rows = idx.ravel()
    for d, w in base.items():
        wf = w.ravel()
        plus = np.roll(idx, (-d[0], -d[1]), (0, 1)).ravel()
        minus = np.roll(idx, (d[0], d[1]), (0, 1)).ravel()
        rows.extend((flat_rows, flat_rows, flat_rows))
        cols.extend((plus, minus, flat_rows))
        data.extend((wf, wf, -2.0 * wf))
    if extras:
        er, ec, ed = [], [], []
        for flat, d, w in extras:
            i, j = divmod(flat, n)
            plus = ((i + d[0]) % n) * n + (j + d[1]) % n
            minus = ((i - d[0]) % n) * n + (j - d[1]) % n
            er.extend((flat, flat, flat))
            ec.extend((plus, minus, flat))
            ed.extend((w, w, -2.0 * w))
        rows.append(np.asarray(er, dtype=np.int64))
        cols.append(np.asarray(ec, dtype=np.int64))
        data.append(np.asarray(ed, dtype=float))
    mat = sparse.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n * n, n * n),
    ).tocsr()
    return mat, alpha + gamma


def invariant_measure(
    spec: OperatorSpec,
    q: Sym2,
    params: MeasureParams | None = None,
) -> InvariantMeasure:
    """Stationary distribution of the linearized operator's transpose chain.

    Power iteration rho <- rho + tau * L^T rho under the chain's CFL bound;
    nonnegativity is automatic.  Stops once the unscaled adjoint residual
    ||A^T rho||_inf drops below residual_tol (or rho reaches a floating-point
    fixed point).  Starts from 1/trace(G), which is exact for separable
    coefficients.
    """
    params = params or MeasureParams()
    grid = spec.grid
    n = grid.n
    h2 = grid.h * grid.h
    gen, trace_g = build_generator(spec, q, widen=params.widen)
    adj = gen.T.tocsr()
    sum_w = -gen.diagonal() / 2.0
    tau = 1.0 / (4.0 * float(sum_w.max()))
    rho = (1.0 / trace_g).ravel()
    rho /= rho.mean()
    iterations = 0
    residual = np.inf
    while True:
        delta = adj.dot(rho)
        residual = float(np.abs(delta).max()) / h2
        if residual <= params.residual_tol:
            break
        step = tau * delta
        if not step.any():
            break  # floating-point fixed point
        rho += step
        iterations += 1
        if params.renorm_stride and iterations % params.renorm_stride == 0:
            rho /= rho.mean()
        if iterations >= params.max_iter:
            raise NonConvergenceError(
                f"invariant measure power iteration reached max_iter={params.max_iter} "
                f"with residual {residual:g} > {params.residual_tol:g}"
            )
    rho /= rho.mean()
    residual = float(np.abs(adj.dot(rho)).max()) / h2
    return InvariantMeasure(GridFunction(grid, rho.reshape(n, n)), residual, iterations)


def homog_linearized(spec: OperatorSpec, q: Sym2, rho) -> float:
    """L-bar^Q(Q) = integral of F(Q, y) against the invariant measure."""
    if isinstance(rho, InvariantMeasure):
        density = rho.rho.values
    elif isinstance(rho, GridFunction):
        density = rho.values
    else:
        density = np.asarray(rho, dtype=float)
    f_vals = evaluate(spec, q)
    return float(np.mean(f_vals * density))


@dataclass(frozen=True)
class SeparableParts:
    """Split of a separable operator a0(y) * F0(Q)."""

    a0: np.ndarray
    base: OperatorSpec


def separable_split(spec: OperatorSpec, rtol: float = 1e-9) -> SeparableParts:
    """Factor the operator as a0(y) * F0(Q), or raise ValueError."""
    c = spec.coeff
    grid = spec.grid
    ones = np.ones((grid.n, grid.n))
    if spec.family is Family.LINEAR:
        base = OperatorSpec(Family.LINEAR, CoefficientField.single(grid, ones), a0_matrix=spec.a0_matrix)
        return SeparableParts(c.a, base)
    if spec.family is Family.MONGE_AMPERE:
        base = OperatorSpec(Family.MONGE_AMPERE, CoefficientField.single(grid, ones))
        return SeparableParts(c.a, base)
    if spec.family is Family.EIGEN_PAIR:
        ratio = c.a2 / c.a1
        lo, hi = float(ratio.min()), float(ratio.max())
        if hi - lo > rtol * max(abs(hi), 1.0):
            raise ValueError("eigen_pair operator is not separable: a2/a1 varies")
        base = OperatorSpec(
            Family.EIGEN_PAIR, CoefficientField.eigen_weights(grid, ones, 0.5 * (lo + hi) * ones)
        )
        return SeparableParts(c.a1, base)
    ratio = c.A / c.a
    lo, hi = float(ratio.min()), float(ratio.max())
    if hi - lo > rtol * max(abs(hi), 1.0):
        raise ValueError(f"{spec.family.value} operator is not separable: A/a varies")
    base = OperatorSpec(
        spec.family,
        CoefficientField.pair(grid, ones, 0.5 * (lo + hi) * ones),
        k=spec.k,
    )
    return SeparableParts(c.a, base)


def separable_analytic(spec: OperatorSpec, q: Sym2) -> float:
    """HM(a0) * F0(Q): the closed-form homogenized linearization for
    separable operators, bypassing the measure solve."""
    parts = separable_split(spec)
    return harmonic_mean(parts.a0) * evaluate(parts.base, q, at=(0, 0))


@dataclass(frozen=True)
class AnsatzCoefficients:
    """Effective weights (A_bar, a_bar) for the homogeneous-order-one ansatz
    L-bar(Q) ~ A_bar * lambda_max^+(Q) + a_bar * lambda_min(Q)."""

    A_bar: float
    a_bar: float
    fit_residual: float
    within_threshold: bool

    def predict(self, q: Sym2) -> float:
        lam_min, lam_max = q.eigenvalues()
        return self.A_bar * max(lam_max, 0.0) + self.a_bar * lam_min


_DEFAULT_PROBE = (
    Sym2.diag(1.0, -0.5),
    Sym2.diag(1.0, -2.0),
    Sym2.diag(0.5, -1.0),
    Sym2.diag(-1.0, 1.0),
)


def nonseparable_ansatz(
    spec: OperatorSpec,
    params: MeasureParams | None = None,
    probe: tuple[Sym2, ...] = _DEFAULT_PROBE,
    threshold: float = 0.05,
) -> AnsatzCoefficients:
    """Extract (A_bar, a_bar) from the linearization at Q = diag(1, -1).

    With one eigenvalue of each sign the linearized operator weighs the two
    coefficient fields against the corresponding eigenvectors, so averaging
    them against the invariant measure yields the ansatz weights directly.
    The fit residual over the probe Q set is reported, not fatal.
    """
    c = spec.coeff
    if spec.family is Family.EIGEN_PAIR:
        low, high = c.a1, c.a2
    elif spec.family in (Family.PUCCI, Family.PUCCI_MAX):
        low, high = c.a, c.A
    else:
        raise ValueError(f"ansatz extraction is not defined for family {spec.family.value}")
    q_ref = Sym2.diag(1.0, -1.0)
    meas = invariant_measure(spec, q_ref, params)
    a_bar = float(np.mean(low * meas.rho.values))
    A_bar = float(np.mean(high * meas.rho.values))
    worst = 0.0
    for q in probe:
        lam_min, lam_max = q.eigenvalues()
        if lam_max <= 0.0 or lam_min >= 0.0:
            continue  # the extraction regime is mixed-sign Q
        l_bar = homog_linearized(spec, q, invariant_measure(spec, q, params))
        pred = A_bar * max(lam_max, 0.0) + a_bar * lam_min
        denom = max(abs(l_bar), 1e-12)
        worst = max(worst, abs(l_bar - pred) / denom)
    return AnsatzCoefficients(A_bar, a_bar, worst, worst <= threshold)
