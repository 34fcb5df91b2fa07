import numpy as np
import pytest

from pucci_homog.cell import SchemeSpec, SolverParams, solve_cell
from pucci_homog.errors import StencilDecompositionError
from pucci_homog.fields import CoefficientField, PatternSpec, harmonic_mean, sample
from pucci_homog.grid import GridFunction, Sym2, TorusGrid
from pucci_homog.measure import (
    MeasureParams,
    build_generator,
    homog_linearized,
    invariant_measure,
    nonseparable_ansatz,
    separable_analytic,
    separable_split,
)
from pucci_homog.operators import Family, OperatorSpec
from pucci_homog.stencil import (
    decompose_field,
    decompose_fixed,
    decompose_matrix,
    decompose_superbase,
)


def linear_chk_spec(n=80, r=2.0):
    grid = TorusGrid(n)
    a0 = sample(PatternSpec.checkerboard(r=r), grid).values
    return OperatorSpec(Family.LINEAR, CoefficientField.single(grid, a0), a0_matrix=Sym2.identity()), a0


def test_separable_measure_matches_harmonic_mean_density():
    spec, a0 = linear_chk_spec()
    meas = invariant_measure(spec, Sym2.identity())
    exact = harmonic_mean(a0) / a0
    assert np.abs(meas.rho.values - exact).max() <= 1e-6
    assert meas.rho.values.min() >= 0.0
    assert meas.rho.values.mean() == pytest.approx(1.0, abs=1e-12)
    assert meas.residual <= 1e-10


def test_constant_coefficients_give_uniform_measure():
    grid = TorusGrid(32)
    spec = OperatorSpec(Family.PUCCI, CoefficientField.pair(grid, 1.0, 3.0))
    meas = invariant_measure(spec, Sym2.diag(1.0, -1.0))
    assert np.abs(meas.rho.values - 1.0).max() <= 1e-12
    assert meas.iterations == 0


def test_eigen_pair_measure_is_probability_density():
    grid = TorusGrid(40)
    a0 = sample(PatternSpec.checkerboard(r=2.0, cells=20), grid).values
    spec = OperatorSpec(Family.EIGEN_PAIR, CoefficientField.eigen_weights(grid, a0, 3.0 * a0))
    meas = invariant_measure(spec, Sym2.diag(1.0, -1.0))
    assert meas.rho.values.min() > 0.0  # strictly positive for r > 1 media
    assert meas.rho.values.mean() == pytest.approx(1.0, abs=1e-12)
    assert meas.residual <= 1e-8


def test_homog_linearized_constant_medium():
    grid = TorusGrid(20)
    spec = OperatorSpec(Family.PUCCI_MAX, CoefficientField.pair(grid, 1.0, 3.0))
    q = Sym2.diag(2.0, -1.0)
    meas = invariant_measure(spec, q)
    from pucci_homog.operators import evaluate

    assert homog_linearized(spec, q, meas) == pytest.approx(evaluate(spec, q, at=(0, 0)), rel=1e-12)


def test_homog_linearized_separable_checkerboard():
    grid = TorusGrid(80)
    a0 = sample(PatternSpec.checkerboard(r=2.0), grid).values
    spec = OperatorSpec(Family.PUCCI_MAX, CoefficientField.pair(grid, a0, 3.0 * a0))
    q = Sym2.diag(1.0, -2.0)
    meas = invariant_measure(spec, q)
    l_bar = homog_linearized(spec, q, meas)
    f0 = 1.0 * q.trace + 2.0 * 1.0  # base operator at Q
    assert l_bar == pytest.approx((4.0 / 3.0) * f0, rel=1e-6)
    assert l_bar == pytest.approx(separable_analytic(spec, q), rel=1e-9)


def test_linear_family_two_routes_agree():
    spec, _ = linear_chk_spec(n=40)
    q = Sym2.diag(1.0, 1.0)
    f_bar = solve_cell(spec, SchemeSpec.standard(), q, SolverParams(tol=1e-9)).f_bar
    l_bar = homog_linearized(spec, q, invariant_measure(spec, q))
    assert f_bar == pytest.approx(l_bar, rel=1e-3)
    # for the separable linear operator both routes are exact discretely
    assert f_bar == pytest.approx(l_bar, abs=1e-7)


def test_separable_analytic_examples():
    spec, _ = linear_chk_spec(n=20)
    assert separable_analytic(spec, Sym2.identity()) == pytest.approx(8.0 / 3.0, rel=1e-12)

    grid = TorusGrid(20)
    const = OperatorSpec(Family.LINEAR, CoefficientField.single(grid, 1.0), a0_matrix=Sym2.identity())
    assert separable_analytic(const, Sym2.diag(2.0, 1.0)) == pytest.approx(3.0)

    a0 = sample(PatternSpec.checkerboard(r=2.0, cells=4), grid).values
    pucci_max = OperatorSpec(Family.PUCCI_MAX, CoefficientField.pair(grid, a0, 3.0 * a0))
    assert separable_analytic(pucci_max, Sym2.diag(1.0, 1.0)) == pytest.approx(16.0 / 3.0, rel=1e-12)


def test_separable_split_rejects_nonseparable():
    grid = TorusGrid(20)
    a0 = sample(PatternSpec.checkerboard(r=2.0, cells=4), grid).values
    spec = OperatorSpec(Family.PUCCI_MAX, CoefficientField.pair(grid, np.ones((20, 20)), 1.0 + a0))
    with pytest.raises(ValueError, match="not separable"):
        separable_split(spec)
    with pytest.raises(ValueError):
        separable_analytic(spec, Sym2.identity())


def test_adjoint_identity_is_discretely_exact():
    # same monotone stencil for the operator and (transposed) the measure:
    # integrating the linearized operator at Q + D^2 phi against rho returns
    # the base average exactly, for any smooth phi
    grid = TorusGrid(40)
    a0 = sample(PatternSpec.checkerboard(r=2.0, cells=20), grid).values
    spec = OperatorSpec(Family.PUCCI, CoefficientField.pair(grid, a0, 3.0 * a0))
    q = Sym2.diag(1.0, -1.0)
    meas = invariant_measure(spec, q)
    gen, _ = build_generator(spec, q)
    h2 = grid.h**2
    rng = np.random.default_rng(0)
    rho_flat = meas.rho.values.ravel()
    worst = 0.0
    for _ in range(20):
        kx, ky = rng.integers(1, 4, 2)
        phase = rng.uniform(0, 2 * np.pi)
        phi = GridFunction.sample(
            grid, lambda x, y: np.sin(2 * np.pi * (kx * x + ky * y) + phase)
        )
        # mean(rho * G:D^2 phi) in physical units
        defect = float(rho_flat @ (gen @ phi.values.ravel())) / grid.n**2 / h2
        worst = max(worst, abs(defect))
    assert worst <= 1e-9


def test_measure_translation_invariance_whole_cells():
    grid = TorusGrid(40)
    pts_per_cell = 2
    a0 = sample(PatternSpec.checkerboard(r=2.0, cells=20), grid).values
    spec = OperatorSpec(Family.PUCCI_MAX, CoefficientField.pair(grid, a0, 3.0 * a0))
    shifted_spec = OperatorSpec(
        Family.PUCCI_MAX,
        CoefficientField.pair(
            grid,
            np.roll(a0, (2 * pts_per_cell, 0), axis=(0, 1)),
            np.roll(3.0 * a0, (2 * pts_per_cell, 0), axis=(0, 1)),
        ),
    )
    q = Sym2.diag(1.0, -1.0)
    rho = invariant_measure(spec, q).rho.values
    rho_shifted = invariant_measure(shifted_spec, q).rho.values
    assert np.abs(np.roll(rho, (2 * pts_per_cell, 0), axis=(0, 1)) - rho_shifted).max() <= 1e-12


def test_nonseparable_ansatz_constant_medium_exact():
    grid = TorusGrid(20)
    spec = OperatorSpec(Family.PUCCI_MAX, CoefficientField.pair(grid, 1.0, 4.0))
    ans = nonseparable_ansatz(spec)
    assert ans.A_bar == pytest.approx(4.0, abs=1e-12)
    assert ans.a_bar == pytest.approx(1.0, abs=1e-12)
    assert ans.fit_residual <= 1e-10
    assert ans.within_threshold


def test_nonseparable_ansatz_separable_medium_matches_harmonic_mean():
    grid = TorusGrid(80)
    a0 = sample(PatternSpec.checkerboard(r=2.0), grid).values
    spec = OperatorSpec(Family.PUCCI_MAX, CoefficientField.pair(grid, a0, 3.0 * a0))
    ans = nonseparable_ansatz(spec)
    assert ans.A_bar == pytest.approx((4.0 / 3.0) * 3.0, rel=1e-6)
    assert ans.a_bar == pytest.approx(4.0 / 3.0, rel=1e-6)


def test_nonseparable_ansatz_rejects_unsupported_family():
    grid = TorusGrid(20)
    spec = OperatorSpec(Family.MONGE_AMPERE, CoefficientField.single(grid, 1.0))
    with pytest.raises(ValueError):
        nonseparable_ansatz(spec)


def test_decompose_fixed_and_superbase_are_exact():
    rng = np.random.default_rng(4)
    for _ in range(500):
        lam = rng.uniform(0.2, 5.0, 2)
        theta = rng.uniform(0, np.pi)
        c, s = np.cos(theta), np.sin(theta)
        g11 = lam[0] * c * c + lam[1] * s * s
        g12 = (lam[0] - lam[1]) * c * s
        g22 = lam[0] * s * s + lam[1] * c * c
        weights = decompose_fixed(g11, g12, g22)
        if weights is None:
            weights = decompose_superbase(g11, g12, g22)
        assert weights is not None
        m = np.zeros((2, 2))
        for (dx, dy), w in weights.items():
            assert w >= 0.0
            m += w * np.outer([dx, dy], [dx, dy])
        assert abs(m[0, 0] - g11) <= 1e-10 and abs(m[0, 1] - g12) <= 1e-10 and abs(m[1, 1] - g22) <= 1e-10


def test_decompose_matrix_widens_anisotropic_input():
    # eigenframe at 30 degrees with ratio 12 breaks the four-direction cone
    lam = (12.0, 1.0)
    c, s = np.cos(np.pi / 6), np.sin(np.pi / 6)
    g = Sym2(
        lam[0] * c * c + lam[1] * s * s,
        (lam[0] - lam[1]) * c * s,
        lam[0] * s * s + lam[1] * c * c,
    )
    assert decompose_fixed(g.a11, g.a12, g.a22) is None
    weights = decompose_matrix(g, widen=True)
    m = np.zeros((2, 2))
    for (dx, dy), w in weights.items():
        m += w * np.outer([dx, dy], [dx, dy])
    assert np.allclose(m, g.as_array(), atol=1e-10)
    assert any(abs(dx) > 1 or abs(dy) > 1 for dx, dy in weights)
    with pytest.raises(StencilDecompositionError):
        decompose_matrix(g, widen=False)


def test_decompose_field_error_names_grid_point():
    alpha = np.full((4, 4), 1.0)
    beta = np.zeros((4, 4))
    gamma = np.full((4, 4), 2.0)
    beta[2, 3] = 0.9  # SPD but |beta| > min(alpha, gamma) only at (2, 3)
    alpha[2, 3] = 0.5
    with pytest.raises(StencilDecompositionError) as err:
        decompose_field(alpha, beta, gamma, widen=False)
    assert err.value.point == (2, 3)
    base, extras = decompose_field(alpha, beta, gamma, widen=True)
    assert extras and all(flat == 2 * 4 + 3 for flat, _, _ in extras)


def test_invariant_measure_with_widened_stencil():
    # a rotated Q with strongly split weights forces off-lattice directions
    grid = TorusGrid(32)
    a0 = sample(PatternSpec.checkerboard(r=2.0, cells=8), grid).values
    spec = OperatorSpec(Family.EIGEN_PAIR, CoefficientField.eigen_weights(grid, a0, 12.0 * a0))
    q = Sym2.diag(1.0, -1.0).rotated(np.pi / 6)
    meas = invariant_measure(spec, q, MeasureParams(residual_tol=1e-8))
    assert meas.rho.values.min() >= 0.0
    assert meas.rho.values.mean() == pytest.approx(1.0, abs=1e-12)
    assert meas.residual <= 1e-8
    with pytest.raises(StencilDecompositionError):
        invariant_measure(spec, q, MeasureParams(widen=False))


def test_measure_rejects_non_elliptic_linearization():
    grid = TorusGrid(16)
    # a1 below delta on part of the grid breaks uniform ellipticity at build
    with pytest.raises(Exception):
        CoefficientField.eigen_weights(grid, 0.0, 1.0)
