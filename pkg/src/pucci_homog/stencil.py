"""Nonnegative directional decompositions of 2x2 SPD coefficient matrices.

A monotone discretization of G : D^2 needs G = sum_d w_d d d^T with w_d >= 0
over integer offsets d.  The canonical four-direction set (axes plus both
diagonals) admits a closed form whenever |G_12| <= min(G_11, G_22); outside
that cone the obtuse-superbase construction supplies an exact three-term
decomposition with (possibly longer) integer directions.
"""

from __future__ import annotations

import numpy as np

from .errors import StencilDecompositionError
from .grid import DEFAULT_DIRECTIONS, Sym2

# Relative slack when testing weight nonnegativity; tiny negative weights
# from rounding are clipped to zero.
_NEG_TOL = 1e-12


def decompose_fixed(alpha: float, beta: float, gamma: float):
    """Closed-form weights on ((1,0), (0,1), (1,1), (1,-1)) or None.

    Solves alpha = w10 + w11 + w1m1, gamma = w01 + w11 + w1m1,
    beta = w11 - w1m1 with w11 = beta^+, w1m1 = beta^-.
    """
    scale = abs(alpha) + abs(gamma) + abs(beta)
    w11 = max(beta, 0.0)
    w1m1 = max(-beta, 0.0)
    w10 = alpha - abs(beta)
    w01 = gamma - abs(beta)
    if w10 < -_NEG_TOL * scale or w01 < -_NEG_TOL * scale:
        return None
    return {
        (1, 0): max(w10, 0.0),
        (0, 1): max(w01, 0.0),
        (1, 1): w11,
        (1, -1): w1m1,
    }


def _inner(u, g, v) -> float:
    return (
        u[0] * (g[0] * v[0] + g[1] * v[1])
        + u[1] * (g[1] * v[0] + g[2] * v[1])
    )


def decompose_superbase(alpha: float, beta: float, gamma: float, max_flips: int = 64):
    """Exact nonnegative decomposition of an SPD matrix via an obtuse superbase.

    Iteratively reduces the superbase (v0, v1, v2), v0+v1+v2 = 0, until all
    pairwise G-inner products are nonpositive, then reads off
    G = sum_pairs (-<v_i, G v_j>) (v_k_perp)(v_k_perp)^T.
    """
    g = (alpha, beta, gamma)
    base = [np.array((1, 0)), np.array((0, 1)), np.array((-1, -1))]
    scale = abs(alpha) + abs(gamma) + abs(beta)
    for _ in range(max_flips):
        flipped = False
        for i in range(3):
            for j in range(i + 1, 3):
                if _inner(base[i], g, base[j]) > _NEG_TOL * scale:
                    k = 3 - i - j
                    vi, vj = base[i], base[j]
                    base[i], base[j], base[k] = -vi, vj, vi - vj
                    flipped = True
                    break
            if flipped:
                break
        if not flipped:
            weights = {}
            pairs = ((0, 1, 2), (1, 2, 0), (0, 2, 1))
            for i, j, k in pairs:
                w = -_inner(base[i], g, base[j])
                if w <= 0.0:
                    continue
                perp = (-int(base[k][1]), int(base[k][0]))
                if perp[0] < 0 or (perp[0] == 0 and perp[1] < 0):
                    perp = (-perp[0], -perp[1])
                weights[perp] = weights.get(perp, 0.0) + w
            return weights
    return None


def decompose_matrix(g: Sym2, widen: bool = True):
    """Decompose one SPD matrix, preferring the canonical four directions."""
    weights = decompose_fixed(g.a11, g.a12, g.a22)
    if weights is not None:
        return weights
    if not widen:
        raise StencilDecompositionError(
            f"matrix ({g.a11:g}, {g.a12:g}, {g.a22:g}) is not decomposable "
            "on the fixed four-direction stencil and widening is disabled"
        )
    weights = decompose_superbase(g.a11, g.a12, g.a22)
    if weights is None:
        raise StencilDecompositionError(
            f"superbase reduction failed for matrix ({g.a11:g}, {g.a12:g}, {g.a22:g})"
        )
    return weights


def decompose_field(alpha: np.ndarray, beta: np.ndarray, gamma: np.ndarray, widen: bool = True):
    """Decompose a matrix field given entrywise arrays.

    Returns (base, extras): base maps each canonical direction to a weight
    array (zeroed where the closed form fails), extras is a list of
    (flat_index, direction, weight) for the widened points.

    Raises StencilDecompositionError naming the first offending grid point
    when widening is disabled and the fixed stencil does not suffice.
    """
    scale = float(np.max(np.abs(alpha) + np.abs(gamma) + np.abs(beta)))
    tol = _NEG_TOL * max(scale, 1.0)
    w11 = np.maximum(beta, 0.0)
    w1m1 = np.maximum(-beta, 0.0)
    w10 = alpha - np.abs(beta)
    w01 = gamma - np.abs(beta)
    bad = (w10 < -tol) | (w01 < -tol)
    base = {
        (1, 0): np.where(bad, 0.0, np.maximum(w10, 0.0)),
        (0, 1): np.where(bad, 0.0, np.maximum(w01, 0.0)),
        (1, 1): np.where(bad, 0.0, w11),
        (1, -1): np.where(bad, 0.0, w1m1),
    }
    extras: list[tuple[int, tuple[int, int], float]] = []
    if bad.any():
        idx = np.argwhere(bad)
        if not widen:
            i, j = (int(v) for v in idx[0])
            raise StencilDecompositionError(
                f"coefficient matrix at grid point ({i}, {j}) is not decomposable "
                "on the fixed four-direction stencil (widening disabled)",
                point=(i, j),
            )
        n_cols = alpha.shape[1]
        for i, j in idx:
            weights = decompose_superbase(
                float(alpha[i, j]), float(beta[i, j]), float(gamma[i, j])
            )
            if weights is None:
                raise StencilDecompositionError(
                    f"superbase reduction failed at grid point ({i}, {j})",
                    point=(int(i), int(j)),
                )
            flat = int(i) * n_cols + int(j)
            extras.extend((flat, d, w) for d, w in weights.items())
    return base, extras


def assert_canonical(directions) -> None:
    """The closed-form field decomposition only covers the default stencil."""
    if tuple(directions) != DEFAULT_DIRECTIONS:
        raise StencilDecompositionError(
            "generator assembly currently decomposes on the canonical "
            f"four-direction stencil {DEFAULT_DIRECTIONS}; widening is "
            "automatic via superbase reduction"
        )
