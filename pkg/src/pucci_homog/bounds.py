"""Averaged semi-concavity bounds on the linearization error.

For a converged corrector u^Q and invariant measure rho^Q, the averaged
constants

    Cbar_pm(Q) = 1/2 * integral of C_pm(Q, y) ||D^2 u^Q(y)||^2 d rho(y)

bracket the linearization error E(Q) = Fbar(Q) - Lbar^Q(Q) from both sides.
The checks here are statements about continuum quantities evaluated with
discrete ones, so the verdicts allow a configurable numerical slack.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .cell import CellSolution, hessian_norm_sq
from .fields import harmonic_mean
from .grid import Sym2
from .measure import InvariantMeasure, separable_split
from .operators import OperatorSpec, SemiConcavityValue, UNBOUNDED, c_bound_field

# Grid points where the weighted corrector curvature is below this level do
# not count as support: an unbounded constant there cannot poison the bound.
SUPPORT_TOL = 1e-14


class Verdict(str, Enum):
    HOLDS = "holds"
    HOLDS_WITHIN_SLACK = "holds_within_slack"
    VIOLATED = "violated"


@dataclass(frozen=True)
class HomogenizationRecord:
    """Per-Q results of the full pipeline, plus solver diagnostics."""

    q: Sym2
    f_bar: float
    l_bar: float
    error: float
    c_bar_minus: SemiConcavityValue
    c_bar_plus: SemiConcavityValue
    iterations: int
    residual: float
    measure_residual: float
    grid_n: int
    scheme: str
    seed: int
    status: str = "ok"

    def __post_init__(self) -> None:
        if self.status == "ok" and self.error != self.f_bar - self.l_bar:
            raise ValueError("record error field must equal f_bar - l_bar exactly")


def c_bar(
    spec: OperatorSpec,
    q: Sym2,
    cell: CellSolution,
    measure: InvariantMeasure,
    sign: int,
) -> SemiConcavityValue:
    """Averaged constant; Unbounded only if the pointwise constant is
    unbounded somewhere the integrand ||D^2 u||^2 rho actually lives."""
    weight = hessian_norm_sq(cell).values * measure.rho.values
    consts = c_bound_field(spec, q, sign)
    if consts is None:
        if np.any(weight > SUPPORT_TOL):
            return UNBOUNDED
        return SemiConcavityValue(0.0)
    return SemiConcavityValue(0.5 * float(np.mean(consts * weight)))


def default_slack(solver_tol: float, refinement_gap: float | None = None) -> float:
    """Numerical slack for the bound checks: ten solver tolerances plus a
    discretization estimate from a refinement pair when one is available."""
    slack = 10.0 * solver_tol
    if refinement_gap is not None:
        slack += abs(refinement_gap)
    return slack


def check_bounds(record: HomogenizationRecord, delta_num: float) -> Verdict:
    """Compare the error against [Cbar_minus - delta, Cbar_plus + delta].

    An unbounded constant relaxes its side of the check entirely.
    """
    lower = -np.inf if record.c_bar_minus.is_unbounded else record.c_bar_minus.value
    upper = np.inf if record.c_bar_plus.is_unbounded else record.c_bar_plus.value
    e = record.error
    if lower <= e <= upper:
        return Verdict.HOLDS
    if lower - delta_num <= e <= upper + delta_num:
        return Verdict.HOLDS_WITHIN_SLACK
    return Verdict.VIOLATED


def separable_bounds(
    spec: OperatorSpec,
    q: Sym2,
    cell: CellSolution,
) -> tuple[SemiConcavityValue, SemiConcavityValue]:
    """(lower, upper) averaged bounds for a separable operator a0(y) F0(Q).

    Uses the closed-form measure rho = HM(a0)/a0; the coefficient a0 then
    cancels against the pointwise constants a0(y) C0_pm(Q), leaving
    1/2 * C0_pm(Q) * HM(a0) * integral ||D^2 u||^2.
    """
    parts = separable_split(spec)
    hm = harmonic_mean(parts.a0)
    curvature = float(np.mean(hessian_norm_sq(cell).values))
    out = []
    for sign in (-1, +1):
        consts = c_bound_field(parts.base, q, sign)
        if consts is None:
            if curvature > SUPPORT_TOL:
                out.append(UNBOUNDED)
            else:
                out.append(SemiConcavityValue(0.0))
            continue
        c0 = float(consts[0, 0])
        out.append(SemiConcavityValue(0.5 * c0 * hm * curvature))
    return out[0], out[1]
