"""Forward-backward fixed point characterizing the optimal strategy for a multiplier ``v``."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..bsde import BsdeSolution, transformed_for_strategy
from ..errors import ConvergenceError, ParameterError
from ..lattice import AdaptedProcess, LatticeModel, Strategy, max_abs_diff, pricing_density
from ..qcalc import QParams
from ..utility import UtilitySpec
from .adjoint import AdjointPair, adjoints, distorted_density

log = logging.getLogger(__name__)

SCHEME = "exact"


@dataclass
class FBResult:
    strategy: Strategy
    solution: BsdeSolution
    adjoint: AdjointPair
    iterations: int
    trace: list[float] = field(default_factory=list)


def strategy_from_state(
    model: LatticeModel,
    p: QParams,
    uspec: UtilitySpec,
    v: float,
    ybar: AdaptedProcess,
    adj: AdjointPair,
    consume: bool = True,
) -> Strategy:
    """``c_k = I1(-v H_k Ybar_k**(-q) / (gamma Gamma_k))`` and ``xi = I3(v H_N / Gamma_N)``."""
    if consume:
        c = AdaptedProcess(
            [
                uspec.inv_du(
                    -v * adj.H[k] * np.power(ybar[k], -p.q) / (p.gamma * adj.Gamma[k])
                )
                for k in range(model.N)
            ]
        )
    else:
        c = AdaptedProcess.constant(model.N, 0.0, integrand=True)
    xi = uspec.inv_dg(v * adj.H.leaves / adj.Gamma.leaves, p)
    return Strategy(c, xi)


def solve_fb_system(
    model: LatticeModel,
    p: QParams,
    uspec: UtilitySpec,
    v: float,
    *,
    consume: bool = True,
    tol: float = 1e-10,
    max_iter: int = 200,
    damping: float = 0.5,
    damping_after: int = 50,
    density: str = "theta",
    warm_start: FBResult | None = None,
) -> FBResult:
    """Picard iteration on (strategy, transformed BSDE, adjoints).

    Starts from ``Ybar = 1``, ``Gamma = 1`` unless ``warm_start`` is given.
    Converged when the largest node-wise change of ``Ybar`` is at most ``tol``;
    after ``damping_after`` iterations the strategy update is relaxed by
    ``damping``.
    """
    if not v < 0:
        raise ParameterError(f"multiplier v must be negative, got {v}")
    if p.q <= 1:
        raise ParameterError("the forward-backward system requires q > 1")
    H = pricing_density(model, density)
    if warm_start is None:
        ybar = AdaptedProcess.constant(model.N, 1.0)
        adj = AdjointPair(AdaptedProcess.constant(model.N, 1.0), H)
    else:
        ybar = warm_start.solution.Y
        adj = warm_start.adjoint
    prev = None
    trace: list[float] = []
    for it in range(1, max_iter + 1):
        s = strategy_from_state(model, p, uspec, v, ybar, adj, consume)
        if prev is not None and it > damping_after:
            s = prev.combine(s, damping)
        sol = transformed_for_strategy(model, p, uspec, s, SCHEME)
        adj = adjoints(model, p, uspec, s.c, sol.Y, SCHEME, density)
        change = max_abs_diff(sol.Y, ybar)
        trace.append(change)
        ybar, prev = sol.Y, s
        if change <= tol:
            log.debug("fb system converged in %d iterations (v=%g)", it, v)
            return FBResult(s, sol, adj, it, trace)
    raise ConvergenceError(
        f"forward-backward iteration did not converge in {max_iter} iterations "
        f"(last change {trace[-1]:.3g})",
        trace,
    )


def consumption_forms_gap(
    model: LatticeModel, p: QParams, uspec: UtilitySpec, v: float, fb: FBResult,
    density: str = "theta",
) -> float:
    """Largest relative gap between the two expressions of optimal consumption.

    One uses the worst-case density ``D*`` and ``Dtilde``; the other uses
    ``H``, ``Ybar`` and ``Gamma``.
    """
    Dstar = distorted_density(model, fb.solution)
    Dt = pricing_density(model, density)
    y0 = fb.solution.Y0
    gap = 0.0
    for k in range(model.N):
        via_density = uspec.inv_du(-(v / p.gamma) * np.power(y0 * Dstar[k], -p.q) * Dt[k])
        via_adjoint = uspec.inv_du(
            -(v / p.gamma) * fb.adjoint.H[k] * np.power(fb.solution.Y[k], -p.q)
            / fb.adjoint.Gamma[k]
        )
        gap = max(gap, float(np.max(np.abs(via_density - via_adjoint) / via_adjoint)))
    return gap
