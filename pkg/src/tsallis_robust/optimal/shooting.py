"""Budget shooting on the multiplier ``v`` and the associated dual quantities."""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import brentq

from ..bsde import transformed_for_strategy
from ..errors import ConvergenceError, ParameterError
from ..lattice import LatticeModel, Strategy, replicate
from ..qcalc import QParams, ln_q
from ..utility import UtilitySpec
from .adjoint import ResidualStats, max_principle_residuals
from .fbsystem import FBResult, solve_fb_system

MAX_EXPANSIONS = 60


@dataclass
class OptimizationReport:
    v_star: float
    strategy: Strategy
    X0: float
    Ybar0: float
    Y0: float
    residuals: ResidualStats
    iterations: int
    evaluations: int
    fb: FBResult


class _BudgetCurve:
    """``v -> X_0`` of the forward-backward strategy, warm-started along the search."""

    def __init__(self, model, p, uspec, consume, fb_kwargs):
        self.model, self.p, self.uspec = model, p, uspec
        self.consume = consume
        self.fb_kwargs = fb_kwargs
        self.last: FBResult | None = None
        self.calls = 0
        self.iterations = 0

    def solve(self, v: float) -> FBResult:
        try:
            fb = solve_fb_system(
                self.model, self.p, self.uspec, v, consume=self.consume,
                warm_start=self.last, **self.fb_kwargs,
            )
        except ConvergenceError:
            if self.last is None:
                raise
            fb = solve_fb_system(
                self.model, self.p, self.uspec, v, consume=self.consume, **self.fb_kwargs
            )
        self.last = fb
        self.calls += 1
        self.iterations += fb.iterations
        return fb

    def x0(self, v: float) -> float:
        return replicate(self.model, self.solve(v).strategy)[0]


def bracket_multiplier(curve: _BudgetCurve, x: float) -> tuple[float, float]:
    """Geometric expansion from ``v = -1`` until ``X_0(v)`` straddles ``x``.

    ``X_0`` decreases as ``|v|`` grows, so the result ``(lo, hi)`` satisfies
    ``X_0(lo) >= x >= X_0(hi)`` with ``|lo| <= |hi|``.
    """
    v = -1.0
    val = curve.x0(v)
    for _ in range(MAX_EXPANSIONS):
        nxt = v * 2.0 if val > x else v / 2.0
        nval = curve.x0(nxt)
        if (val - x) * (nval - x) <= 0:
            return (v, nxt) if abs(v) < abs(nxt) else (nxt, v)
        v, val = nxt, nval
    raise ConvergenceError(f"no multiplier bracket for x = {x} after {MAX_EXPANSIONS} expansions")


def shoot_for_budget(
    model: LatticeModel,
    p: QParams,
    uspec: UtilitySpec,
    x: float,
    *,
    consume: bool = True,
    budget_rtol: float = 1e-6,
    density: str = "theta",
    **fb_kwargs,
) -> OptimizationReport:
    """Find ``v* < 0`` whose forward-backward strategy costs exactly ``x``.

    The search runs in ``log(-v)`` with Brent's bracketed method and is pushed
    well below ``budget_rtol``; the final budget error is checked against it.
    """
    if not x > 0:
        raise ParameterError(f"initial wealth must be positive, got {x}")
    curve = _BudgetCurve(model, p, uspec, consume, dict(density=density, **fb_kwargs))
    lo, hi = bracket_multiplier(curve, x)
    s_star = brentq(
        lambda s: curve.x0(-math.exp(s)) - x,
        math.log(-lo), math.log(-hi), xtol=1e-14, rtol=1e-15, maxiter=200,
    )
    v_star = -math.exp(s_star)
    fb = curve.solve(v_star)
    x0 = replicate(model, fb.strategy)[0]
    if abs(x0 - x) > budget_rtol * x:
        raise ConvergenceError(f"budget miss |X0 - x| = {abs(x0 - x):.3g} exceeds tolerance")
    res = max_principle_residuals(model, p, uspec, fb.strategy, v_star, density, fb.solution)
    ybar0 = fb.solution.Y0
    return OptimizationReport(
        v_star=v_star,
        strategy=fb.strategy,
        X0=x0,
        Ybar0=ybar0,
        Y0=-ln_q(ybar0, p) / p.gamma,
        residuals=res,
        iterations=curve.iterations,
        evaluations=curve.calls,
        fb=fb,
    )


def auxiliary_value(
    model: LatticeModel,
    p: QParams,
    uspec: UtilitySpec,
    candidate: Strategy,
    x: float,
    v: float,
) -> float:
    """Lagrangian ``Ybar_0 + v (x - X_0)`` of a candidate strategy."""
    ybar0 = transformed_for_strategy(model, p, uspec, candidate, "exact").Y0
    return ybar0 + v * (x - replicate(model, candidate)[0])


def dual_value(
    model: LatticeModel, p: QParams, uspec: UtilitySpec, v: float, **fb_kwargs
) -> tuple[float, FBResult]:
    """``inf_{c, xi} {Ybar_0 - v X_0}``, attained by the forward-backward strategy."""
    fb = solve_fb_system(model, p, uspec, v, **fb_kwargs)
    return fb.solution.Y0 - v * replicate(model, fb.strategy)[0], fb
