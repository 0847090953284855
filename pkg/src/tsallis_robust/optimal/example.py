"""Terminal-wealth-only problem: forward-backward route vs. the static dual formula."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from ..lattice import LatticeModel, expectation, pricing_density
from ..qcalc import QParams, exp_q, ln_q
from ..utility import UtilitySpec
from .shooting import OptimizationReport, shoot_for_budget


@dataclass
class NoConsumptionReport:
    xi_fb: np.ndarray
    xi_dual: np.ndarray
    max_discrepancy: float
    v_star: float
    y: float
    V_fb: float
    V_formula: float
    report: OptimizationReport


def _neg_dg_inverse(uspec: UtilitySpec, p: QParams, target: float) -> float:
    """Solve ``-g'(xi) = target`` by scalar root-finding (independent of ``inv_dg``)."""

    def f(log_xi):
        return math.log(-float(uspec.dg(math.exp(log_xi), p))) - math.log(target)

    lo, hi = -1.0, 1.0
    while f(lo) < 0:
        lo *= 2.0
    while f(hi) > 0:
        hi *= 2.0
    return math.exp(brentq(f, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=500))


def dual_terminal_wealth(
    model: LatticeModel, p: QParams, uspec: UtilitySpec, x: float
) -> tuple[np.ndarray, float]:
    """``xi = ((-g)')^{-1}(y Dtilde_N)`` with ``y > 0`` fixed by ``E[Dtilde_N xi] = x``."""
    dens = pricing_density(model).leaves
    # leaves sharing a density value share xi
    uniq, inv = np.unique(np.round(dens, 14), return_inverse=True)

    def xi_of(y):
        return np.array([_neg_dg_inverse(uspec, p, y * d) for d in uniq])[inv]

    def cost(log_y):
        return expectation(dens * xi_of(math.exp(log_y))) - x

    lo, hi = -1.0, 1.0
    while cost(lo) < 0:
        lo -= 2.0
    while cost(hi) > 0:
        hi += 2.0
    y = math.exp(brentq(cost, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=500))
    return xi_of(y), y


def no_consumption_example(
    model: LatticeModel, p: QParams, uspec: UtilitySpec, x: float, **fb_kwargs
) -> NoConsumptionReport:
    """Solve with consumption switched off by both routes and compare."""
    rep = shoot_for_budget(model, p, uspec, x, consume=False, **fb_kwargs)
    xi_dual, y = dual_terminal_wealth(model, p, uspec, x)
    xi_fb = np.asarray(rep.strategy.xi)
    v_formula = -float(ln_q(expectation(exp_q(-p.gamma * uspec.h(xi_fb), p)), p)) / p.gamma
    return NoConsumptionReport(
        xi_fb=xi_fb,
        xi_dual=xi_dual,
        max_discrepancy=float(np.max(np.abs(xi_fb - xi_dual))),
        v_star=rep.v_star,
        y=y,
        V_fb=rep.Y0,
        V_formula=v_formula,
        report=rep,
    )
