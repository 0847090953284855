"""Adjoint processes and first-order optimality residuals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..bsde import BsdeSolution, Direction, solve_derivative_bsde, step_factors, transformed_for_strategy
from ..lattice import (
    AdaptedProcess,
    LatticeModel,
    Strategy,
    cond_mean,
    density_from_factors,
    expectation,
    pricing_density,
    replicate,
)
from ..qcalc import QParams
from ..utility import UtilitySpec


@dataclass(frozen=True)
class AdjointPair:
    Gamma: AdaptedProcess
    H: AdaptedProcess


def adjoints(
    model: LatticeModel,
    p: QParams,
    uspec: UtilitySpec,
    c: AdaptedProcess,
    ybar: AdaptedProcess,
    form: str = "exact",
    density: str = "theta",
) -> AdjointPair:
    """``Gamma`` (pathwise decay, ``Gamma_0 = 1``) and ``H`` (state-price density).

    ``form`` selects the one-step decay of ``Gamma``: ``"exp"`` is
    ``exp(-gamma q Ybar**(q-1) u(c) dt)``; ``"exact"`` and ``"implicit"`` are
    the sensitivities of the matching BSDE scheme, which make the adjoint
    identities hold exactly on the lattice.
    """
    vals = [np.ones(1)]
    for k in range(model.N):
        rho, _ = step_factors(ybar[k], uspec.u(c[k]), p, model.dt, form)
        vals.append(np.repeat(vals[-1] * rho, 2))
    return AdjointPair(AdaptedProcess(vals), pricing_density(model, density))


def consumption_weights(
    model: LatticeModel, p: QParams, uspec: UtilitySpec, c: AdaptedProcess,
    ybar: AdaptedProcess, Gamma: AdaptedProcess, form: str,
) -> list[np.ndarray]:
    """Per-node weight multiplying ``f_c`` in the adjoint identity (``Gamma_k`` times the scheme's source factor)."""
    out = []
    for k in range(model.N):
        _, kappa = step_factors(ybar[k], uspec.u(c[k]), p, model.dt, form)
        out.append(Gamma[k] * kappa)
    return out


def distorted_density(model: LatticeModel, sol: BsdeSolution) -> AdaptedProcess:
    """Density of the worst-case measure at a strategy, ``D_{k+1}/D_k = Ybar_{k+1}/E[Ybar_{k+1}|k]``.

    The branch factor is ``1 + eta dB`` with ``eta_k = Zbar_k / E[Ybar_{k+1}|k]``,
    the lattice form of ``Zbar / Ybar``.
    """
    eta = AdaptedProcess(
        [sol.Z[k] / cond_mean(sol.Y[k + 1]) for k in range(model.N)]
    )
    return density_from_factors(model, eta)


@dataclass(frozen=True)
class ResidualStats:
    terminal_max: float
    terminal_mean: float
    consumption_max: float
    consumption_mean: float
    adjoint_terminal_max: float
    adjoint_consumption_max: float
    form_gap: float

    @property
    def max(self) -> float:
        if np.isnan(self.consumption_max):
            return self.terminal_max
        return max(self.terminal_max, self.consumption_max)


def _rel(lhs: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    return np.abs(lhs - rhs) / np.abs(rhs)


def max_principle_residuals(
    model: LatticeModel,
    p: QParams,
    uspec: UtilitySpec,
    candidate: Strategy,
    v: float,
    density: str = "theta",
    sol: BsdeSolution | None = None,
) -> ResidualStats:
    """Relative residuals of the terminal and consumption optimality conditions.

    Density form:  ``-gamma Ybar_0**q D_N**q h'(xi) = v Dtilde_N`` on leaves and
    ``-gamma Ybar_0**q D_k**q u'(c_k) = v Dtilde_k`` on nodes ``k < N``.
    Adjoint form:  ``Gamma_N g'(xi) = v H_N`` and ``Gamma_k f_c(k) = v H_k``.
    ``form_gap`` is the largest leaf/node difference between the two forms'
    relative residuals.
    """
    if v >= 0:
        raise ValueError("multiplier v must be negative")
    if sol is None:
        sol = transformed_for_strategy(model, p, uspec, candidate, "exact")
    D0 = distorted_density(model, sol)
    Dt = pricing_density(model, density)
    scale = -p.gamma * sol.Y0**p.q
    term = _rel(scale * np.power(D0.leaves, p.q) * uspec.dh(candidate.xi), v * Dt.leaves)
    with np.errstate(divide="ignore", invalid="ignore"):
        cons = [
            _rel(
                scale * np.power(D0[k], p.q) * uspec.du(candidate.c[k]), v * Dt[k]
            )
            for k in range(model.N)
        ]
    adj = adjoints(model, p, uspec, candidate.c, sol.Y, sol.scheme, density)
    a_term = _rel(adj.Gamma.leaves * uspec.dg(candidate.xi, p), v * adj.H.leaves)
    with np.errstate(divide="ignore", invalid="ignore"):
        a_cons = [
            _rel(
                adj.Gamma[k] * (-p.gamma) * np.power(sol.Y[k], p.q)
                * uspec.du(candidate.c[k]),
                v * adj.H[k],
            )
            for k in range(model.N)
        ]
    form_gap = float(np.max(np.abs(term - a_term)))
    if all(np.all(c == 0) for c in candidate.c):
        # no consumption: the consumption condition is void
        nan = float("nan")
        cons_stats = (nan, nan, nan)
    else:
        cons_all = np.concatenate(cons)
        a_cons_all = np.concatenate(a_cons)
        cons_stats = (
            float(np.max(cons_all)), float(np.mean(cons_all)), float(np.max(a_cons_all))
        )
        form_gap = max(form_gap, float(np.max(np.abs(cons_all - a_cons_all))))
    return ResidualStats(
        terminal_max=float(np.max(term)),
        terminal_mean=float(np.mean(term)),
        consumption_max=cons_stats[0],
        consumption_mean=cons_stats[1],
        adjoint_terminal_max=float(np.max(a_term)),
        adjoint_consumption_max=cons_stats[2],
        form_gap=form_gap,
    )


def adjoint_identity_sides(
    model: LatticeModel,
    p: QParams,
    uspec: UtilitySpec,
    base: Strategy,
    other: Strategy,
    v: float,
    scheme: str = "exact",
) -> tuple[float, float]:
    """Both sides of the variational identity relating the two derivatives.

    Left:  ``d_alpha Ybar_0 - v d_alpha X_0`` from the derivative BSDE and the
    (linear) replication map.  Right: the adjoint-weighted expectation
    ``E[(Gamma_N g'(xi0) - v H_N) dxi + sum_k (w_k f_c(k) - v H_k) dc_k dt]``.
    """
    direction = Direction.between(base, other)
    base_sol = transformed_for_strategy(model, p, uspec, base, scheme)
    dY = solve_derivative_bsde(model, p, uspec, base, direction, base_sol)
    x_other, _ = replicate(model, other)
    x_base, _ = replicate(model, base)
    lhs = dY.Y0 - v * (x_other - x_base)

    adj = adjoints(model, p, uspec, base.c, base_sol.Y, scheme)
    weights = consumption_weights(model, p, uspec, base.c, base_sol.Y, adj.Gamma, scheme)
    rhs = expectation(
        (adj.Gamma.leaves * uspec.dg(base.xi, p) - v * adj.H.leaves) * direction.dxi
    )
    for k in range(model.N):
        f_c = -p.gamma * np.power(base_sol.Y[k], p.q) * uspec.du(base.c[k])
        rhs += expectation((weights[k] * f_c - v * adj.H[k]) * direction.dc[k]) * model.dt
    return float(lhs), float(rhs)
