"""Backward solvers for the quadratic BSDE, its transformed form, and its derivative.

Two one-step schemes are available for the transformed equation
``Ybar_t = g - int gamma Ybar**q U ds - int Zbar dB``:

``"implicit"``
    implicit Euler, ``y + gamma y**q U dt = E[Ybar_{k+1} | k]`` solved by
    bisection followed by Newton.
``"exact"``
    exact integration of the frozen-coefficient step,
    ``y**(1-q) = m**(1-q) + (q-1) gamma U dt``.  This is the dynamic
    programming recursion of the discrete robust problem, so its first-order
    adjoint calculus holds exactly on the lattice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DomainError, ParameterError
from .lattice import AdaptedProcess, LatticeModel, Strategy, cond_mean, two_branch_integrand
from .qcalc import QParams, exp_q, ln_q
from .utility import UtilitySpec

SCHEMES = ("implicit", "exact")
ROOT_TOL = 1e-12


@dataclass(frozen=True)
class BsdeSolution:
    Y: AdaptedProcess
    Z: AdaptedProcess
    transformed: bool
    scheme: str = "implicit"

    @property
    def Y0(self) -> float:
        return self.Y.root


@dataclass(frozen=True)
class Direction:
    """Perturbation ``(c - c0, xi - xi0)``; entries may be negative."""

    dc: AdaptedProcess
    dxi: np.ndarray

    @classmethod
    def between(cls, base: Strategy, other: Strategy) -> "Direction":
        return cls(
            AdaptedProcess([b - a for a, b in zip(base.c, other.c)]),
            np.asarray(other.xi - base.xi, dtype=float),
        )

    def step(self, base: Strategy, alpha: float) -> Strategy:
        c = AdaptedProcess([a + alpha * d for a, d in zip(base.c, self.dc)])
        return Strategy(c, base.xi + alpha * self.dxi)


def _check_scheme(scheme: str) -> None:
    if scheme not in SCHEMES:
        raise ParameterError(f"unknown scheme {scheme!r}; use one of {SCHEMES}")


def _implicit_step(m: np.ndarray, kappa: np.ndarray, q: float, step: int) -> np.ndarray:
    """Unique positive root of ``y + kappa y**q = m`` for each node."""
    y = m.copy()
    active = kappa > 0
    if not np.any(active):
        return y
    mm, kk = m[active], kappa[active]
    lo, hi = np.zeros_like(mm), mm.copy()
    for _ in range(8):
        mid = 0.5 * (lo + hi)
        f = mid + kk * np.power(mid, q) - mm
        lo = np.where(f < 0, mid, lo)
        hi = np.where(f < 0, hi, mid)
    # F is convex and increasing: Newton from the right bracket end descends monotonically
    z = hi.copy()
    for _ in range(100):
        f = z + kk * np.power(z, q) - mm
        df = 1.0 + q * kk * np.power(z, q - 1.0)
        z_new = z - f / df
        bad = (z_new < lo) | (z_new > hi)
        z_new = np.where(bad, 0.5 * (lo + hi), z_new)
        f_new = z_new + kk * np.power(z_new, q) - mm
        lo = np.where(f_new < 0, z_new, lo)
        hi = np.where(f_new < 0, hi, z_new)
        delta = np.max(np.abs(z_new - z))
        z = z_new
        if delta <= 1e-15 * max(1.0, float(np.max(z))):
            break
    resid = np.abs(z + kk * np.power(z, q) - mm)
    if np.max(resid) > ROOT_TOL:
        worst = int(np.flatnonzero(active)[np.argmax(resid)])
        raise ConvergenceError(
            f"implicit step root not found at step {step}, node {worst} "
            f"(residual {np.max(resid):.3g})"
        )
    y[active] = z
    return y


def _exact_step(m: np.ndarray, kappa: np.ndarray, q: float) -> np.ndarray:
    # kappa = gamma U dt
    return np.power(np.power(m, 1.0 - q) + (q - 1.0) * kappa, 1.0 / (1.0 - q))


def solve_transformed(
    model: LatticeModel,
    terminal: np.ndarray,
    U: AdaptedProcess,
    p: QParams,
    scheme: str = "implicit",
) -> BsdeSolution:
    """Backward solve of the transformed (monotone-generator) BSDE."""
    _check_scheme(scheme)
    terminal = np.asarray(terminal, dtype=float).reshape(-1)
    if terminal.size != model.n_leaves:
        raise ParameterError("terminal needs one value per leaf")
    if np.any(~(terminal > 0)) or np.any(terminal > 1.0):
        raise DomainError("transformed terminal must lie in (0, 1]")
    if len(U) != model.N or any(np.any(u < 0) for u in U):
        raise ParameterError("U must be a nonnegative integrand process")
    if scheme == "exact" and p.q < 1:
        raise ParameterError("the exact scheme requires q > 1")
    Y = [terminal]
    Z = []
    for k in range(model.N - 1, -1, -1):
        nxt = Y[-1]
        m = cond_mean(nxt)
        if np.any(~(m > 0)):
            raise DomainError(f"nonpositive conditional mean at step {k}")
        kappa = p.gamma * U[k] * model.dt
        if scheme == "implicit":
            y = _implicit_step(m, kappa, p.q, k)
        else:
            y = _exact_step(m, kappa, p.q)
        Z.append(two_branch_integrand(nxt, model.sqrt_dt))
        Y.append(y)
    return BsdeSolution(AdaptedProcess(Y[::-1]), AdaptedProcess(Z[::-1]), True, scheme)


def solve_untransformed(
    model: LatticeModel,
    zeta: np.ndarray,
    U: AdaptedProcess,
    p: QParams,
) -> BsdeSolution:
    """Implicit Euler on the quadratic BSDE directly (diagnostic cross-check).

    With ``Z_k`` fixed by the two-branch decomposition of ``Y_{k+1}``, the step
    ``y = m + U dt - (gamma/2) Z**2 dt / mu(y)`` is a quadratic in ``y``; the
    branch continuous with ``y = m + U dt`` at ``Z = 0`` is taken.
    """
    zeta = np.asarray(zeta, dtype=float).reshape(-1)
    if zeta.size != model.n_leaves:
        raise ParameterError("zeta needs one value per leaf")
    if np.any(zeta < 0) or any(np.any(u < 0) for u in U):
        raise ParameterError("zeta and U must be nonnegative")
    a = (p.q - 1.0) * p.gamma
    Y = [zeta]
    Z = []
    for k in range(model.N - 1, -1, -1):
        nxt = Y[-1]
        z = two_branch_integrand(nxt, model.sqrt_dt)
        s = cond_mean(nxt) + U[k] * model.dt
        K = 0.5 * p.gamma * p.q * z**2 * model.dt
        B = 1.0 - a * s
        disc = (1.0 + a * s) ** 2 - 4.0 * a * K
        if np.any(disc < 0):
            raise DomainError(
                f"mu-domain violated at step {k}: no real implicit step; refine N"
            )
        root = np.sqrt(disc)
        with np.errstate(divide="ignore", invalid="ignore"):
            y = np.where(B >= 0, 2.0 * (s - K) / (B + root), (root - B) / (2.0 * a))
        if np.any(~(1.0 + a * y > 0)):
            raise DomainError(f"mu-domain violated at step {k}; refine N")
        Z.append(z)
        Y.append(y)
    return BsdeSolution(AdaptedProcess(Y[::-1]), AdaptedProcess(Z[::-1]), False, "implicit")


def invert_transform(sol: BsdeSolution, p: QParams) -> BsdeSolution:
    """``Y = -(1/gamma) ln_q(Ybar)``, ``Z = -Zbar / (gamma Ybar**q)`` at each node."""
    if not sol.transformed:
        raise ParameterError("solution is not in transformed form")
    if any(np.any(~(y > 0)) for y in sol.Y):
        raise DomainError("Ybar must be positive to invert")
    Y = sol.Y.map(lambda y: -ln_q(y, p) / p.gamma)
    Z = AdaptedProcess(
        [-z / (p.gamma * np.power(sol.Y[k], p.q)) for k, z in enumerate(sol.Z)]
    )
    return BsdeSolution(Y, Z, False, sol.scheme)


def apply_transform(sol: BsdeSolution, p: QParams) -> BsdeSolution:
    """``Ybar = exp_q(-gamma Y)``, ``Zbar = -gamma Ybar**q Z`` at each node."""
    if sol.transformed:
        raise ParameterError("solution is already transformed")
    Ybar = sol.Y.map(lambda y: exp_q(-p.gamma * y, p))
    Zbar = AdaptedProcess(
        [-p.gamma * np.power(Ybar[k], p.q) * z for k, z in enumerate(sol.Z)]
    )
    return BsdeSolution(Ybar, Zbar, True, sol.scheme)


def step_factors(
    ybar: np.ndarray, U: np.ndarray, p: QParams, dt: float, scheme: str
) -> tuple[np.ndarray, np.ndarray]:
    """Sensitivities ``(rho, kappa)`` of one backward step.

    ``d Ybar_k = rho * d E[Ybar_{k+1}|k] + kappa * f_y' dt`` where the source
    is the generator's derivative in the control.  ``scheme="exp"`` gives the
    continuous-time factor ``exp(-gamma q Ybar**(q-1) U dt)``.
    """
    a = p.gamma * np.power(ybar, p.q - 1.0) * U * dt
    if scheme == "exact":
        base = 1.0 - (p.q - 1.0) * a
        if np.any(~(base > 0)):
            raise DomainError("exact-scheme step factor out of domain")
        return np.power(base, p.q / (p.q - 1.0)), np.ones_like(a)
    if scheme == "implicit":
        rho = 1.0 / (1.0 + p.q * a)
        return rho, rho
    if scheme == "exp":
        return np.exp(-p.q * a), np.ones_like(a)
    raise ParameterError(f"unknown scheme {scheme!r}")


def solve_derivative_bsde(
    model: LatticeModel,
    p: QParams,
    uspec: UtilitySpec,
    base: Strategy,
    direction: Direction,
    base_sol: BsdeSolution,
) -> BsdeSolution:
    """Gateaux derivative ``(d_alpha Ybar, d_alpha Zbar)`` at ``alpha = 0``.

    Linear backward recursion with terminal ``g'(xi0) dxi`` and source
    ``-gamma Ybar**q u'(c0) dc``; it is the exact derivative of the scheme
    that produced ``base_sol``, so difference quotients converge at first order.
    """
    if not base_sol.transformed:
        raise ParameterError("base solution must be in transformed form")
    dt = model.dt
    dY = [uspec.dg(base.xi, p) * direction.dxi]
    dZ = []
    for k in range(model.N - 1, -1, -1):
        ybar = base_sol.Y[k]
        c0 = base.c[k]
        rho, kappa = step_factors(ybar, uspec.u(c0), p, dt, base_sol.scheme)
        dc = direction.dc[k]
        with np.errstate(invalid="ignore"):
            src = np.where(
                dc == 0.0, 0.0, -p.gamma * np.power(ybar, p.q) * uspec.du(c0) * dc
            )
        dZ.append(two_branch_integrand(dY[-1], model.sqrt_dt))
        dY.append(rho * cond_mean(dY[-1]) + kappa * src * dt)
    return BsdeSolution(
        AdaptedProcess(dY[::-1]), AdaptedProcess(dZ[::-1]), True, base_sol.scheme
    )


def transformed_for_strategy(
    model: LatticeModel,
    p: QParams,
    uspec: UtilitySpec,
    s: Strategy,
    scheme: str = "exact",
) -> BsdeSolution:
    """Transformed BSDE with terminal ``g(xi)`` and source ``u(c)``."""
    U = AdaptedProcess([uspec.u(c) for c in s.c])
    return solve_transformed(model, uspec.g(s.xi, p), U, p, scheme)
