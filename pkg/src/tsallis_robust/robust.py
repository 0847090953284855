"""Inner robust problem: worst-case measure under a Tsallis entropy penalty.

The discrete problem at a node is the nested one-step recursion

    V_k = U_k dt + min_d { E[d**q V_{k+1}] + (1/gamma) E[d**q ln_q d] }

over positive two-state densities ``d = 1 + eta dB`` with ``E[d] = 1``.  The
tower property of the entropy makes this recursion equal to the minimum over
all path measures on the lattice.

Writing ``d**q ln_q d = (d**q - d)/(q - 1)``, the bracket equals
``E[d**q A] - 1/(gamma (q-1))`` with ``A = V + 1/(gamma (q-1))``; the Lagrange
condition gives ``d* ~ A**(-1/(q-1)) ~ exp_q(-gamma V)``, hence

    d* = exp_q(-gamma V_next) / E[exp_q(-gamma V_next)]
    V_k = U_k dt - (1/gamma) ln_q E[exp_q(-gamma V_next)].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .lattice import AdaptedProcess, LatticeModel, cond_mean, expectation
from .measures import MeasureChange, density_from_eta, entropy_density, tsallis_entropy
from .qcalc import QParams, exp_q, ln_q, mu

DEFAULT_GRID_SIZE = 2001
DEFAULT_GRID_SPAN = 0.9


@dataclass(frozen=True)
class InnerValue:
    Y0: float
    value: AdaptedProcess
    eta: AdaptedProcess


def _check_inputs(model: LatticeModel, zeta, U: AdaptedProcess) -> np.ndarray:
    zeta = np.asarray(zeta, dtype=float).reshape(-1)
    if zeta.size != model.n_leaves:
        raise ParameterError("zeta needs one value per leaf")
    if len(U) != model.N:
        raise ParameterError("U must be an integrand process")
    if np.any(zeta < 0) or any(np.any(u < 0) for u in U):
        raise ParameterError("zeta and U must be nonnegative")
    return zeta


def default_eta_grid(
    model: LatticeModel, size: int = DEFAULT_GRID_SIZE, span: float = DEFAULT_GRID_SPAN
) -> np.ndarray:
    """Equally spaced drifts over ``span`` of the equivalence interval, odd size keeps 0."""
    if size < 3 or size % 2 == 0:
        raise ParameterError("grid size must be odd and >= 3")
    if not (0 < span < 1):
        raise ParameterError("grid span must lie in (0, 1)")
    grid = np.linspace(-span, span, size)
    grid[size // 2] = 0.0  # linspace can miss the midpoint by rounding
    return grid / model.sqrt_dt


def one_step_objective(
    d_up: np.ndarray,
    d_down: np.ndarray,
    v_up: np.ndarray,
    v_down: np.ndarray,
    p: QParams,
) -> np.ndarray:
    """``E[d**q V_next] + (1/gamma) E[d**q ln_q d]`` for two-state densities."""
    dq_u, dq_d = np.power(d_up, p.q), np.power(d_down, p.q)
    pen = entropy_density(d_up, p) + entropy_density(d_down, p)
    return 0.5 * (dq_u * v_up + dq_d * v_down) + 0.5 * pen / p.gamma


def inner_dp_grid(
    model: LatticeModel,
    zeta,
    U: AdaptedProcess,
    p: QParams,
    eta_grid: np.ndarray | None = None,
) -> InnerValue:
    """Brute-force backward induction with a grid search over the one-step drift."""
    zeta = _check_inputs(model, zeta, U)
    grid = default_eta_grid(model) if eta_grid is None else np.sort(np.asarray(eta_grid, float))
    if np.max(np.abs(grid)) * model.sqrt_dt >= 1.0:
        raise ParameterError("eta grid leaves the equivalence interval")
    if not np.any(grid == 0.0):
        raise ParameterError("eta grid must contain 0")
    step = grid * model.sqrt_dt
    d_up, d_down = 1.0 + step, 1.0 - step
    vals = [zeta]
    etas = []
    for k in range(model.N - 1, -1, -1):
        pairs = vals[-1].reshape(-1, 2)
        obj = one_step_objective(
            d_up[None, :], d_down[None, :], pairs[:, :1], pairs[:, 1:], p
        )
        best = np.argmin(obj, axis=1)
        etas.append(grid[best])
        vals.append(obj[np.arange(obj.shape[0]), best] + U[k] * model.dt)
    value = AdaptedProcess(vals[::-1])
    return InnerValue(value.root, value, AdaptedProcess(etas[::-1]))


def inner_closed_form(
    model: LatticeModel, zeta, U: AdaptedProcess, p: QParams
) -> InnerValue:
    """Exact backward recursion with the closed-form one-step minimizer."""
    if p.q <= 1:
        raise ParameterError("closed-form minimizer requires q > 1")
    zeta = _check_inputs(model, zeta, U)
    vals = [zeta]
    etas = []
    for k in range(model.N - 1, -1, -1):
        e = exp_q(-p.gamma * vals[-1], p)
        mean_e = cond_mean(e)
        d_up = e.reshape(-1, 2)[:, 0] / mean_e
        etas.append((d_up - 1.0) / model.sqrt_dt)
        vals.append(U[k] * model.dt - ln_q(mean_e, p) / p.gamma)
    value = AdaptedProcess(vals[::-1])
    return InnerValue(value.root, value, AdaptedProcess(etas[::-1]))


def evaluate_objective(
    model: LatticeModel,
    zeta,
    U: AdaptedProcess,
    p: QParams,
    mc: MeasureChange,
) -> float:
    """``E[D_N**q zeta + sum_k D_k**q U_k dt] + (1/gamma) H_q(Q|P)`` by exhaustive summation."""
    zeta = _check_inputs(model, zeta, U)
    total = expectation(np.power(mc.D.leaves, p.q) * zeta)
    for k in range(model.N):
        total += expectation(np.power(mc.D[k], p.q) * U[k]) * model.dt
    return total + tsallis_entropy(model, mc, p) / p.gamma


def optimal_measure(model: LatticeModel, zeta, U: AdaptedProcess, p: QParams) -> MeasureChange:
    """Worst-case measure emitted by :func:`inner_closed_form`."""
    return density_from_eta(model, inner_closed_form(model, zeta, U, p).eta)


def continuous_eta_from_bsde(Y: AdaptedProcess, Z: AdaptedProcess, p: QParams) -> AdaptedProcess:
    """``-gamma Z / (q mu(Y))`` node-wise from an untransformed BSDE solution."""
    return AdaptedProcess(
        [-p.gamma * z / (p.q * mu(Y[k], p)) for k, z in enumerate(Z)]
    )
