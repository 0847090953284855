"""Equivalent measure changes on the lattice and Tsallis relative entropy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EquivalenceError
from .lattice import AdaptedProcess, LatticeModel, density_from_factors, expectation
from .qcalc import QParams, ln_q


@dataclass(frozen=True)
class MeasureChange:
    eta: AdaptedProcess
    D: AdaptedProcess


def density_from_eta(model: LatticeModel, eta: AdaptedProcess) -> MeasureChange:
    """Density ``D_k = prod_{j<k} (1 + eta_j dB_j)`` of the measure with drift ``eta``."""
    if len(eta) != model.N:
        raise EquivalenceError("eta must be defined on steps 0..N-1")
    for k in range(model.N):
        worst = float(np.max(np.abs(eta[k]))) * model.sqrt_dt
        if worst >= 1.0:
            raise EquivalenceError(
                f"|eta| sqrt(dt) = {worst:.6g} >= 1 at step {k}: "
                "a branch factor would be nonpositive"
            )
    return MeasureChange(eta=eta, D=density_from_factors(model, eta))


def entropy_density(x: np.ndarray, p: QParams) -> np.ndarray:
    """``x**q ln_q(x)``, the Tsallis entropy integrand."""
    return np.power(x, p.q) * ln_q(x, p)


def tsallis_entropy(model: LatticeModel, mc: MeasureChange, p: QParams) -> float:
    """Exact ``E_P[D_N**q ln_q(D_N)]`` over all leaf paths."""
    return expectation(entropy_density(mc.D.leaves, p))


def conditional_tsallis_entropy(
    model: LatticeModel, mc: MeasureChange, p: QParams, step: int, node: int
) -> float:
    """Conditional entropy at node ``node`` of step ``step`` (subtree summation)."""
    width = 2 ** (model.N - step)
    leaves = mc.D.leaves[node * width : (node + 1) * width]
    ratio = leaves / mc.D[step][node]
    return expectation(entropy_density(ratio, p))


def conditional_entropy_process(
    model: LatticeModel, mc: MeasureChange, p: QParams
) -> AdaptedProcess:
    """Conditional entropy at every node, via the one-step recursion

    ``H_k = E[d**q H_{k+1} | k] + E[d**q ln_q d | k]`` with ``d`` the branch factor.
    """
    vals = [np.zeros(model.n_leaves)]
    for k in range(model.N - 1, -1, -1):
        d = mc.D[k + 1] / np.repeat(mc.D[k], 2)
        dq = np.power(d, p.q)
        vals.append(
            (dq * vals[-1] + entropy_density(d, p)).reshape(-1, 2).mean(axis=1)
        )
    return AdaptedProcess(vals[::-1])


def quadratic_entropy_term(model: LatticeModel, mc: MeasureChange, p: QParams) -> float:
    """Left-point sum ``(q/2) E[sum_k eta_k**2 D_k**q dt]``."""
    total = 0.0
    for k in range(model.N):
        total += expectation(mc.eta[k] ** 2 * np.power(mc.D[k], p.q))
    return 0.5 * p.q * total * model.dt


def entropy_quadratic_identity_gap(
    model: LatticeModel, mc: MeasureChange, p: QParams
) -> float:
    """``H_q(Q|P)`` minus its continuous-time quadratic representation.

    Zero only in the continuous-time limit; on the lattice this is a
    discretization diagnostic.
    """
    return tsallis_entropy(model, mc, p) - quadratic_entropy_term(model, mc, p)


def deterministic_eta_gap(
    T: float, eta_profile: np.ndarray, p: QParams
) -> tuple[float, float]:
    """Entropy and identity gap for a time-only drift ``eta_k`` without path enumeration.

    ``N = len(eta_profile)`` steps of size ``T / N``.  Branch factors are
    independent across steps, so ``E[D_k**q]`` is a product of one-step
    moments and ``E[D_N] = 1``; no lattice is stored, so ``N`` is not capped.
    Returns ``(entropy, gap)``.
    """
    eta = np.asarray(eta_profile, dtype=float).reshape(-1)
    if eta.size == 0 or not T > 0:
        raise EquivalenceError("need T > 0 and at least one step")
    dt = T / eta.size
    eps = eta * np.sqrt(dt)
    if np.any(np.abs(eps) >= 1.0):
        raise EquivalenceError("|eta| sqrt(dt) >= 1")
    moments = 0.5 * ((1.0 + eps) ** p.q + (1.0 - eps) ** p.q)
    prefix = np.concatenate([[1.0], np.cumprod(moments)])
    entropy = (prefix[-1] - 1.0) / (p.q - 1.0)
    quad = 0.5 * p.q * float(np.sum(eta**2 * prefix[:-1])) * dt
    return float(entropy), float(entropy - quad)
