"""Seeded test problems for the inner robust problem.

Terminal cost and running cost are smooth functions of ``(t, B_t)``, so the
same instance can be laid on lattices of any size and refined consistently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import AdaptedProcess, LatticeModel


@dataclass(frozen=True)
class Instance:
    """``zeta = z0 + z1 (1 + cos(wz B_T + pz)) / 2`` and
    ``U = u0 + u1 (1 + cos(wu B_t + a t + pu)) / 2``."""

    z0: float
    z1: float
    wz: float
    pz: float
    u0: float
    u1: float
    wu: float
    a: float
    pu: float

    def zeta(self, model: LatticeModel) -> np.ndarray:
        B = model.brownian(model.N)
        return self.z0 + 0.5 * self.z1 * (1.0 + np.cos(self.wz * B + self.pz))

    def U(self, model: LatticeModel) -> AdaptedProcess:
        def running(k, B):
            t = k * model.dt
            return self.u0 + 0.5 * self.u1 * (1.0 + np.cos(self.wu * B + self.a * t + self.pu))

        return AdaptedProcess.from_function(model, running, integrand=True)


def random_instance(rng: np.random.Generator) -> Instance:
    """Draw coefficients in ranges where the implicit scheme is well resolved at small N."""
    z0, z1 = rng.uniform(0.0, 0.5), rng.uniform(0.0, 1.5)
    wz, pz = rng.uniform(0.5, 2.0), rng.uniform(0.0, 2.0 * math.pi)
    u0, u1 = rng.uniform(0.0, 0.05), rng.uniform(0.0, 0.1)
    wu, a, pu = rng.uniform(0.5, 2.0), rng.uniform(-1.0, 1.0), rng.uniform(0.0, 2.0 * math.pi)
    return Instance(z0, z1, wz, pz, u0, u1, wu, a, pu)
