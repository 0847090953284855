"""Independent reference computations, written without the package's vectorized code.

Paths are tuples of +1/-1 moves enumerated with itertools; one-step minimizations
use scalar bounded search.  Slow, but they share no code with the solvers.
"""

from __future__ import annotations

import itertools
import math

from scipy.optimize import minimize_scalar


def ln_q(x: float, q: float) -> float:
    return (x ** (1.0 - q) - 1.0) / (1.0 - q)


def exp_q(x: float, q: float) -> float:
    return (1.0 + (1.0 - q) * x) ** (1.0 / (1.0 - q))


def paths(n: int):
    """Paths in lattice order: node index bits read first move first, 0 = up."""
    return list(itertools.product((1, -1), repeat=n))


def inner_value(zeta, U, q: float, gamma: float, dt: float, N: int) -> float:
    """Nested one-step minimization by scalar search over the up-branch density.

    ``zeta(path)`` on full paths, ``U(prefix)`` on prefixes.
    """

    def value(prefix: tuple) -> float:
        if len(prefix) == N:
            return zeta(prefix)
        vu = value(prefix + (1,))
        vd = value(prefix + (-1,))

        def obj(du):
            dd = 2.0 - du
            pen = du**q * ln_q(du, q) + dd**q * ln_q(dd, q)
            return 0.5 * (du**q * vu + dd**q * vd) + 0.5 * pen / gamma

        res = minimize_scalar(obj, bounds=(1e-9, 2.0 - 1e-9), method="bounded",
                              options={"xatol": 1e-13})
        return float(res.fun) + U(prefix) * dt

    return value(())


def tsallis_entropy_paths(eta, q: float, dt: float, N: int) -> float:
    """``E[D**q ln_q D]`` by summing over all ``2**N`` paths, ``eta(prefix)`` per node."""
    s = math.sqrt(dt)
    total = 0.0
    for path in paths(N):
        D = 1.0
        for k in range(N):
            D *= 1.0 + eta(path[:k]) * path[k] * s
        total += D**q * ln_q(D, q)
    return total / 2**N


def price(xi, c, theta: float, dt: float, N: int) -> float:
    """``E[Dtilde_N xi] + sum_k E[Dtilde_k c_k] dt`` with per-step factor ``1 - theta dB``."""
    s = math.sqrt(dt)
    total = 0.0
    for path in paths(N):
        D = 1.0
        for k in range(N):
            total += D * c(path[:k]) * dt
            D *= 1.0 - theta * path[k] * s
        total += D * xi(path)
    return total / 2**N


def transformed_value_exact(g_leaf, u_run, q: float, gamma: float, dt: float, N: int) -> float:
    """Backward recursion ``y**(1-q) = m**(1-q) + (q-1) gamma u dt`` over path prefixes."""

    def value(prefix: tuple) -> float:
        if len(prefix) == N:
            return g_leaf(prefix)
        m = 0.5 * (value(prefix + (1,)) + value(prefix + (-1,)))
        return (m ** (1.0 - q) + (q - 1.0) * gamma * u_run(prefix) * dt) ** (1.0 / (1.0 - q))

    return value(())
