"""Binomial market lattice with path-indexed (non-recombining) storage.

Node ``i`` at step ``k`` has children ``2i`` (up move, increment ``+sqrt(dt)``)
and ``2i + 1`` (down move, increment ``-sqrt(dt)``), each with reference
probability 1/2.  Interest rate is zero and there is one risky asset.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ParameterError

MAX_STEPS = 22


class AdaptedProcess:
    """One real value per lattice node.

    A node process stores steps ``0..N``; an integrand process (``Z``, ``eta``,
    ``pi``, consumption) stores steps ``0..N-1`` where the value at a node
    multiplies the next increment.
    """

    __slots__ = ("_values",)

    def __init__(self, values: Sequence[np.ndarray]):
        vals = []
        for k, v in enumerate(values):
            arr = np.array(v, dtype=float).reshape(-1)
            if arr.size != 2**k:
                raise ParameterError(
                    f"step {k} needs {2**k} values, got {arr.size}"
                )
            arr.setflags(write=False)
            vals.append(arr)
        self._values = tuple(vals)

    @classmethod
    def constant(cls, n_steps: int, value: float, integrand: bool = False):
        last = n_steps - 1 if integrand else n_steps
        return cls([np.full(2**k, float(value)) for k in range(last + 1)])

    @classmethod
    def from_function(
        cls,
        model: "LatticeModel",
        fn: Callable[[int, np.ndarray], np.ndarray],
        integrand: bool = False,
    ):
        """Build from ``fn(step, brownian_values_at_step)``."""
        last = model.N - 1 if integrand else model.N
        return cls(
            [
                np.broadcast_to(np.asarray(fn(k, model.brownian(k)), float), (2**k,))
                for k in range(last + 1)
            ]
        )

    def __getitem__(self, k: int) -> np.ndarray:
        return self._values[k]

    def __len__(self) -> int:
        return len(self._values)

    def __iter__(self):
        return iter(self._values)

    @property
    def leaves(self) -> np.ndarray:
        return self._values[-1]

    @property
    def root(self) -> float:
        return float(self._values[0][0])

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "AdaptedProcess":
        return AdaptedProcess([fn(v) for v in self._values])

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(v))) for v in self._values)

    def __repr__(self) -> str:
        return f"AdaptedProcess(steps={len(self) - 1}, root={self.root:.6g})"


def max_abs_diff(a: AdaptedProcess, b: AdaptedProcess) -> float:
    if len(a) != len(b):
        raise ParameterError("processes have different lengths")
    return max(float(np.max(np.abs(x - y))) for x, y in zip(a, b))


@dataclass(frozen=True)
class Strategy:
    """Consumption rate per node (steps ``0..N-1``) and terminal wealth per leaf."""

    c: AdaptedProcess
    xi: np.ndarray

    def __post_init__(self) -> None:
        xi = np.array(self.xi, dtype=float).reshape(-1)
        if xi.size != 2 ** len(self.c):
            raise ParameterError("xi must have one value per leaf")
        if any(np.any(v < 0) for v in self.c) or np.any(xi < 0):
            raise ParameterError("consumption and terminal wealth must be >= 0")
        xi.setflags(write=False)
        object.__setattr__(self, "xi", xi)

    def combine(self, other: "Strategy", lam: float) -> "Strategy":
        """``(1 - lam) * self + lam * other``."""
        c = AdaptedProcess(
            [(1 - lam) * a + lam * b for a, b in zip(self.c, other.c)]
        )
        return Strategy(c, (1 - lam) * self.xi + lam * other.xi)


@dataclass(frozen=True)
class LatticeModel:
    T: float
    N: int
    sigma: float
    b: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.T) and self.T > 0):
            raise ParameterError(f"T must be positive, got {self.T}")
        if int(self.N) != self.N or self.N < 1:
            raise ParameterError(f"N must be a positive integer, got {self.N}")
        if self.N > MAX_STEPS:
            raise ParameterError(
                f"N = {self.N} exceeds the path-storage cap {MAX_STEPS}"
            )
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ParameterError(f"sigma must be positive, got {self.sigma}")
        if not np.isfinite(self.b):
            raise ParameterError("b must be finite")

    @property
    def dt(self) -> float:
        return self.T / self.N

    @property
    def sqrt_dt(self) -> float:
        return float(np.sqrt(self.dt))

    @property
    def theta(self) -> float:
        return self.b / self.sigma

    @property
    def n_leaves(self) -> int:
        return 2**self.N

    def increments(self, k: int) -> np.ndarray:
        """Increments leading into the ``2**k`` nodes of step ``k``."""
        return np.tile([self.sqrt_dt, -self.sqrt_dt], 2 ** (k - 1))

    def brownian(self, k: int) -> np.ndarray:
        """Brownian path value at each node of step ``k``."""
        if k == 0:
            return np.zeros(1)
        idx = np.arange(2**k)
        downs = np.zeros(2**k, dtype=int)
        for bit in range(k):
            downs += (idx >> bit) & 1
        return (k - 2 * downs) * self.sqrt_dt


def build_lattice(T: float, N: int, sigma: float, b: float) -> LatticeModel:
    if int(N) != N:
        raise ParameterError(f"N must be a positive integer, got {N}")
    return LatticeModel(T=float(T), N=int(N), sigma=float(sigma), b=float(b))


def branch_word(k: int, i: int) -> str:
    """``'u'``/``'d'`` word for node ``i`` at step ``k`` (first move first)."""
    return "".join("d" if (i >> (k - 1 - j)) & 1 else "u" for j in range(k))


def cond_mean(next_values: np.ndarray) -> np.ndarray:
    """One-step conditional mean under the reference measure."""
    return next_values.reshape(-1, 2).mean(axis=1)


def two_branch_integrand(next_values: np.ndarray, sqrt_dt: float) -> np.ndarray:
    """Martingale-representation integrand ``(up - down) / (2 sqrt(dt))``."""
    pairs = next_values.reshape(-1, 2)
    return (pairs[:, 0] - pairs[:, 1]) / (2.0 * sqrt_dt)


def expectation(values: np.ndarray) -> float:
    """Reference-measure expectation over the nodes of a single step."""
    return float(np.mean(values))


def density_from_factors(
    model: LatticeModel, eta: AdaptedProcess
) -> AdaptedProcess:
    """Multiplicative density with per-step factor ``1 + eta * dB``."""
    vals = [np.ones(1)]
    for k in range(model.N):
        factors = 1.0 + np.repeat(eta[k], 2) * model.increments(k + 1)
        vals.append(np.repeat(vals[-1], 2) * factors)
    return AdaptedProcess(vals)


DENSITY_CONVENTIONS = ("theta", "sigma_theta")


def density_drift(model: LatticeModel, convention: str = "theta") -> float:
    """Girsanov drift of the state-price density under a convention."""
    if convention == "theta":
        return -model.theta
    if convention == "sigma_theta":
        return -model.sigma * model.theta
    raise ParameterError(
        f"unknown density convention {convention!r}; use one of {DENSITY_CONVENTIONS}"
    )


def pricing_density(
    model: LatticeModel, convention: str = "theta"
) -> AdaptedProcess:
    """State-price density, discrete analogue of ``E(-theta . B)``.

    ``convention="sigma_theta"`` uses ``E(-sigma theta . B)`` instead; only
    ``"theta"`` is consistent with the budget identity.
    """
    drift = density_drift(model, convention)
    if abs(drift) * model.sqrt_dt >= 1.0:
        raise ParameterError(
            f"|drift| sqrt(dt) = {abs(drift) * model.sqrt_dt:.4g} >= 1; refine N"
        )
    return density_from_factors(
        model, AdaptedProcess.constant(model.N, drift, integrand=True)
    )


def wealth_forward(
    model: LatticeModel,
    x0: float,
    c: AdaptedProcess,
    pi: AdaptedProcess,
) -> AdaptedProcess:
    """Forward Euler wealth ``X + pi sigma (theta dt + dB) - c dt`` along each branch."""
    if len(c) != model.N or len(pi) != model.N:
        raise ParameterError("c and pi must be integrand processes (N steps)")
    dt = model.dt
    vals = [np.array([float(x0)])]
    for k in range(model.N):
        dB = model.increments(k + 1)
        gain = np.repeat(pi[k], 2) * model.sigma * (model.theta * dt + dB)
        vals.append(np.repeat(vals[-1], 2) + gain - np.repeat(c[k], 2) * dt)
    return AdaptedProcess(vals)


def replicate(model: LatticeModel, s: Strategy) -> tuple[float, AdaptedProcess]:
    """Initial capital and portfolio that finance ``s`` (backward pricing, r = 0).

    Returns ``(x0, pi)`` with ``x0 = E[D_N xi] + sum_k E[D_k c_k] dt`` under the
    ``theta`` state-price density.
    """
    theta = model.theta
    if abs(theta) * model.sqrt_dt >= 1.0:
        raise ParameterError("|theta| sqrt(dt) >= 1; refine N")
    p_up = 0.5 * (1.0 - theta * model.sqrt_dt)
    x_next = np.asarray(s.xi, dtype=float)
    pis = [None] * model.N
    for k in range(model.N - 1, -1, -1):
        pairs = x_next.reshape(-1, 2)
        pis[k] = (pairs[:, 0] - pairs[:, 1]) / (2.0 * model.sigma * model.sqrt_dt)
        x_next = p_up * pairs[:, 0] + (1.0 - p_up) * pairs[:, 1] + s.c[k] * model.dt
    return float(x_next[0]), AdaptedProcess(pis)


def budget(model: LatticeModel, s: Strategy, convention: str = "theta") -> float:
    """Direct summation ``E[D_N xi] + sum_k E[D_k c_k] dt``."""
    dens = pricing_density(model, convention)
    total = expectation(dens.leaves * s.xi)
    for k in range(model.N):
        total += expectation(dens[k] * s.c[k]) * model.dt
    return total
