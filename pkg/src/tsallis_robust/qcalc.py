"""Deformed logarithm/exponential and the quadratic generator coefficient."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError


@dataclass(frozen=True)
class QParams:
    """Entropy order ``q`` and ambiguity aversion ``gamma``.

    ``0 < q < 1`` is only accepted with ``experimental=True`` since uniqueness
    of the associated BSDE is not established there.
    """

    q: float
    gamma: float
    experimental: bool = False

    def __post_init__(self) -> None:
        if not np.isfinite(self.q) or self.q <= 0:
            raise ParameterError(f"q must be positive, got {self.q}")
        if self.q == 1.0:
            raise ParameterError("q = 1 is excluded; use q > 1")
        if self.q < 1.0:
            if not self.experimental:
                raise ParameterError(
                    f"q = {self.q} < 1 requires experimental=True"
                )
            warnings.warn(
                "0 < q < 1 is experimental: BSDE uniqueness is not guaranteed",
                RuntimeWarning,
                stacklevel=2,
            )
        if not np.isfinite(self.gamma) or self.gamma <= 0:
            raise ParameterError(f"gamma must be positive, got {self.gamma}")


def _pow_one_minus_q(x: np.ndarray, q: float) -> np.ndarray:
    # x**(1-q) through exp/log; x == 0 only reaches here for q < 1
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp((1.0 - q) * np.log(x[pos]))
    return out


def ln_q(x, p: QParams):
    """q-logarithm ``(x**(1-q) - 1) / (1 - q)``."""
    q = p.q
    arr = np.asarray(x, dtype=float)
    if q > 1:
        if np.any(~(arr > 0)):
            raise DomainError("ln_q requires x > 0 for q > 1")
    elif np.any(~(arr >= 0)):
        raise DomainError("ln_q requires x >= 0 for q < 1")
    out = (_pow_one_minus_q(np.atleast_1d(arr), q) - 1.0) / (1.0 - q)
    return out.reshape(arr.shape) if arr.ndim else float(out[0])


def exp_q(x, p: QParams):
    """q-exponential ``[1 + (1 - q) x] ** (1 / (1 - q))``."""
    q = p.q
    arr = np.asarray(x, dtype=float)
    base = np.atleast_1d(1.0 + (1.0 - q) * arr)
    if q > 1:
        if np.any(~(base > 0)):
            raise DomainError("exp_q requires 1 + (1-q) x > 0 for q > 1")
    elif np.any(~(base >= 0)):
        raise DomainError("exp_q requires 1 + (1-q) x >= 0 for q < 1")
    out = np.zeros_like(base)
    pos = base > 0
    out[pos] = np.exp(np.log(base[pos]) / (1.0 - q))
    return out.reshape(arr.shape) if arr.ndim else float(out[0])


def mu(y, p: QParams):
    """Coefficient ``(1/q)(1 - (1-q) gamma y)`` of the quadratic generator."""
    arr = np.asarray(y, dtype=float)
    bracket = 1.0 - (1.0 - p.q) * p.gamma * arr
    if np.any(~(bracket > 0)):
        raise DomainError("mu requires 1 - (1-q) gamma y > 0")
    out = bracket / p.q
    return out if arr.ndim else float(out)


def mu_via_exp_q(y, p: QParams):
    """Same quantity as :func:`mu`, written as ``(1/q) exp_q(-gamma y)**(1-q)``."""
    e = np.asarray(exp_q(-p.gamma * np.asarray(y, dtype=float), p))
    out = np.exp((1.0 - p.q) * np.log(e)) / p.q
    return out if out.ndim else float(out)
