"""Power utilities ``u = h = x**p0`` and the transformed terminal map ``g``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DomainError, ParameterError
from .qcalc import QParams, exp_q


@dataclass(frozen=True)
class UtilitySpec:
    """Power utility with exponent ``p0`` in (0, 1), used for both ``u`` and ``h``."""

    p0: float
    kind: str = "power"

    def __post_init__(self) -> None:
        if self.kind != "power":
            raise ParameterError(f"only power utilities are supported, got {self.kind!r}")
        if not (0.0 < self.p0 < 1.0):
            raise ParameterError(f"p0 must lie in (0, 1), got {self.p0}")

    def u(self, x):
        return np.power(np.asarray(x, dtype=float), self.p0)

    def du(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return self.p0 * np.power(x, self.p0 - 1.0)

    def d2u(self, x):
        x = np.asarray(x, dtype=float)
        return self.p0 * (self.p0 - 1.0) * np.power(x, self.p0 - 2.0)

    def inv_du(self, y):
        """``I1 = (u')^{-1}`` in closed form."""
        y = np.asarray(y, dtype=float)
        if np.any(~(y > 0)):
            raise DomainError("(u')^{-1} needs a positive argument")
        return np.power(y / self.p0, 1.0 / (self.p0 - 1.0))

    # h coincides with u for the power family
    h = u
    dh = du
    d2h = d2u

    def g(self, x, p: QParams):
        """``exp_q(-gamma h(x))``, valued in (0, 1]."""
        return exp_q(-p.gamma * self.h(x), p)

    def dg(self, x, p: QParams):
        """``g'(x) = -gamma g(x)**q h'(x)``."""
        return -p.gamma * np.power(self.g(x, p), p.q) * self.dh(x)

    def d2g(self, x, p: QParams):
        gx = self.g(x, p)
        dh = self.dh(x)
        return p.gamma * np.power(gx, p.q) * (
            p.q * p.gamma * np.power(gx, p.q - 1.0) * dh**2 - self.d2h(x)
        )

    def inv_dg(self, y, p: QParams, rtol: float = 1e-10):
        """``I3 = (g')^{-1}`` on (-inf, 0) by safeguarded Newton in ``log x``.

        In ``s = log x`` the map ``F(s) = log(-g'(e**s)) - log(-y)`` is strictly
        decreasing with slope confined to ``[-(1 - p0) - q p0/(q-1), -(1 - p0)]``,
        which gives an a priori bracket around any starting point.
        """
        if p.q <= 1.0:
            raise ParameterError("(g')^{-1} is implemented for q > 1 only")
        y = np.asarray(y, dtype=float)
        if np.any(~(y < 0)):
            raise DomainError("(g')^{-1} needs a negative argument")
        scalar = y.ndim == 0
        target = np.log(-np.atleast_1d(y))
        p0, q, gam = self.p0, p.q, p.gamma
        log_gp0 = np.log(gam * p0)

        def F(s):
            xp = np.exp(p0 * s)
            return (
                log_gp0
                + (p0 - 1.0) * s
                - q / (q - 1.0) * np.log1p((q - 1.0) * gam * xp)
                - target
            )

        def dF(s):
            xp = np.exp(p0 * s)
            return (p0 - 1.0) - q * gam * p0 * xp / (1.0 + (q - 1.0) * gam * xp)

        slope_min = 1.0 - p0
        # start from the root of the h'-only approximation
        s = (target - log_gp0) / (p0 - 1.0)
        f = F(s)
        lo = np.where(f > 0, s, s - np.abs(f) / slope_min)
        hi = np.where(f > 0, s + np.abs(f) / slope_min, s)
        for _ in range(200):
            step = f / dF(s)
            s_new = s - step
            outside = (s_new < lo) | (s_new > hi)
            s_new = np.where(outside, 0.5 * (lo + hi), s_new)
            f = F(s_new)
            lo = np.where(f > 0, s_new, lo)
            hi = np.where(f > 0, hi, s_new)
            done = np.max(np.abs(s_new - s)) <= 1e-13
            s = s_new
            if done or np.max(np.abs(f)) == 0.0:
                break
        if np.max(np.abs(f)) > rtol:
            raise ConvergenceError(f"(g')^{{-1}} did not converge, residual {np.max(np.abs(f)):.3g}")
        x = np.exp(s)
        return float(x[0]) if scalar else x
