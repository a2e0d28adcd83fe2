"""Pressure laws and the Riemann-invariant change of variables.

The invariants are R_pm = Rt(rho) +- q/rho with Rt(rho) = int_1^rho
sqrt(p'(r))/r dr.  Isothermal and isentropic laws have closed forms for Rt
and its inverse; the AGA law falls back to adaptive quadrature plus a
bracketed monotone root find.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import DomainError, NumericalError, ValidationError

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class GasState:
    """Density rho (kg/m^3) and mass flux density q = rho*v (kg/(m^2 s))."""

    rho: float
    q: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.rho) and self.rho > 0):
            raise DomainError(f"density must be positive and finite, got {self.rho}")
        if not math.isfinite(self.q):
            raise DomainError(f"mass flux must be finite, got {self.q}")

    @property
    def velocity(self) -> float:
        return self.q / self.rho


class PressureLaw:
    """Base class: a strictly increasing pressure function p(rho).

    Subclasses implement pressure/dpressure/density_from_pressure and may
    override rtilde/rtilde_inverse with closed forms.  The generic versions
    use adaptive quadrature (relative tolerance 1e-12) and a bracketed root
    find, which is what the AGA law relies on.
    """

    rho_ref: float

    _QUAD_RTOL = 1e-12

    def pressure(self, rho: ArrayLike) -> ArrayLike:
        raise NotImplementedError

    def dpressure(self, rho: ArrayLike) -> ArrayLike:
        raise NotImplementedError

    def density_from_pressure(self, p: ArrayLike) -> ArrayLike:
        raise NotImplementedError

    def sound_speed(self) -> float:
        """c = sqrt(p'(rho_ref))."""
        return math.sqrt(float(self.dpressure(self.rho_ref)))

    def _check_rho(self, rho: ArrayLike) -> None:
        arr = np.asarray(rho, dtype=float)
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
            raise DomainError(f"density must be positive and finite, got {rho}")

    def _validate_monotone(self) -> None:
        # Sampled strict monotonicity over a wide admissible range.
        rhos = self.rho_ref * np.logspace(-3, 3, 61)
        ps = np.asarray(self.pressure(rhos), dtype=float)
        if not np.all(np.isfinite(ps)) or np.any(np.diff(ps) <= 0.0):
            raise ValidationError("pressure law is not strictly increasing on the sampled range")

    def rtilde(self, rho: ArrayLike) -> ArrayLike:
        self._check_rho(rho)
        arr = np.asarray(rho, dtype=float)
        if arr.ndim == 0:
            return self._rtilde_scalar(float(arr))
        return np.array([self._rtilde_scalar(r) for r in arr.ravel()]).reshape(arr.shape)

    def _rtilde_scalar(self, rho: float) -> float:
        def integrand(r: float) -> float:
            return math.sqrt(float(self.dpressure(r))) / r

        val, err = quad(integrand, 1.0, rho, epsabs=0.0, epsrel=self._QUAD_RTOL, limit=300)
        scale = max(abs(val), 1e-300)
        if not math.isfinite(val) or err > 1e-8 * scale + 1e-13:
            raise NumericalError(f"rtilde quadrature did not converge at rho={rho}")
        return val

    def rtilde_inverse(self, r: ArrayLike) -> ArrayLike:
        arr = np.asarray(r, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise DomainError(f"rtilde_inverse needs finite input, got {r}")
        if arr.ndim == 0:
            return self._rtilde_inverse_scalar(float(arr))
        return np.array([self._rtilde_inverse_scalar(x) for x in arr.ravel()]).reshape(arr.shape)

    def _rtilde_inverse_scalar(self, r: float) -> float:
        if r == 0.0:
            return 1.0
        lo, hi = 1.0, 1.0
        if r > 0.0:
            while self._rtilde_scalar(hi) < r:
                hi *= 2.0
                if hi > 1e300:
                    raise NumericalError(f"rtilde_inverse bracket blew up for r={r}")
        else:
            while self._rtilde_scalar(lo) > r:
                lo /= 2.0
                if lo < 1e-300:
                    raise NumericalError(f"rtilde_inverse bracket underflow for r={r}")
        return brentq(lambda rho: self._rtilde_scalar(rho) - r, lo, hi, rtol=1e-15, maxiter=300)


@dataclass(frozen=True)
class IsothermalLaw(PressureLaw):
    """p(rho) = c^2 rho."""

    c: float = 340.0
    rho_ref: float = 1.0

    def __post_init__(self) -> None:
        if not self.c > 0 or not self.rho_ref > 0:
            raise ValidationError("isothermal law needs c > 0 and rho_ref > 0")
        self._validate_monotone()

    def pressure(self, rho: ArrayLike) -> ArrayLike:
        return self.c ** 2 * np.asarray(rho, dtype=float)

    def dpressure(self, rho: ArrayLike) -> ArrayLike:
        return np.full_like(np.asarray(rho, dtype=float), self.c ** 2)

    def density_from_pressure(self, p: ArrayLike) -> ArrayLike:
        p = np.asarray(p, dtype=float)
        if np.any(p <= 0):
            raise DomainError("isothermal density needs positive pressure")
        return p / self.c ** 2

    def rtilde(self, rho: ArrayLike) -> ArrayLike:
        self._check_rho(rho)
        return self.c * np.log(rho)

    def rtilde_inverse(self, r: ArrayLike) -> ArrayLike:
        return np.exp(np.asarray(r, dtype=float) / self.c)


@dataclass(frozen=True)
class IsentropicLaw(PressureLaw):
    """p(rho) = a rho^gamma with a > 0, gamma > 1."""

    a: float
    gamma: float
    rho_ref: float = 1.0

    def __post_init__(self) -> None:
        if not self.a > 0 or not self.gamma > 1 or not self.rho_ref > 0:
            raise ValidationError("isentropic law needs a > 0 and gamma > 1")
        self._validate_monotone()

    @property
    def _k(self) -> float:
        # rtilde(rho) = k * (rho^((gamma-1)/2) - 1)
        return 2.0 * math.sqrt(self.a * self.gamma) / (self.gamma - 1.0)

    def pressure(self, rho: ArrayLike) -> ArrayLike:
        return self.a * np.asarray(rho, dtype=float) ** self.gamma

    def dpressure(self, rho: ArrayLike) -> ArrayLike:
        return self.a * self.gamma * np.asarray(rho, dtype=float) ** (self.gamma - 1.0)

    def density_from_pressure(self, p: ArrayLike) -> ArrayLike:
        p = np.asarray(p, dtype=float)
        if np.any(p <= 0):
            raise DomainError("isentropic density needs positive pressure")
        return (p / self.a) ** (1.0 / self.gamma)

    def rtilde(self, rho: ArrayLike) -> ArrayLike:
        self._check_rho(rho)
        rho = np.asarray(rho, dtype=float)
        return self._k * (rho ** ((self.gamma - 1.0) / 2.0) - 1.0)

    def rtilde_inverse(self, r: ArrayLike) -> ArrayLike:
        base = 1.0 + np.asarray(r, dtype=float) / self._k
        if np.any(base <= 0.0):
            raise DomainError(f"invariant midpoint {r} below the isentropic vacuum bound")
        return base ** (2.0 / (self.gamma - 1.0))


@dataclass(frozen=True)
class AgaLaw(PressureLaw):
    """American Gas Association model p(rho) = Rs*T rho / (1 - alpha rho), alpha <= 0."""

    rs_t: float
    alpha: float = 0.0
    rho_ref: float = 1.0

    def __post_init__(self) -> None:
        if not self.rs_t > 0:
            raise ValidationError("AGA law needs Rs*T > 0")
        if self.alpha > 0:
            raise ValidationError("AGA law needs alpha <= 0")
        if not self.rho_ref > 0:
            raise ValidationError("AGA law needs rho_ref > 0")
        self._validate_monotone()

    def pressure(self, rho: ArrayLike) -> ArrayLike:
        rho = np.asarray(rho, dtype=float)
        denom = 1.0 - self.alpha * rho
        if np.any(denom <= 0.0):
            raise DomainError("AGA pressure undefined: 1 - alpha*rho <= 0")
        return self.rs_t * rho / denom

    def dpressure(self, rho: ArrayLike) -> ArrayLike:
        rho = np.asarray(rho, dtype=float)
        denom = 1.0 - self.alpha * rho
        if np.any(denom <= 0.0):
            raise DomainError("AGA pressure undefined: 1 - alpha*rho <= 0")
        return self.rs_t / denom ** 2

    def density_from_pressure(self, p: ArrayLike) -> ArrayLike:
        p = np.asarray(p, dtype=float)
        if np.any(p <= 0):
            raise DomainError("AGA density needs positive pressure")
        rho = p / (self.rs_t + self.alpha * p)
        if np.any(rho <= 0):
            raise DomainError("pressure outside the AGA admissible range")
        return rho


def riemann_from_state(law: PressureLaw, rho: float, q: float) -> Tuple[float, float]:
    """(R+, R-) = (Rt(rho) + q/rho, Rt(rho) - q/rho)."""
    rt = float(law.rtilde(rho))
    v = q / rho
    return rt + v, rt - v


def state_from_riemann(law: PressureLaw, r_plus: float, r_minus: float) -> GasState:
    """Invert the invariant map: rho = Rt^-1((R+ + R-)/2), q = rho (R+ - R-)/2."""
    mid = (r_plus + r_minus) / 2.0
    rho = float(law.rtilde_inverse(mid))
    v = (r_plus - r_minus) / 2.0
    return GasState(rho=rho, q=rho * v)


def pressure_from_riemann(law: PressureLaw, r_plus: float, r_minus: float) -> float:
    """p evaluated at the density encoded by the invariant midpoint; always > 0."""
    mid = (r_plus + r_minus) / 2.0
    return float(law.pressure(law.rtilde_inverse(mid)))


def source_sigma(nu: float, r_plus: ArrayLike, r_minus: ArrayLike) -> ArrayLike:
    """Friction source nu * |R+ - R-| * (R+ - R-)."""
    if nu < 0:
        raise ValidationError("source_sigma needs nu >= 0")
    d = np.asarray(r_plus, dtype=float) - np.asarray(r_minus, dtype=float)
    out = nu * np.abs(d) * d
    return float(out) if np.ndim(out) == 0 else out


def quasilinear_eigenvalues(
    law: PressureLaw, r_plus: float, r_minus: float
) -> Tuple[float, float]:
    """Diagnostic eigenvalues (v + sqrt(p'(rho)), v - sqrt(p'(rho))).

    These are the characteristic speeds of the quasilinear system before the
    constant-speed simplification; at the reference state they reduce to +-c.
    """
    mid = (r_plus + r_minus) / 2.0
    v = (r_plus - r_minus) / 2.0
    s = math.sqrt(float(law.dpressure(law.rtilde_inverse(mid))))
    return v + s, v - s


def mach_number(law: PressureLaw, r_plus: float, r_minus: float) -> float:
    """v / c with v from the invariants and c the reference sound speed."""
    return (r_plus - r_minus) / 2.0 / law.sound_speed()
