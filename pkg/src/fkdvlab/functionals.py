"""Variational functionals for the stationary problem.

The travelling-wave equation D^sigma(phi) + c*phi = a1*phi^p + a2*phi^q is
the Euler-Lagrange equation of the action S_c = E + c*M.  Everything in
this module is phrased through the integrals

    T      = ||D^(sigma/2) u||^2,
    P_r    = integral of u^(r+1),

and the mass-preserving dilation u_lam(x) = sqrt(lam) * u(lam * x), whose
second derivative of S_c at lam = 1 is the instability criterion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import NotStationaryError
from .spectral import (
    Field,
    derivative,
    fractional_derivative,
    integrate,
    resample_scaled,
    warn_if_tail_heavy,
)

__all__ = [
    "ModelParams",
    "FunctionalReport",
    "mass",
    "energy",
    "action",
    "nehari",
    "action_gradient",
    "relative_residual",
    "dilate",
    "dilation_generator",
    "pohozaev_residual",
    "scaling_criterion",
    "criterion_coefficients",
    "functional_report",
    "breve_exponent",
    "breve_params",
]


@dataclass(frozen=True)
class ModelParams:
    """Equation parameters.

    sigma in [1, 2] is the dispersion order, 2 <= p < q are the integer
    nonlinearity powers, a = +-1 the sign of the lower power, c > 0 the
    wave speed.  coeffs = (a1, a2) generalizes the nonlinearity
    a1*u^p + a2*u^q and defaults to (a, 1).
    """

    sigma: float
    p: int
    q: int
    a: int
    c: float = 1.0
    coeffs: tuple[float, float] = None  # type: ignore[assignment]

    def __post_init__(self):
        if not 1.0 <= self.sigma <= 2.0:
            raise ValueError(f"sigma must lie in [1, 2], got {self.sigma}")
        if int(self.p) != self.p or int(self.q) != self.q:
            raise ValueError("p and q must be integers")
        if not 2 <= self.p < self.q:
            raise ValueError(f"need 2 <= p < q, got p={self.p}, q={self.q}")
        if self.a not in (-1, 1):
            raise ValueError(f"a must be +1 or -1, got {self.a}")
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "q", int(self.q))
        object.__setattr__(self, "a", int(self.a))
        if self.coeffs is None:
            object.__setattr__(self, "coeffs", (float(self.a), 1.0))
        else:
            a1, a2 = self.coeffs
            object.__setattr__(self, "coeffs", (float(a1), float(a2)))

    @property
    def a1(self) -> float:
        return self.coeffs[0]

    @property
    def a2(self) -> float:
        return self.coeffs[1]

    @property
    def canonical(self) -> bool:
        """True when coeffs carry the standard normalization (a, 1)."""
        return self.coeffs == (float(self.a), 1.0)

    def with_c(self, c: float) -> "ModelParams":
        return replace(self, c=float(c))

    def as_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "p": self.p,
            "q": self.q,
            "a": self.a,
            "c": self.c,
            "coeffs": list(self.coeffs),
        }


@dataclass(frozen=True)
class FunctionalReport:
    """Scalar diagnostics of a profile under fixed parameters."""

    mass: float
    energy: float
    action: float
    nehari: float
    pohozaev: float
    criterion: float = float("nan")
    residual: float = float("nan")

    def as_dict(self) -> dict:
        return {
            "mass": self.mass,
            "energy": self.energy,
            "action": self.action,
            "nehari": self.nehari,
            "pohozaev": self.pohozaev,
            "criterion": self.criterion,
            "residual": self.residual,
        }


def _gradient_sq(u: Field, sigma: float) -> float:
    """T = ||D^(sigma/2) u||_{L2}^2 evaluated spectrally."""
    weight = np.abs(u.grid.xi) ** sigma
    n = u.grid.num_points
    return float(np.real(np.vdot(u.spectrum, weight * u.spectrum)) * u.grid.dx / n)


def _power_integral(u: Field, r: int) -> float:
    """P_r = integral of u^(r+1)."""
    return float(u.grid.dx * np.sum(u.values ** (r + 1)))


def mass(u: Field) -> float:
    """M(u) = 0.5 * ||u||^2."""
    return float(0.5 * u.grid.dx * np.sum(u.values**2))


def energy(u: Field, params: ModelParams) -> float:
    """E = 0.5*T - a1/(p+1) * P_p - a2/(q+1) * P_q."""
    a1, a2 = params.coeffs
    return (
        0.5 * _gradient_sq(u, params.sigma)
        - a1 / (params.p + 1) * _power_integral(u, params.p)
        - a2 / (params.q + 1) * _power_integral(u, params.q)
    )


def action(u: Field, params: ModelParams) -> float:
    return energy(u, params) + params.c * mass(u)


def nehari(u: Field, params: ModelParams) -> float:
    """K_c(u) = <S_c'(u), u> = T + c*||u||^2 - a1*P_p - a2*P_q."""
    a1, a2 = params.coeffs
    return (
        _gradient_sq(u, params.sigma)
        + 2.0 * params.c * mass(u)
        - a1 * _power_integral(u, params.p)
        - a2 * _power_integral(u, params.q)
    )


def action_gradient(u: Field, params: ModelParams) -> Field:
    """S_c'(u) = D^sigma u + c*u - a1*u^p - a2*u^q under the L2 pairing."""
    a1, a2 = params.coeffs
    lin = fractional_derivative(u, params.sigma).values + params.c * u.values
    return Field(u.grid, lin - a1 * u.values**params.p - a2 * u.values**params.q)


def relative_residual(u: Field, params: ModelParams) -> float:
    """max|S_c'(u)| / (c * max|u|); zero for the zero profile.

    Normalizing by c*max|u| keeps the measure invariant under the exact
    speed-c rescaling of profiles, so tolerances mean the same thing at
    c = 1 and c = 1000.
    """
    peak = u.max_abs
    if peak == 0.0:
        return 0.0
    return action_gradient(u, params).max_abs / (params.c * peak)


def dilate(u: Field, lam: float) -> Field:
    """Mass-preserving dilation sqrt(lam) * u(lam x) on the same grid.

    Band-limited evaluation at the scaled nodes; for lam > 1 the sample
    points wrap around the box, so a warning fires when the profile does
    not vanish at the boundary.
    """
    if not lam > 0:
        raise ValueError(f"dilation parameter must be positive, got {lam}")
    if lam == 1.0:
        return u
    vals = math.sqrt(lam) * resample_scaled(u, lam)
    if lam > 1.0:
        warn_if_tail_heavy(u.values)
    return Field(u.grid, vals)


def dilation_generator(u: Field) -> Field:
    """d/dlam at lam=1 of the dilation family: u/2 + x * u'."""
    return Field(u.grid, 0.5 * u.values + u.grid.x * derivative(u).values)


def pohozaev_residual(u: Field, params: ModelParams) -> float:
    """First dilation derivative of the action at lam = 1.

    (sigma/2)*T - a1*(p-1)/(2(p+1))*P_p - a2*(q-1)/(2(q+1))*P_q, which
    vanishes on stationary solutions.
    """
    a1, a2 = params.coeffs
    p, q = params.p, params.q
    return (
        0.5 * params.sigma * _gradient_sq(u, params.sigma)
        - a1 * (p - 1) / (2.0 * (p + 1)) * _power_integral(u, p)
        - a2 * (q - 1) / (2.0 * (q + 1)) * _power_integral(u, q)
    )


def criterion_coefficients(params: ModelParams) -> tuple[float, float]:
    """Weights of P_p and P_q in the second dilation derivative at lam = 1."""
    p, q, s = params.p, params.q, params.sigma
    a1, a2 = params.coeffs
    w_p = a1 * (p - 1) * (2.0 * s + 1.0 - p) / (4.0 * (p + 1))
    w_q = a2 * (q - 1) * (2.0 * s + 1.0 - q) / (4.0 * (q + 1))
    return (w_p, w_q)


def scaling_criterion(
    u: Field, params: ModelParams, residual_tol: float = 1e-4
) -> float:
    """Second derivative of lam -> S_c(u_lam) at lam = 1 on a stationary profile.

    Negative values certify orbital instability of the ground state.  The
    closed form uses the Pohozaev identity, so the input must actually be
    a stationary solution; the residual guard rejects anything else.
    """
    res = relative_residual(u, params)
    if not res <= residual_tol:
        raise NotStationaryError(
            f"relative residual {res:.3e} exceeds {residual_tol:.1e}; "
            "the dilation criterion only applies to stationary profiles"
        )
    w_p, w_q = criterion_coefficients(params)
    return w_p * _power_integral(u, params.p) + w_q * _power_integral(u, params.q)


def functional_report(
    u: Field, params: ModelParams, with_criterion: bool = True
) -> FunctionalReport:
    res = relative_residual(u, params)
    crit = float("nan")
    if with_criterion and res <= 1e-4:
        w_p, w_q = criterion_coefficients(params)
        crit = w_p * _power_integral(u, params.p) + w_q * _power_integral(
            u, params.q
        )
    return FunctionalReport(
        mass=mass(u),
        energy=energy(u, params),
        action=action(u, params),
        nehari=nehari(u, params),
        pohozaev=pohozaev_residual(u, params),
        criterion=crit,
        residual=res,
    )


def breve_exponent(params: ModelParams) -> float:
    """beta = (q - p)/(q - 1), the decay rate of the scaled low-power coefficient."""
    return (params.q - params.p) / (params.q - 1.0)


def breve_params(params: ModelParams) -> ModelParams:
    """Parameters of the unit-speed equation solved by the rescaled profile.

    phi(x) = c^(1/(q-1)) * phi_breve(c^(1/sigma) x) turns the equation into
    D^sigma v + v = a*c^(-beta)*v^p + v^q.
    """
    beta = breve_exponent(params)
    return ModelParams(
        sigma=params.sigma,
        p=params.p,
        q=params.q,
        a=params.a,
        c=1.0,
        coeffs=(params.a1 * params.c ** (-beta), params.a2),
    )
