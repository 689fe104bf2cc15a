"""Ground-state computation by stabilized fixed-point iteration.

The solver iterates phi -> M^gamma * (c + D^sigma)^(-1) (a1 phi^p + a2 phi^q)
with the usual power-ratio stabilization factor M.  The exponent gamma is
taken from the dominant power q, the step is damped for the mixed-sign
nonlinearity, and the iterate is re-symmetrized every step so the limit is
even.  If the residual stalls, a preconditioned descent on the action
restricted to the Nehari manifold takes over before a final polish.

Sign conventions follow the existence taxonomy: positive states for
a = +1 (q odd) and a = -1 (p odd); for a = -1 with p even and q odd the
substitution psi = -phi reduces to the all-plus equation, which is solved
positive and negated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

import numpy as np
from scipy.optimize import brentq
from scipy.sparse.linalg import LinearOperator, minres

from .errors import DivergenceError, SolverError, UncoveredCaseError
from .functionals import (
    FunctionalReport,
    ModelParams,
    action,
    action_gradient,
    breve_params,
    functional_report,
    relative_residual,
)
from .spectral import Field, Grid, resample_scaled, sobolev_norm

__all__ = [
    "GaussianBump",
    "PriorSolution",
    "SechSquared",
    "SolverConfig",
    "GroundState",
    "solve_single_power",
    "solve_double_power",
    "rescale_in_speed",
    "continue_in_speed",
    "rescale_to_breve",
    "convergence_study",
    "ground_state_sign",
]


@dataclass(frozen=True)
class GaussianBump:
    """exp(-(x/width)^2) seed; width defaults to 1/sqrt(c)."""

    width: Optional[float] = None
    amplitude: float = 1.0


@dataclass(frozen=True)
class SechSquared:
    """sech^2(x/scale) seed."""

    scale: float = 1.0
    amplitude: float = 1.0


@dataclass(frozen=True)
class PriorSolution:
    """Warm start from an existing profile on the same grid."""

    profile: Field


InitialGuess = Union[GaussianBump, SechSquared, PriorSolution, None]


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = 2000
    tol_residual: float = 1e-10
    stab_exponent: Optional[float] = None  # default q/(q-1)
    damping: Optional[float] = None  # default 1.0, or 0.9 for mixed signs
    initial_guess: InitialGuess = None

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if not self.tol_residual > 0:
            raise ValueError("tol_residual must be positive")
        if self.stab_exponent is not None and not self.stab_exponent > 1.0:
            raise ValueError("stabilization exponent must exceed 1")
        if self.damping is not None and not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")


@dataclass(frozen=True)
class GroundState:
    profile: Field
    params: ModelParams
    report: FunctionalReport
    iterations: int
    converged: bool
    residual: float
    method: str
    monotone_modulus: bool

    @property
    def grid(self) -> Grid:
        return self.profile.grid


def ground_state_sign(p: int, q: int, a: int) -> int:
    """Sign of the ground state per the existence taxonomy.

    +1 for a=+1 (q odd) and for a=-1 with p odd; -1 for a=-1 with p even
    and q odd.  Raises for combinations with no covered ground state.
    """
    if a == 1:
        if q % 2 == 1:
            return 1
        raise UncoveredCaseError(
            f"a=+1 requires odd q for a ground state, got q={q}"
        )
    if p % 2 == 1:
        return 1
    if q % 2 == 1:
        return -1
    raise UncoveredCaseError(
        f"a=-1 with even p requires odd q, got p={p}, q={q}"
    )


def _seed_values(grid: Grid, params: ModelParams, guess: InitialGuess) -> np.ndarray:
    if isinstance(guess, PriorSolution):
        if guess.profile.grid != grid:
            raise ValueError("warm-start profile lives on a different grid")
        return guess.profile.values.copy()
    if isinstance(guess, SechSquared):
        return guess.amplitude / np.cosh(grid.x / guess.scale) ** 2
    if guess is None:
        guess = GaussianBump()
    width = guess.width if guess.width is not None else 1.0 / math.sqrt(params.c)
    return guess.amplitude * np.exp(-((grid.x / width) ** 2))


def _symmetrize(values: np.ndarray, mirror: np.ndarray) -> np.ndarray:
    return 0.5 * (values + values[mirror])


def _nehari_scale(grid: Grid, values: np.ndarray, params: ModelParams,
                  sym: np.ndarray) -> float:
    """t > 0 with K_c(t*u) = 0, or 0.0 when no root brackets."""
    a1, a2 = params.coeffs
    p, q = params.p, params.q
    dx = grid.dx
    spec = np.fft.fft(values)
    quad = float(
        np.real(np.vdot(spec, (params.c + sym) * spec)) * dx / values.size
    )
    ip = float(dx * np.sum(values ** (p + 1)))
    iq = float(dx * np.sum(values ** (q + 1)))

    def k_reduced(t: float) -> float:
        return quad - a1 * t ** (p - 1) * ip - a2 * t ** (q - 1) * iq

    hi = 1.0
    for _ in range(80):
        if k_reduced(hi) < 0:
            break
        hi *= 2.0
    else:
        return 0.0
    lo = hi / 2.0
    while k_reduced(lo) < 0 and lo > 1e-12:
        lo /= 2.0
    if k_reduced(lo) < 0:
        return 0.0
    return float(brentq(k_reduced, lo, hi, xtol=1e-14, rtol=1e-14))


def _nehari_descent(
    grid: Grid,
    values: np.ndarray,
    params: ModelParams,
    config: SolverConfig,
    sym: np.ndarray,
    mirror: np.ndarray,
    max_steps: int,
    history: list,
) -> np.ndarray:
    """Preconditioned descent on S_c restricted to the Nehari manifold."""
    inv = 1.0 / (params.c + sym)
    u = Field(grid, values)
    t = _nehari_scale(grid, u.values, params, sym)
    if t > 0:
        u = Field(grid, t * u.values)
    step = 0.5
    s_best = action(u, params)
    for _ in range(max_steps):
        grad = action_gradient(u, params)
        hgrad = np.fft.ifft(inv * np.fft.fft(grad.values)).real
        moved = False
        for _ in range(25):
            trial = _symmetrize(u.values - step * hgrad, mirror)
            t = _nehari_scale(grid, trial, params, sym)
            if t > 0:
                cand = Field(grid, t * trial)
                s_cand = action(cand, params)
                if s_cand < s_best - 1e-16 * abs(s_best):
                    u, s_best, moved = cand, s_cand, True
                    step = min(step * 1.3, 4.0)
                    break
            step *= 0.5
        res = relative_residual(u, params)
        history.append(res)
        if res <= config.tol_residual or not moved:
            break
    return u.values


def _petviashvili(
    params: ModelParams,
    grid: Grid,
    config: SolverConfig,
    seed: np.ndarray,
) -> tuple[Field, int, float, list, str]:
    a1, a2 = params.coeffs
    p, q, c = params.p, params.q, params.c
    gamma = config.stab_exponent or q / (q - 1.0)
    mixed = a1 * a2 < 0
    damping = config.damping if config.damping is not None else (0.9 if mixed else 1.0)
    sym = np.abs(grid.xi) ** params.sigma
    inv = 1.0 / (c + sym)
    mirror = grid.mirror_index
    dx = grid.dx
    n = grid.num_points

    values = _symmetrize(np.asarray(seed, float), mirror)
    peak0 = float(np.max(np.abs(values)))
    if peak0 == 0.0:
        raise SolverError("initial guess is identically zero")

    # A mixed-sign nonlinearity needs <N(u), u> > 0 before the power-ratio
    # factor makes sense; grow the seed amplitude until it is.
    if mixed:
        for _ in range(60):
            nl = a1 * values**p + a2 * values**q
            if dx * np.sum(nl * values) > 0:
                break
            values = values * 1.5
        else:
            raise SolverError("could not find a seed with positive nonlinear pairing")

    method = "petviashvili"
    history: list = []
    best = np.inf
    stall = 0
    descents = 0
    iterations = 0
    u = Field(grid, values)

    while iterations < config.max_iter:
        iterations += 1
        spec = np.fft.fft(values)
        nl = a1 * values**p + a2 * values**q
        num = float(np.real(np.vdot(spec, (c + sym) * spec)) * dx / n)
        den = float(dx * np.sum(nl * values))
        if den <= 0 or not np.isfinite(den):
            stall = 51  # power-ratio factor undefined; hand over to descent
        else:
            factor = (num / den) ** gamma
            update = factor * np.fft.ifft(inv * np.fft.fft(nl)).real
            values = _symmetrize(
                (1.0 - damping) * values + damping * update, mirror
            )
            peak = float(np.max(np.abs(values)))
            if not np.isfinite(peak) or peak > 1e6 * peak0:
                raise DivergenceError(
                    "iterate norm ran away", history=tuple(history)
                )
            u = Field(grid, values)
            res = relative_residual(u, params)
            history.append(res)
            if res <= config.tol_residual:
                return u, iterations, res, history, method
            if res < best * (1.0 - 1e-3):
                best, stall = res, 0
            else:
                stall += 1

        if stall > 50 and descents < 3:
            descents += 1
            method = "petviashvili+descent"
            values = _nehari_descent(
                grid, values, params, config, sym, mirror,
                max_steps=400, history=history,
            )
            u = Field(grid, values)
            res = relative_residual(u, params)
            if res <= config.tol_residual:
                return u, iterations, res, history, method
            # descent got close; let the fixed point polish from here
            best, stall = min(best, res), 0

    res = relative_residual(u, params)
    if res <= config.tol_residual:
        return u, iterations, res, history, method
    raise SolverError(
        f"no convergence after {iterations} iterations "
        f"(relative residual {res:.3e})",
        history=tuple(history),
    )


def _newton_polish(
    seed: np.ndarray,
    params: ModelParams,
    grid: Grid,
    tol: float,
    max_iter: int = 60,
) -> tuple[np.ndarray, int, float]:
    """Damped Newton iteration from a nearby profile.

    The fixed-point map loses stability deep in the mixed-sign regime
    (strongly defocusing lower power), where the stationary state still
    exists; Newton with a warm start does not care about the map's
    multiplier.  The linearization c + D^sigma - f'(u) is symmetric with
    one negative direction, so each step is solved by MINRES
    preconditioned with the positive part (c + D^sigma)^(-1).
    """
    a1, a2 = params.coeffs
    p, q, c = params.p, params.q, params.c
    sym = np.abs(grid.xi) ** params.sigma
    mirror = grid.mirror_index
    n = grid.num_points

    def lin(v: np.ndarray) -> np.ndarray:
        return np.fft.ifft((c + sym) * np.fft.fft(v)).real

    precond = LinearOperator(
        (n, n), matvec=lambda v: np.fft.ifft(np.fft.fft(v) / (c + sym)).real,
        dtype=float,
    )

    def residual(v: np.ndarray) -> np.ndarray:
        return lin(v) - a1 * v**p - a2 * v**q

    u = _symmetrize(np.asarray(seed, float), mirror)
    r = residual(u)
    for it in range(1, max_iter + 1):
        rel = float(np.max(np.abs(r)) / (c * np.max(np.abs(u))))
        if rel <= tol:
            return u, it - 1, rel
        weight = p * a1 * u ** (p - 1) + q * a2 * u ** (q - 1)
        jac = LinearOperator(
            (n, n), matvec=lambda v: lin(v) - weight * v, dtype=float
        )
        delta, info = minres(jac, r, M=precond, rtol=1e-8, maxiter=500)
        if info != 0 or not np.all(np.isfinite(delta)):
            break
        norm0 = float(np.linalg.norm(r))
        step = 1.0
        for _ in range(10):
            trial = _symmetrize(u - step * delta, mirror)
            r_trial = residual(trial)
            if float(np.linalg.norm(r_trial)) < norm0:
                u, r = trial, r_trial
                break
            step *= 0.5
        else:
            break  # no descent direction left at this resolution
    rel = float(np.max(np.abs(r)) / (c * np.max(np.abs(u))))
    return u, max_iter, rel


def _monotone_modulus(u: Field) -> bool:
    n = u.grid.num_points
    right = np.abs(u.values[n // 2 :])  # x in [0, L)
    tol = 1e-8 * u.max_abs
    return bool(np.all(np.diff(right) <= tol))


def _structure_checks(u: Field, sign: int) -> None:
    peak = u.max_abs
    defect = u.even_defect()
    if defect > 1e-8 * peak:
        raise SolverError(f"converged profile is not even (defect {defect:.2e})")
    signed = sign * u.values
    if np.any(signed < -1e-8 * peak):
        worst = float(np.min(signed)) / peak
        raise SolverError(
            f"converged profile changes sign (min {worst:.2e} relative)"
        )


def _finalize(
    u: Field,
    params: ModelParams,
    sign: int,
    iterations: int,
    residual: float,
    method: str,
) -> GroundState:
    _structure_checks(u, sign)
    report = functional_report(u, params)
    return GroundState(
        profile=u,
        params=params,
        report=report,
        iterations=iterations,
        converged=True,
        residual=residual,
        method=method,
        monotone_modulus=_monotone_modulus(u),
    )


def solve_single_power(
    sigma: float,
    power: int,
    grid: Grid,
    config: SolverConfig | None = None,
) -> GroundState:
    """Ground state of D^sigma(u) + u = u^power at unit speed.

    The profile is positive and even.  Internally the single power sits in
    whichever slot of the double-power form fits the p < q constraint.
    """
    if power < 2 or int(power) != power:
        raise ValueError(f"power must be an integer >= 2, got {power}")
    power = int(power)
    if power == 2:
        params = ModelParams(sigma=sigma, p=2, q=3, a=1, c=1.0, coeffs=(1.0, 0.0))
    else:
        params = ModelParams(sigma=sigma, p=2, q=power, a=1, c=1.0, coeffs=(0.0, 1.0))
    config = config or SolverConfig()
    if config.stab_exponent is None:
        config = replace(config, stab_exponent=power / (power - 1.0))
    seed = _seed_values(grid, params, config.initial_guess)
    u, iterations, res, _, method = _petviashvili(params, grid, config, seed)
    return _finalize(u, params, 1, iterations, res, method)


def solve_double_power(
    params: ModelParams,
    grid: Grid,
    config: SolverConfig | None = None,
) -> GroundState:
    """Ground state of D^sigma(phi) + c*phi = a1*phi^p + a2*phi^q.

    The existence taxonomy runs on parities and the sign of the lower
    coefficient: a1 > 0 with q odd, a1 < 0 with p odd, and a1 < 0 with
    p even and q odd (negative state, solved by sign substitution).
    Coefficient magnitudes are free as long as a2 > 0; amplitude scaling
    maps any such pair to the canonical (a, 1) form.
    """
    a1, a2 = params.coeffs
    if a2 <= 0:
        raise UncoveredCaseError(
            f"the top-power coefficient must be positive, got {params.coeffs}"
        )
    if a1 == 0:
        raise UncoveredCaseError(
            "lower coefficient vanishes; use solve_single_power instead"
        )
    config = config or SolverConfig()
    sign = ground_state_sign(params.p, params.q, 1 if a1 > 0 else -1)

    solve_params = params
    if sign < 0:
        # psi = -phi flips the lower-power sign when p is even and q odd
        solve_params = replace(params, a=1, coeffs=(-a1, a2))

    seed = _seed_values(grid, solve_params, config.initial_guess)
    if sign < 0 and isinstance(config.initial_guess, PriorSolution):
        seed = -seed  # the prior holds the negative state; the substituted problem is positive
    try:
        u, iterations, res, _, method = _petviashvili(solve_params, grid, config, seed)
    except SolverError:
        # a warm start close to the true state can rescue cases where the
        # fixed-point map itself is unstable; cold seeds cannot
        if not isinstance(config.initial_guess, PriorSolution):
            raise
        vals, iterations, res = _newton_polish(
            seed, solve_params, grid, tol=config.tol_residual
        )
        # max|r| cannot drop below the roundoff of (c + D^sigma) u at this
        # resolution, which dominates c*max|u| when c is small and the box
        # is fine; accept the floor when it sits above the tolerance
        floor = 8 * np.finfo(float).eps * (
            1.0 + np.max(np.abs(grid.xi)) ** params.sigma / params.c
        )
        if res > max(config.tol_residual, floor):
            raise
        u, method = Field(grid, vals), "newton"
    if sign < 0:
        u = Field(grid, -u.values)
    return _finalize(u, params, sign, iterations, res, method)


def rescale_in_speed(state: GroundState, c: float) -> Field:
    """Predict the profile at another speed from a solved one.

    Uses the speed map phi_c2(x) ~ r^(1/(q-1)) * phi_c1(r^(1/sigma) x) with
    r = c2/c1, which is exact when the p term is absent and a good warm
    start otherwise.
    """
    if c <= 0:
        raise ValueError(f"speed must be positive, got {c}")
    params = state.params
    ratio = c / params.c
    scale = ratio ** (1.0 / params.sigma)
    vals = ratio ** (1.0 / (params.q - 1.0)) * resample_scaled(state.profile, scale)
    if scale > 1.0:
        # scaled nodes beyond the box wrap around and would alias the peak
        # onto the boundary; the true profile is negligible there instead
        grid = state.grid
        vals = np.where(
            np.abs(grid.x) * scale < grid.half_length, vals, 0.0
        )
    return Field(state.grid, vals)


def continue_in_speed(
    params: ModelParams,
    c_list: Sequence[float],
    grid: Grid,
    config: SolverConfig | None = None,
) -> list[GroundState]:
    """Solve along ascending speeds, warm-starting from the previous profile."""
    cs = [float(c) for c in c_list]
    if any(b <= a for a, b in zip(cs, cs[1:])):
        raise ValueError("c_list must be strictly ascending")
    config = config or SolverConfig()
    out: list[GroundState] = []
    for c in cs:
        pc = params.with_c(c)
        cfg = config
        if out:
            guess = rescale_in_speed(out[-1], c)
            cfg = replace(config, initial_guess=PriorSolution(guess))
        out.append(solve_double_power(pc, grid, cfg))
    return out


def rescale_to_breve(state: GroundState) -> Field:
    """Map phi to the unit-speed profile phi_breve, exactly, node by node.

    phi_breve(y) = c^(-1/(q-1)) * phi(c^(-1/sigma) y) lands on the grid
    with half length c^(1/sigma) * L, reusing the original samples, so the
    transformation introduces no interpolation error.  The result solves
    D^sigma v + v = a*c^(-beta)*v^p + v^q with beta = (q-p)/(q-1).
    """
    params = state.params
    c = params.c
    scale = c ** (1.0 / params.sigma)
    amp = c ** (-1.0 / (params.q - 1.0))
    grid = state.grid
    new_grid = Grid(grid.half_length * scale, grid.num_points)
    return Field(new_grid, amp * state.profile.values)


@dataclass(frozen=True)
class ConvergenceRow:
    c: float
    distance: float
    residual: float


def convergence_study(
    params: ModelParams,
    c_list: Sequence[float],
    grid: Grid,
    config: SolverConfig | None = None,
) -> list[ConvergenceRow]:
    """H^(sigma/2) distance of the rescaled profile to the single-power state.

    Each speed is solved on a box shrunk by c^(-1/sigma), so the rescaled
    profile lands exactly on the reference grid where the limit profile
    (the pure-q ground state, negated in the sign-substitution case) lives.
    """
    cs = [float(c) for c in c_list]
    if any(c <= 0 for c in cs) or any(b <= a for a, b in zip(cs, cs[1:])):
        raise ValueError("c_list must be positive and strictly ascending")
    config = config or SolverConfig()
    sign = ground_state_sign(params.p, params.q, params.a)
    limit = solve_single_power(params.sigma, params.q, grid, config)
    target = Field(grid, sign * limit.profile.values)

    rows: list[ConvergenceRow] = []
    prev_breve: Optional[Field] = None
    for c in cs:
        sub_grid = Grid(grid.half_length * c ** (-1.0 / params.sigma), grid.num_points)
        cfg = config
        if prev_breve is not None:
            guess = c ** (1.0 / (params.q - 1.0)) * prev_breve.values
            cfg = replace(config, initial_guess=PriorSolution(Field(sub_grid, guess)))
        state = solve_double_power(params.with_c(c), sub_grid, cfg)
        breve = rescale_to_breve(state)
        # breve.grid agrees with the reference grid up to round-off in L
        breve_on_ref = Field(grid, breve.values)
        diff = breve_on_ref - target
        dist = sobolev_norm(diff, params.sigma / 2.0)
        resid = relative_residual(breve_on_ref, breve_params(params.with_c(c)))
        rows.append(ConvergenceRow(c=c, distance=dist, residual=resid))
        prev_breve = breve
    return rows
