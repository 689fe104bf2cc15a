"""Pseudo-spectral time evolution and virial diagnostics.

Integrates u_t + (a1 u^p + a2 u^q)_x - (D^sigma u)_x = 0 on the periodic
box with a fourth-order exponential time-differencing scheme: the stiff
dispersive multiplier i*xi*|xi|^sigma is propagated exactly, only the flux
term is stepped.  The phi-function coefficients are evaluated as contour
means over a circle of unit radius around each h*lambda, which is exact
for entire functions and avoids the cancellation of the direct formulas
at small wavenumbers.

Around a ground state the module tracks the translation parameter through
the orthogonality condition (u(. + z), phi_x) = 0, measures the distance
to the orbit {phi(. - y)} in H^{sigma/2}, and evaluates the localized
virial integral used to certify escape from the orbit's neighborhood.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import ConfigError, GridMismatchError, ModulationLostError
from .functionals import (
    ModelParams,
    action,
    dilate,
    dilation_generator,
    energy,
    mass,
)
from .ground_state import GroundState, SolverConfig, solve_double_power
from .spectral import Field, Grid, default_grid, inner, sobolev_norm, translate

# circle quadrature points for the phi-function means; 32 is enough for
# machine precision since the integrand is entire
_CONTOUR_POINTS = 32

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Dilation:
    """Initial perturbation u0 -> sqrt(lam) u0(lam x) with lam = 1 - mu."""

    mu: float

    def __post_init__(self):
        if not 0.0 < abs(self.mu) < 1.0:
            raise ConfigError(
                f"dilation strength must satisfy 0 < |mu| < 1, got {self.mu}"
            )


Perturbation = Union[Dilation, None]


@dataclass(frozen=True)
class EvolutionConfig:
    """Fixed-step integration plan.

    The linear part is treated exactly, so the step size is limited only
    by the flux term; dt around dx/max|f'(u)| is safe.  tube_exit and
    neighborhood are absolute H^{sigma/2} radii; left unset they default
    to 0.1 and 0.5 times the reference norm.
    """

    dt: float
    t_end: float
    dealias: bool = True
    sample_stride: int = 10
    perturbation: Perturbation = None
    tube_exit: Optional[float] = None
    neighborhood: Optional[float] = None
    stop_on_exit: bool = False
    snapshot_times: Optional[tuple] = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= self.dt:
            raise ConfigError(
                f"t_end = {self.t_end} shorter than a single step dt = {self.dt}"
            )
        if self.sample_stride < 1 or int(self.sample_stride) != self.sample_stride:
            raise ConfigError(
                f"sample_stride must be a positive integer, got {self.sample_stride}"
            )
        if self.tube_exit is not None and not self.tube_exit > 0:
            raise ConfigError("tube_exit must be positive when given")
        if self.neighborhood is not None and not self.neighborhood > 0:
            raise ConfigError("neighborhood must be positive when given")
        if self.snapshot_times is not None:
            times = tuple(float(t) for t in self.snapshot_times)
            if any(t < 0 for t in times):
                raise ConfigError("snapshot times must be non-negative")
            object.__setattr__(self, "snapshot_times", tuple(sorted(times)))


@dataclass(frozen=True)
class Trajectory:
    """Sampled diagnostics of one run.

    Drifts are relative to the t = 0 values.  shift, tube_distance and
    virial are NaN wherever no reference state was supplied or modulation
    tracking had been lost.  exit_time is the first sample time at which
    tube_distance exceeded the configured radius, if any.
    """

    times: np.ndarray
    mass_drift: np.ndarray
    energy_drift: np.ndarray
    shift: np.ndarray
    tube_distance: np.ndarray
    virial: np.ndarray
    final: Field
    exit_time: Optional[float] = None
    blow_up: bool = False
    blow_up_time: Optional[float] = None
    modulation_lost_time: Optional[float] = None
    accuracy_warning: bool = False
    snapshots: tuple = ()  # (time, Field) pairs at the requested times

    def __len__(self) -> int:
        return len(self.times)


def _rfft_wavenumbers(grid: Grid) -> np.ndarray:
    return 2.0 * np.pi * np.fft.rfftfreq(grid.num_points, d=grid.dx)


def _etd_tables(lin: np.ndarray, dt: float):
    """E, E2 and the four stage weights of the fourth-order ETD scheme."""
    z = dt * lin
    m = _CONTOUR_POINTS
    r = np.exp(2j * np.pi * (np.arange(m) + 0.5) / m)
    zr = z[:, None] + r[None, :]
    ez = np.exp(zr)
    q = dt * np.mean((np.exp(zr / 2.0) - 1.0) / zr, axis=1)
    f1 = dt * np.mean((-4.0 - zr + ez * (4.0 - 3.0 * zr + zr**2)) / zr**3, axis=1)
    f2 = dt * np.mean((2.0 + zr + ez * (-2.0 + zr)) / zr**3, axis=1)
    f3 = dt * np.mean((-4.0 - 3.0 * zr - zr**2 + ez * (4.0 - zr)) / zr**3, axis=1)
    return np.exp(z), np.exp(z / 2.0), q, f1, f2, f3


def _relative(value: float, reference: float) -> float:
    return (value - reference) / max(abs(reference), 1e-9)


def evolve(
    u0: Field,
    params: ModelParams,
    config: EvolutionConfig,
    reference: Optional[GroundState] = None,
    weight: Optional[Field] = None,
) -> Trajectory:
    """Integrate from u0 and sample diagnostics every sample_stride steps.

    When a reference ground state is given the samples include the
    tracked shift, the H^{sigma/2} distance to its translation orbit and,
    if a virial weight is also given, the localized virial integral.
    NaN or overflow terminates the run early with the blow-up flag set
    and the last finite state preserved.
    """
    if not np.all(np.isfinite(u0.values)):
        raise ConfigError("initial state contains non-finite values")
    if params.sigma < 4.0 / 3.0:
        warnings.warn(
            f"sigma = {params.sigma} is below the well-posedness range "
            "[4/3, 2]; the run is exploratory",
            stacklevel=2,
        )
    if weight is not None and reference is None:
        raise ConfigError("a virial weight requires a reference state")

    if config.perturbation is not None:
        u0 = dilate(u0, 1.0 - config.perturbation.mu)

    grid = u0.grid
    n = grid.num_points
    a1, a2 = params.coeffs
    p, q_exp = params.p, params.q

    xi = _rfft_wavenumbers(grid)
    lin = 1j * xi * np.abs(xi) ** params.sigma
    flux = -1j * xi.copy()
    if n % 2 == 0:
        # odd multipliers must vanish on the unpaired Nyquist mode
        lin[-1] = 0.0
        flux[-1] = 0.0
    keep = np.ones(xi.size, dtype=bool)
    if config.dealias:
        keep = np.arange(xi.size) <= n / 3.0

    e_full, e_half, qw, f1, f2, f3 = _etd_tables(lin, config.dt)

    def nonlinear(vh: np.ndarray) -> np.ndarray:
        v = np.fft.irfft(np.where(keep, vh, 0.0), n)
        w = np.fft.rfft(a1 * v**p + a2 * v**q_exp)
        return flux * np.where(keep, w, 0.0)

    tracker = _OrbitTracker(params, config, reference, weight) if reference else None

    times: list[float] = []
    m_drift: list[float] = []
    e_drift: list[float] = []
    shifts: list[float] = []
    tubes: list[float] = []
    virials: list[float] = []

    mass0 = mass(u0)
    energy0 = energy(u0, params)
    warned = False
    exit_time: Optional[float] = None
    blow_up = False
    blow_up_time: Optional[float] = None
    wanted = list(config.snapshot_times or ())
    snapshots: list[tuple[float, Field]] = []

    def sample(t: float, u: Field) -> None:
        nonlocal warned, exit_time
        while wanted and wanted[0] <= t:
            # first sample at or past the requested time carries it
            wanted.pop(0)
            snapshots.append((t, u))
        times.append(t)
        dm = _relative(mass(u), mass0)
        de = _relative(energy(u, params), energy0)
        m_drift.append(dm)
        e_drift.append(de)
        if not warned and max(abs(dm), abs(de)) > 1e-6:
            warnings.warn(
                f"conserved-quantity drift {max(abs(dm), abs(de)):.2e} at "
                f"t = {t:g} exceeds 1e-6; the step size is too coarse",
                stacklevel=3,
            )
            warned = True
        if tracker is None:
            shifts.append(math.nan)
            tubes.append(math.nan)
            virials.append(math.nan)
            return
        z, tube, vir = tracker.measure(t, u)
        shifts.append(z)
        tubes.append(tube)
        virials.append(vir)
        if exit_time is None and tube > tracker.exit_radius:
            exit_time = t

    nsteps = int(round(config.t_end / config.dt))
    nsteps = max(nsteps, 1)

    uh = np.fft.rfft(u0.values)
    sample(0.0, u0)

    step = 0
    while step < nsteps:
        if config.stop_on_exit and exit_time is not None:
            break
        prev = uh
        nu = nonlinear(uh)
        sa = e_half * uh + qw * nu
        na = nonlinear(sa)
        sb = e_half * uh + qw * na
        nb = nonlinear(sb)
        sc = e_half * sa + qw * (2.0 * nb - nu)
        nc = nonlinear(sc)
        uh = e_full * uh + f1 * nu + 2.0 * f2 * (na + nb) + f3 * nc
        step += 1
        t = step * config.dt
        if not np.all(np.isfinite(uh)):
            blow_up = True
            blow_up_time = t
            uh = prev
            break
        if step % config.sample_stride == 0 or step == nsteps:
            u_now = Field(grid, np.fft.irfft(uh, n))
            if u_now.max_abs > 1e12:
                blow_up = True
                blow_up_time = t
                break
            sample(t, u_now)

    final = Field(grid, np.fft.irfft(uh, n))
    return Trajectory(
        times=np.asarray(times),
        mass_drift=np.asarray(m_drift),
        energy_drift=np.asarray(e_drift),
        shift=np.asarray(shifts),
        tube_distance=np.asarray(tubes),
        virial=np.asarray(virials),
        final=final,
        exit_time=exit_time,
        blow_up=blow_up,
        blow_up_time=blow_up_time,
        modulation_lost_time=tracker.lost_at if tracker else None,
        accuracy_warning=warned,
        snapshots=tuple(snapshots),
    )


class _OrbitTracker:
    """Per-sample shift, tube distance and virial around a reference state.

    Modulation tracking warm-starts each solve from the previous shift
    advanced by c*dt; once the solve fails or the state leaves the
    modulation neighborhood the shift and virial stay NaN while the tube
    distance keeps being reported.
    """

    def __init__(self, params, config, reference: GroundState, weight):
        self.phi = reference
        self.weight = weight
        self.speed = params.c
        norm = sobolev_norm(reference.profile, params.sigma / 2.0)
        self.exit_radius = (
            config.tube_exit if config.tube_exit is not None else 0.1 * norm
        )
        self.neighborhood = (
            config.neighborhood if config.neighborhood is not None else 0.5 * norm
        )
        self.lost_at: Optional[float] = None
        self._last: Optional[tuple[float, float]] = None  # (t, shift)

    def measure(self, t: float, u: Field) -> tuple[float, float, float]:
        tube = tube_distance(u, self.phi)
        if self.lost_at is not None:
            return math.nan, tube, math.nan
        seed = None
        if self._last is not None:
            t0, z0 = self._last
            seed = z0 + self.speed * (t - t0)
        try:
            z = modulation_shift(u, self.phi, seed=seed, neighborhood=self.neighborhood)
        except ModulationLostError:
            self.lost_at = t
            return math.nan, tube, math.nan
        self._last = (t, z)
        vir = math.nan
        if self.weight is not None:
            vir = virial_value(u, self.phi, self.weight, shift=z)
        return z, tube, vir


def _phase_profile(coeff: np.ndarray, xi: np.ndarray):
    """y -> Re sum_k coeff_k exp(i xi_k y) and its derivative."""

    def value(y: float) -> float:
        return float(np.sum(coeff * np.exp(1j * xi * y)).real)

    def slope(y: float) -> float:
        return float(np.sum(1j * xi * coeff * np.exp(1j * xi * y)).real)

    return value, slope


def _wrap_shift(j: int, grid: Grid) -> float:
    y = j * grid.dx
    if y > grid.half_length:
        y -= 2.0 * grid.half_length
    return y


def tube_distance(u: Field, phi: GroundState) -> float:
    """inf over y of ||u - phi(. - y)||_{H^{sigma/2}}.

    The translation spectrum turns the squared distance into a constant
    minus a weighted cross-correlation, so the global search is a single
    inverse transform over grid shifts; golden-section then refines the
    best one over its two neighbouring cells.
    """
    grid = u.grid
    if grid != phi.grid:
        raise GridMismatchError("state and reference live on different grids")
    sigma = phi.params.sigma
    w = 1.0 + np.abs(grid.xi) ** sigma
    coeff = w * u.spectrum * np.conj(phi.profile.spectrum) * (grid.dx / grid.num_points)
    corr = np.fft.ifft(coeff * grid.num_points).real  # h(j*dx) per shift index
    j = int(np.argmax(corr))
    overlap, slope = _phase_profile(coeff, grid.xi)
    y0 = _wrap_shift(j, grid)
    y = _golden_max(overlap, y0 - grid.dx, y0 + grid.dx)
    if overlap(y0) > overlap(y):
        y = y0
    # golden localizes the peak only to sqrt(eps); Newton on the slope
    # pins it to roundoff, which matters when the distance is near zero
    xi = grid.xi
    for _ in range(8):
        d1 = slope(y)
        d2 = float(np.sum(-(xi**2) * coeff * np.exp(1j * xi * y)).real)
        if d2 >= 0.0 or not math.isfinite(d1):
            break
        step = -d1 / d2
        if abs(step) > grid.dx:
            break
        y += step
        if abs(step) <= 1e-14 * max(1.0, abs(y)):
            break
    # evaluate the distance directly at the winning shift; the
    # correlation form loses half the digits to cancellation near zero
    diff = Field(grid, u.values - translate(phi.profile, y).values)
    return sobolev_norm(diff, sigma / 2.0)


def _golden_max(f, lo: float, hi: float, iters: int = 80) -> float:
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def modulation_shift(
    u: Field,
    phi: GroundState,
    seed: Optional[float] = None,
    neighborhood: Optional[float] = None,
) -> float:
    """Shift z solving (u(. + z), phi_x)_{L2} = 0 by safeguarded Newton.

    Without a seed the cross-correlation peak supplies one.  After the
    solve the distance to phi(. - z) must lie inside the modulation
    neighborhood (default half the reference H^{sigma/2} norm); failing
    that, or running out of iterations, raises ModulationLostError.
    """
    grid = u.grid
    if grid != phi.grid:
        raise GridMismatchError("state and reference live on different grids")
    sigma = phi.params.sigma
    dphi_spec = 1j * grid.xi * phi.profile.spectrum
    dphi_spec[grid.num_points // 2] = 0.0
    coeff = u.spectrum * np.conj(dphi_spec) * (grid.dx / grid.num_points)
    g, dg = _phase_profile(coeff, grid.xi)

    if seed is None:
        w = u.spectrum * np.conj(phi.profile.spectrum)
        corr = np.fft.ifft(w).real
        seed = _wrap_shift(int(np.argmax(corr)), grid)

    # Parseval norms straight off the cached spectra
    parseval = grid.dx / grid.num_points
    norm_u = math.sqrt(parseval * float(np.sum(np.abs(u.spectrum) ** 2)))
    norm_dphi = math.sqrt(parseval * float(np.sum(np.abs(dphi_spec) ** 2)))
    tol = 1e-12 * max(norm_u * norm_dphi, 1e-300)

    z = float(seed)
    res = g(z)
    for _ in range(50):
        if abs(res) <= tol:
            break
        slope = dg(z)
        if slope == 0.0 or not math.isfinite(slope):
            raise ModulationLostError(
                f"flat orthogonality profile at z = {z:.6g}"
            )
        step = -res / slope
        # keep Newton inside a few grid cells per move; the root spacing
        # is set by the reference width, never below dx
        cap = 4.0 * grid.dx
        if abs(step) > cap:
            step = math.copysign(cap, step)
        trial = z + step
        res_trial = g(trial)
        halvings = 0
        while abs(res_trial) > abs(res) and halvings < 20:
            step *= 0.5
            trial = z + step
            res_trial = g(trial)
            halvings += 1
        z, res = trial, res_trial
    if abs(res) > tol:
        raise ModulationLostError(
            f"orthogonality residual {res:.3e} after 50 Newton steps "
            f"(tolerance {tol:.1e})"
        )

    radius = (
        neighborhood
        if neighborhood is not None
        else 0.5 * sobolev_norm(phi.profile, sigma / 2.0)
    )
    dist = sobolev_norm(
        Field(grid, u.values - translate(phi.profile, z).values), sigma / 2.0
    )
    if dist > radius:
        raise ModulationLostError(
            f"state sits {dist:.3e} from the orbit, outside the modulation "
            f"neighborhood {radius:.3e}"
        )
    return z


def default_virial_radius(params: ModelParams, grid: Grid) -> float:
    """Localization radius max(10, 5/sqrt(c)) capped at 0.45 L."""
    return min(max(10.0, 5.0 / math.sqrt(params.c)), 0.45 * grid.half_length)


def build_virial(phi: GroundState, radius: float) -> Field:
    """Weight Phi_A: the primitive of the dilation generator, cut off.

    Phi(x) integrates Lambda phi = phi/2 + x phi' from the left boundary;
    the cutoff is 1 on |x| <= A, 0 on |x| >= 2A, with a cosine ramp in
    between (C^1 is enough at grid resolution).
    """
    grid = phi.grid
    if radius < 1.0:
        raise ConfigError(f"localization radius must be >= 1, got {radius}")
    if 2.0 * radius > 0.9 * grid.half_length:
        raise ConfigError(
            f"cutoff support 2A = {2 * radius:g} reaches past 0.9 L = "
            f"{0.9 * grid.half_length:g}; enlarge the box or shrink A"
        )
    lam = dilation_generator(phi.profile)
    prim = cumulative_trapezoid(lam.values, dx=grid.dx, initial=0.0)
    ax = np.abs(grid.x)
    ramp = 0.5 * (1.0 + np.cos(np.pi * (ax - radius) / radius))
    rho = np.where(ax <= radius, 1.0, np.where(ax >= 2.0 * radius, 0.0, ramp))
    return Field(grid, prim * rho)


def virial_value(
    u: Field,
    phi: GroundState,
    weight: Field,
    shift: Optional[float] = None,
) -> float:
    """J_A(u) = integral of u(x + z(u)) Phi_A(x) dx."""
    if shift is None:
        shift = modulation_shift(u, phi)
    return inner(translate(u, -shift), weight)


@dataclass(frozen=True)
class ExperimentResult:
    """Outcome of one dilated-data run against a ground state."""

    verdict: str  # "escaped" | "stayed" | "blow-up"
    trajectory: Trajectory
    state: GroundState
    action_drop: float  # S_c(u0) - S_c(phi); negative by the dilation energetics
    virial_drift: float  # signed change of J_A over the tracked samples
    exit_time: Optional[float]


def instability_experiment(
    params: ModelParams,
    mu: float,
    epsilon: float,
    config: EvolutionConfig,
    grid: Optional[Grid] = None,
    solver: Optional[SolverConfig] = None,
) -> ExperimentResult:
    """Evolve the dilated ground state and classify the outcome.

    The initial state is sqrt(lam) phi(lam x) with lam = 1 - mu, which
    keeps the mass and lowers the action whenever the scaling criterion
    is negative.  Escape means the H^{sigma/2} tube distance exceeded
    epsilon times the reference norm before t_end.
    """
    if not 0.0 < abs(mu) <= 0.05:
        raise ConfigError(f"dilation strength must satisfy 0 < |mu| <= 0.05, got {mu}")
    if not epsilon > 0:
        raise ConfigError(f"tube fraction must be positive, got {epsilon}")

    state = solve_double_power(
        params, grid if grid is not None else default_grid(params.sigma), config=solver
    )
    phi = state.profile
    norm = sobolev_norm(phi, params.sigma / 2.0)
    radius = default_virial_radius(params, state.grid)
    weight = build_virial(state, radius)

    run = replace(
        config,
        perturbation=Dilation(mu),
        tube_exit=epsilon * norm,
        stop_on_exit=True,
    )
    u0 = dilate(phi, 1.0 - mu)
    drop = action(u0, params) - action(phi, params)

    traj = evolve(phi, params, run, reference=state, weight=weight)

    if traj.blow_up:
        verdict = "blow-up"
    elif traj.exit_time is not None:
        verdict = "escaped"
    else:
        verdict = "stayed"

    tracked = traj.virial[np.isfinite(traj.virial)]
    drift = float(tracked[-1] - tracked[0]) if tracked.size >= 2 else math.nan

    return ExperimentResult(
        verdict=verdict,
        trajectory=traj,
        state=state,
        action_drop=drop,
        virial_drift=drift,
        exit_time=traj.exit_time,
    )
