"""Resolvent and commutator kernels, and tail-decay verification.

G_sigma(x) = (1/pi) * int_0^inf cos(xi x) / (1 + xi^sigma) d(xi) decays
only algebraically, so plain truncation of the integral is hopeless; the
transform is instead integrated between consecutive zeros of the cosine
and the resulting alternating series is accelerated.  A dense FFT route
provides an independent cross-check on moderate windows.  Profile tails
are fitted in log coordinates against the algebraic rate 1 + sigma, or
against a straight exponential at sigma = 2.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import sici

from .errors import ConfigError, FitError
from .functionals import ModelParams
from .spectral import Field, derivative

__all__ = [
    "TransformRoute",
    "KernelSample",
    "TailFit",
    "compute_G",
    "compute_K_km",
    "resolvent_origin",
    "kernel_mass",
    "kernel_tail_constant",
    "g1_closed_form",
    "g1_origin_check",
    "fit_tail",
    "convolution_residual",
]

_EPS = float(np.finfo(float).eps)

# 24-node Gauss-Legendre rule; every panel below is smooth enough that a
# fixed order beats adaptivity
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


class TransformRoute(Enum):
    OSCILLATORY_QUADRATURE = "oscillatory-quadrature"
    DENSE_TRANSFORM = "dense-transform"


@dataclass(frozen=True)
class KernelSample:
    """Kernel values on positive abscissae, tagged with how they were made.

    failed marks points where the quadrature missed its error target; the
    values there are still the best available estimate.
    """

    sigma: float
    points: np.ndarray
    values: np.ndarray
    method: TransformRoute
    failed: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        bad = np.asarray(self.failed, dtype=bool)
        if pts.ndim != 1 or pts.shape != vals.shape or pts.shape != bad.shape:
            raise ConfigError("points, values and failed must be 1d and aligned")
        if np.any(pts <= 0) or np.any(np.diff(pts) <= 0):
            raise ConfigError("points must be positive and strictly increasing")
        if not np.all(np.isfinite(vals[~bad])):
            raise ConfigError("non-finite kernel value at a point not marked failed")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "failed", bad)

    @property
    def all_converged(self) -> bool:
        return not bool(np.any(self.failed))


@dataclass(frozen=True)
class TailFit:
    """Log-space line fit of a decaying tail.

    exponent is the slope against log|x| (algebraic branch) or against |x|
    (exponential branch); constant is exp(intercept); residual is the max
    deviation of the fit in log units divided by the total fitted drop
    across the window.
    """

    exponent: float
    constant: float
    window: tuple[float, float]
    residual: float


def _panel(f: Callable[[np.ndarray], np.ndarray], lo: float, hi: float) -> float:
    mid, rad = 0.5 * (lo + hi), 0.5 * (hi - lo)
    return rad * float(np.sum(_GL_WEIGHTS * f(mid + rad * _GL_NODES)))


def _euler(terms: Sequence[float]) -> float:
    # repeated averaging of the partial sums; apex of the triangle
    s = np.cumsum(terms)
    while s.size > 1:
        s = 0.5 * (s[:-1] + s[1:])
    return float(s[0])


def _head_edges(upper: float) -> list[float]:
    # geometric panels toward 0 keep the xi^sigma branch point harmless
    edges = [0.0]
    step = 1e-6
    while step < upper:
        edges.append(step)
        step *= 10.0
    edges.append(upper)
    return edges


def _cos_transform(
    symbol: Callable[[np.ndarray], np.ndarray],
    x: float,
    rtol: float,
    max_packets: int = 72,
) -> tuple[float, bool]:
    """(1/pi) int_0^inf symbol(xi) cos(xi x) d(xi) for a single x > 0."""

    def g(xi: np.ndarray) -> np.ndarray:
        return symbol(xi) * np.cos(xi * x)

    first_zero = 0.5 * math.pi / x
    edges = _head_edges(first_zero)
    pieces = [_panel(g, a, b) for a, b in zip(edges, edges[1:])]
    head = math.fsum(pieces)
    gross = math.fsum(abs(t) for t in pieces)

    packets: list[float] = []

    def extend(count: int) -> None:
        while len(packets) < count:
            a = first_zero + len(packets) * math.pi / x
            packets.append(_panel(g, a, a + math.pi / x))

    extend(12)
    est_prev = _euler(packets[:10])
    est = _euler(packets)
    while (
        abs(est - est_prev) > 0.1 * rtol * abs(head + est)
        and len(packets) < max_packets
    ):
        est_prev = est
        extend(len(packets) + 12)
        est = _euler(packets)

    value = (head + est) / math.pi
    gross = (gross + math.fsum(abs(t) for t in packets)) / math.pi
    # the roundoff of the cancelling pieces is an error floor; targets
    # exponentially below it (sigma = 2 far field) cannot be certified
    err = abs(est - est_prev) / math.pi + 100.0 * _EPS * gross
    ok = err <= rtol * abs(value)
    return value, ok


def _sin_integral_transform(
    symbol: Callable[[np.ndarray], np.ndarray],
    x: float,
    rtol: float,
    max_packets: int = 72,
) -> float:
    """(1/pi) int_0^inf symbol(xi) sin(xi x)/xi d(xi): the antiderivative
    of the cosine transform on [0, x].  Regular at xi = 0."""

    def g(xi: np.ndarray) -> np.ndarray:
        return symbol(xi) * np.sin(xi * x) / xi

    first_zero = math.pi / x
    edges = _head_edges(first_zero)
    head = math.fsum(_panel(g, a, b) for a, b in zip(edges, edges[1:]))

    packets: list[float] = []

    def extend(count: int) -> None:
        while len(packets) < count:
            a = first_zero * (1 + len(packets))
            packets.append(_panel(g, a, a + first_zero))

    extend(12)
    est_prev = _euler(packets[:10])
    est = _euler(packets)
    while (
        abs(est - est_prev) > 0.1 * rtol * abs(head + est)
        and len(packets) < max_packets
    ):
        est_prev = est
        extend(len(packets) + 12)
        est = _euler(packets)
    return (head + est) / math.pi


def _check_sigma(sigma: float) -> float:
    sigma = float(sigma)
    if not 1.0 <= sigma <= 2.0:
        raise ConfigError(f"sigma must lie in [1, 2], got {sigma}")
    return sigma


def _check_points(points) -> np.ndarray:
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    if pts.ndim != 1 or pts.size == 0:
        raise ConfigError("points must be a non-empty 1d array")
    if np.any(pts <= 0) or np.any(np.diff(pts) <= 0):
        raise ConfigError("points must be positive and strictly increasing")
    return pts


def _dense_cos_values(
    symbol: Callable[[np.ndarray], np.ndarray], points: np.ndarray
) -> np.ndarray:
    # periodized transform on a fine FFT grid, spline-read at the points;
    # images sit at 2L - x, so L = 32 * max(x) keeps them negligible
    half = 32.0 * max(1.0, float(points[-1]))
    target_dx = min(0.02, float(points[0]) / 4.0)
    n = 1 << min(22, max(12, math.ceil(math.log2(2.0 * half / target_dx))))
    dx = 2.0 * half / n
    xi = 2.0 * math.pi * np.fft.fftfreq(n, d=dx)
    sym = symbol(np.abs(xi))
    vals = np.fft.ifft(sym).real * (n / (2.0 * half))
    xs = dx * np.arange(n // 2 + 1)
    return CubicSpline(xs, vals[: n // 2 + 1])(points)


def _pointwise(
    symbol: Callable[[np.ndarray], np.ndarray],
    points: np.ndarray,
    rtol: float,
    max_workers: Optional[int],
) -> tuple[np.ndarray, np.ndarray]:
    if max_workers is not None and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            out = list(pool.map(lambda x: _cos_transform(symbol, x, rtol), points))
    else:
        out = [_cos_transform(symbol, x, rtol) for x in points]
    values = np.array([v for v, _ in out])
    failed = np.array([not ok for _, ok in out])
    return values, failed


def compute_G(
    sigma: float,
    points,
    rtol: float = 1e-6,
    route: TransformRoute = TransformRoute.OSCILLATORY_QUADRATURE,
    max_workers: Optional[int] = None,
) -> KernelSample:
    """Sample G_sigma(x) = (1/pi) int_0^inf cos(xi x)/(1 + xi^sigma) d(xi).

    The oscillatory route integrates between consecutive cosine zeros and
    Euler-accelerates the alternating packet series, aiming at relative
    accuracy rtol per point; the dense route periodizes the symbol on a
    fine FFT grid and is the cheaper cross-check for moderate x.
    """
    sigma = _check_sigma(sigma)
    pts = _check_points(points)

    def symbol(xi: np.ndarray) -> np.ndarray:
        return 1.0 / (1.0 + xi**sigma)

    if route is TransformRoute.DENSE_TRANSFORM:
        values = _dense_cos_values(symbol, pts)
        failed = np.zeros(pts.shape, dtype=bool)
    else:
        values, failed = _pointwise(symbol, pts, rtol, max_workers)
    return KernelSample(sigma, pts, values, route, failed)


def compute_K_km(
    k: int,
    m: int,
    sigma: float,
    points,
    rtol: float = 1e-6,
    route: TransformRoute = TransformRoute.OSCILLATORY_QUADRATURE,
    max_workers: Optional[int] = None,
) -> KernelSample:
    """Sample the commutator kernel with symbol
    (-1)^k |xi|^(sigma m) / (1 + |xi|^sigma)^(1+k), for 1 <= m <= k.

    The tail product |x|^(1+sigma) |K| stays bounded; it tends to a
    nonzero constant for m = 1 and to zero for m >= 2.
    """
    if int(k) != k or k < 1:
        raise ConfigError(f"k must be an integer >= 1, got {k}")
    if int(m) != m or not 1 <= m <= k:
        raise ConfigError(f"m must be an integer in [1, k], got {m}")
    k, m = int(k), int(m)
    sigma = _check_sigma(sigma)
    pts = _check_points(points)
    flip = (-1.0) ** k

    def symbol(xi: np.ndarray) -> np.ndarray:
        return flip * xi ** (sigma * m) / (1.0 + xi**sigma) ** (1 + k)

    if route is TransformRoute.DENSE_TRANSFORM:
        values = _dense_cos_values(symbol, pts)
        failed = np.zeros(pts.shape, dtype=bool)
    else:
        values, failed = _pointwise(symbol, pts, rtol, max_workers)
    return KernelSample(sigma, pts, values, route, failed)


def resolvent_origin(sigma: float) -> float:
    """G_sigma(0) = (1/pi) int_0^inf d(xi)/(1 + xi^sigma), finite for sigma > 1.

    Panels up to Xi = 1e4 plus the alternating algebraic tail series
    sum_j (-1)^(j-1) Xi^(1 - j sigma)/(j sigma - 1).
    """
    sigma = _check_sigma(sigma)
    if sigma <= 1.0:
        raise ConfigError("the kernel diverges at the origin for sigma = 1")

    def f(xi: np.ndarray) -> np.ndarray:
        return 1.0 / (1.0 + xi**sigma)

    cut = 1e4
    edges = _head_edges(1.0) + [10.0, 100.0, 1e3, cut]
    body = math.fsum(_panel(f, a, b) for a, b in zip(edges, edges[1:]))
    tail = math.fsum(
        (-1.0) ** (j - 1) * cut ** (1.0 - j * sigma) / (j * sigma - 1.0)
        for j in range(1, 5)
    )
    return (body + tail) / math.pi


def kernel_mass(sigma: float, half_width: Optional[float] = None, rtol: float = 1e-6) -> float:
    """int_{-X}^{X} G_sigma, by panel quadrature of the sampled kernel.

    The default X makes the algebraic tail beyond the window smaller than
    5e-5, so the result tests the normalization at the 1e-4 level.
    """
    sigma = _check_sigma(sigma)
    if half_width is None:
        half_width = (51200.0 / sigma) ** (1.0 / sigma)
    if half_width <= 1.0:
        raise ConfigError("half_width must exceed 1")

    def g(xs: np.ndarray) -> np.ndarray:
        return np.array([_cos_transform_sigma(sigma, x, rtol) for x in xs])

    # below 1e-6 the kernel is origin-dominated; patch that sliver
    # analytically (log profile at sigma = 1, flat value above)
    eps0 = 1e-6
    if sigma == 1.0:
        head = (eps0 * (math.log(1.0 / eps0) + 1.0 - np.euler_gamma)) / math.pi
    else:
        head = resolvent_origin(sigma) * eps0
    edges = [eps0]
    while edges[-1] < half_width:
        edges.append(min(edges[-1] * 10.0, half_width))
    body = math.fsum(_panel(g, a, b) for a, b in zip(edges, edges[1:]))
    return 2.0 * (head + body)


def _cos_transform_sigma(sigma: float, x: float, rtol: float) -> float:
    value, _ = _cos_transform(lambda xi: 1.0 / (1.0 + xi**sigma), x, rtol)
    return value


def g1_closed_form(x) -> np.ndarray:
    """g_1(x) = int_0^inf cos(xi x)/(1 + xi) d(xi) via sine/cosine integrals.

    Equals pi * G_1(x).  Closed form: sin(x)(pi/2 - Si(x)) - cos(x) Ci(x).
    """
    xs = np.asarray(x, dtype=float)
    if np.any(xs <= 0):
        raise ConfigError("g1 requires x > 0")
    si, ci = sici(xs)
    return np.sin(xs) * (0.5 * math.pi - si) - np.cos(xs) * ci


def g1_origin_check(points, rtol: float = 1e-6) -> list[tuple[float, float]]:
    """Tabulate g_1(x)/log(1/x) for small x > 0; the ratio tends to 1.

    Each entry is computed by the oscillatory quadrature; a failed point
    gets ratio nan rather than aborting the table.
    """
    pts = _check_points(points)
    if np.any(pts >= 1e-2):
        raise ConfigError("origin check expects points below 1e-2")
    rows: list[tuple[float, float]] = []
    for x in pts:
        value, ok = _cos_transform(lambda xi: 1.0 / (1.0 + xi), float(x), rtol)
        ratio = value * math.pi / math.log(1.0 / x) if ok else math.nan
        rows.append((float(x), ratio))
    return rows


def kernel_tail_constant(sample: KernelSample) -> TailFit:
    """Fit the plateau of |x|^(1+sigma) |K(x)| over the sample's top decade.

    Raises FitError when the product varies by more than 10%, which is the
    exponential-decay signature at sigma = 2.
    """
    pts, vals = sample.points, sample.values
    if pts[-1] / pts[0] < 100.0:
        raise ConfigError("sample must cover at least two decades")
    keep = (pts >= pts[-1] / 10.0) & ~sample.failed
    if np.count_nonzero(keep) < 4:
        raise ConfigError("too few converged points in the top decade")
    x, v = pts[keep], np.abs(vals[keep])
    floor = 100.0 * _EPS * float(np.max(np.abs(vals)))
    if np.any(v <= floor):
        raise FitError("kernel vanishes inside the fit decade")
    product = x ** (1.0 + sample.sigma) * v
    constant = float(np.mean(product))
    variation = float((np.max(product) - np.min(product)) / abs(constant))
    slope = float(np.polyfit(np.log(x), np.log(v), 1)[0])
    if variation > 0.10:
        raise FitError(
            f"no algebraic plateau: product varies by {variation:.1%} "
            f"over the top decade (fitted slope {slope:.3f})",
            residual=variation,
        )
    return TailFit(
        exponent=slope,
        constant=constant,
        window=(float(x[0]), float(x[-1])),
        residual=variation,
    )


def fit_tail(
    profile: Field,
    sigma: float,
    derivative_order: int = 0,
    window: Optional[tuple[float, float]] = None,
    mode: Optional[str] = None,
) -> TailFit:
    """Fit the decay of a profile (or its first derivative) over a window.

    sigma < 2: least-squares slope of log|u| against log|x|; the expected
    exponent is -(1 + sigma) - l.  sigma = 2: slope of log|u| against |x|
    (exponential rate).  mode "algebraic" or "exponential" overrides that
    dispatch, e.g. to show a log-log fit fail on an exponential tail.
    The window must stay inside 60% of the box, where periodic images are
    negligible; the default is [0.2 L, 0.6 L].
    """
    sigma = _check_sigma(sigma)
    if mode not in (None, "algebraic", "exponential"):
        raise ConfigError(f"mode must be 'algebraic' or 'exponential', got {mode!r}")
    if derivative_order not in (0, 1):
        raise ConfigError(
            "tail fits support derivative orders 0 and 1; spectral "
            "differentiation amplifies truncation noise beyond that"
        )
    field = derivative(profile) if derivative_order else profile
    half = profile.grid.half_length
    if window is None:
        window = (0.2 * half, 0.6 * half)
    lo, hi = float(window[0]), float(window[1])
    if not 0.0 < lo < hi:
        raise ConfigError(f"window must satisfy 0 < lo < hi, got ({lo}, {hi})")
    if hi > 0.6 * half * (1.0 + 1e-12):
        raise ConfigError(
            f"window end {hi:g} leaves the trusted region (60% of {half:g})"
        )

    x = profile.grid.x
    mask = (x >= lo) & (x <= hi)
    if np.count_nonzero(mask) < 8:
        raise ConfigError("window holds fewer than 8 grid points")
    u = np.abs(field.values[mask])
    floor = 100.0 * _EPS * profile.max_abs
    if float(np.max(u)) < floor:
        raise FitError("window too deep: profile below 100 eps of its peak")
    good = u > floor
    if np.count_nonzero(good) < 8:
        raise FitError("window too deep: fewer than 8 points above noise")
    xs, logu = x[mask][good], np.log(u[good])

    exponential = (sigma == 2.0) if mode is None else (mode == "exponential")
    abscissa = xs if exponential else np.log(xs)
    slope, intercept = np.polyfit(abscissa, logu, 1)
    fitted = slope * abscissa + intercept
    drop = abs(slope) * (abscissa[-1] - abscissa[0])
    residual = float(np.max(np.abs(logu - fitted)) / drop) if drop > 0 else math.inf
    return TailFit(
        exponent=float(slope),
        constant=float(math.exp(intercept)),
        window=(lo, hi),
        residual=residual,
    )


def convolution_residual(
    profile: Field, params: ModelParams, rtol: float = 1e-6
) -> float:
    """max |phi - G_c * (a1 phi^p + a2 phi^q)| / max|phi|.

    The resolvent is realized here as a quadrature-sampled kernel applied
    by direct (circulant) convolution, a completely different
    representation than the spectral division inside the solver, so
    agreement is a two-route consistency check.  Speed scaling:
    G_c(x) = c^(1/sigma - 1) G_sigma(c^(1/sigma) x).  The kernel is
    cell-averaged through its antiderivative, which tames the |x|^(sigma-1)
    cusp at the origin that plain node sampling would hit.
    """
    grid = profile.grid
    c, sigma = params.c, _check_sigma(params.sigma)
    stretch = c ** (1.0 / sigma)
    n, dx = grid.num_points, grid.dx

    def symbol(xi: np.ndarray) -> np.ndarray:
        return 1.0 / (1.0 + xi**sigma)

    # cumulative kernel integral at the half-integer cell edges; the
    # average over cell j is a difference of neighbours
    edges = stretch * dx * (np.arange(n // 2 + 1) + 0.5)
    cum = np.array([_sin_integral_transform(symbol, x, rtol) for x in edges])
    ring = np.empty(n)
    ring[0] = 2.0 * cum[0]
    ring[1 : n // 2 + 1] = np.diff(cum)
    ring[n // 2 + 1 :] = ring[n // 2 - 1 : 0 : -1]
    ring /= c * dx

    a1, a2 = params.coeffs
    rhs = a1 * profile.values**params.p + a2 * profile.values**params.q
    conv = np.fft.ifft(np.fft.fft(ring) * np.fft.fft(rhs)).real * dx
    return float(np.max(np.abs(profile.values - conv)) / profile.max_abs)
