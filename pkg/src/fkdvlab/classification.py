"""Case taxonomy, instability verdicts, and critical-speed location.

The sign pattern (p even/odd, q odd, a = +-1) decides which ground state
exists; the position of p and q relative to 2*sigma + 1 decides what the
instability theory asserts.  Everything here reduces to those comparisons
plus criterion evaluations on freshly solved profiles.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, SolverError, UncoveredCaseError
from .functionals import ModelParams, action, functional_report, scaling_criterion
from .ground_state import (
    GroundState,
    PriorSolution,
    SolverConfig,
    rescale_in_speed,
    solve_double_power,
)
from .spectral import Field, Grid, default_grid

__all__ = [
    "CaseLabel",
    "VerdictKind",
    "InstabilityVerdict",
    "CriticalSpeedResult",
    "ScanRow",
    "classify_case",
    "theorem_verdict",
    "criterion_at",
    "find_critical_speed",
    "scan",
]


class CaseLabel(Enum):
    CASE_I = "I"
    CASE_II_1 = "II-1"
    CASE_II_2 = "II-2"
    UNCOVERED = "uncovered"


class VerdictKind(Enum):
    UNSTABLE_ALL_C = "unstable for all c"
    UNSTABLE_BEYOND = "unstable beyond a critical speed"
    SILENT = "no assertion"


# which critical speed each far-field clause introduces
_SPEED_NAME = {"I-2": "c1", "II-1-iii": "c2", "II-2-ii": "c3"}


@dataclass(frozen=True)
class InstabilityVerdict:
    kind: VerdictKind
    case: CaseLabel
    tag: Optional[str] = None

    @property
    def speed_name(self) -> Optional[str]:
        """Name of the critical speed, when the verdict promises one."""
        return _SPEED_NAME.get(self.tag) if self.tag else None

    def __str__(self) -> str:
        body = self.kind.value
        if self.tag:
            body += f" [{self.tag}]"
        return body


def _check_exponents(p: int, q: int) -> None:
    if not (isinstance(p, int) and isinstance(q, int)):
        raise ConfigError(f"p, q must be integers, got {p!r}, {q!r}")
    if not 2 <= p < q:
        raise ConfigError(f"need 2 <= p < q, got p={p}, q={q}")


def classify_case(p: int, q: int, a: int) -> CaseLabel:
    """Existence-case dispatch on the parities of p, q and the sign a."""
    _check_exponents(p, q)
    if a not in (-1, 1):
        raise ConfigError(f"a must be +1 or -1, got {a}")
    if a == 1:
        return CaseLabel.CASE_I if q % 2 == 1 else CaseLabel.UNCOVERED
    if p % 2 == 1:
        return CaseLabel.CASE_II_1
    if q % 2 == 1:
        return CaseLabel.CASE_II_2
    return CaseLabel.UNCOVERED


def theorem_verdict(sigma, p: int, q: int, a: int) -> InstabilityVerdict:
    """Verdict table, with the critical exponent compared exactly.

    sigma may be a float, a Fraction, or a string like "3/2"; the
    comparison against 2*sigma + 1 is done in exact rational arithmetic,
    so boundary cases such as p = 2*sigma + 1 dispatch the way the
    inequality tables read, not the way round-off falls.
    """
    label = classify_case(p, q, a)
    if label is CaseLabel.UNCOVERED:
        raise UncoveredCaseError(
            f"(p, q, a) = ({p}, {q}, {a:+d}) admits no covered ground state"
        )
    crit = 2 * Fraction(sigma) + 1

    if label is CaseLabel.CASE_I:
        if p >= crit:
            return InstabilityVerdict(VerdictKind.UNSTABLE_ALL_C, label, "I-1")
        if p < crit < q:
            return InstabilityVerdict(VerdictKind.UNSTABLE_BEYOND, label, "I-2")
        return InstabilityVerdict(VerdictKind.SILENT, label)

    if label is CaseLabel.CASE_II_1:
        if q == crit:  # q = 2 sigma + 1 > p is automatic since p < q
            return InstabilityVerdict(VerdictKind.UNSTABLE_ALL_C, label, "II-1-i")
        if p <= crit < q:
            return InstabilityVerdict(VerdictKind.UNSTABLE_ALL_C, label, "II-1-ii")
        if p > crit:
            return InstabilityVerdict(VerdictKind.UNSTABLE_BEYOND, label, "II-1-iii")
        return InstabilityVerdict(VerdictKind.SILENT, label)

    if p >= crit:
        return InstabilityVerdict(VerdictKind.UNSTABLE_ALL_C, label, "II-2-i")
    if p < crit < q:
        return InstabilityVerdict(VerdictKind.UNSTABLE_BEYOND, label, "II-2-ii")
    return InstabilityVerdict(VerdictKind.SILENT, label)


def criterion_at(
    params: ModelParams,
    grid: Optional[Grid] = None,
    config: Optional[SolverConfig] = None,
) -> float:
    """Solve the ground state at params.c and evaluate the scaling criterion.

    With grid=None the default box is shrunk or stretched by c^(-1/sigma),
    matching how the profile width moves with the speed, so resolution and
    boundary decay are uniform along speed ladders.
    """
    state = _solve(params, grid, config)
    return scaling_criterion(state.profile, params)


def _adapted_default(params: ModelParams) -> Grid:
    base = default_grid(params.sigma)
    stretch = params.c ** (-1.0 / params.sigma)
    n = base.num_points
    if stretch > 1.0:
        # slow states can keep an O(1) core inside a c^(-1/sigma) tail, so
        # the box has to grow without letting dx grow with it
        n = min(n << math.ceil(math.log2(stretch)), 1 << 18)
    return Grid(base.half_length * stretch, n)


def _change_points(vals: np.ndarray, num: int) -> np.ndarray:
    # same box, different sampling: pad or truncate the spectrum
    n = len(vals)
    if n == num:
        return vals
    hat = np.fft.rfft(vals)
    out = np.zeros(num // 2 + 1, dtype=complex)
    keep = min(len(hat), len(out))
    out[:keep] = hat[:keep]
    return np.fft.irfft(out, num) * (num / n)


def _embed_same_spacing(src: Field, target: Grid) -> Optional[Field]:
    # slow defocusing-range states keep an O(1) core while the box grows,
    # so between rungs the profile barely moves; copy it across in x
    ns, nt = src.grid.num_points, target.num_points
    if nt < ns or abs(src.grid.dx - target.dx) > 1e-12 * target.dx:
        return None
    vals = np.zeros(nt)
    off = (nt - ns) // 2
    vals[off : off + ns] = src.values
    return Field(target, vals)


def _solve(params, grid, config, seed_from: Optional[GroundState] = None):
    target = grid or _adapted_default(params)
    guesses: list[Field] = []
    if seed_from is not None:
        amp = (params.c / seed_from.params.c) ** (1.0 / (params.q - 1.0))
        if grid is None:
            # adapted defaults are speed-conjugate: the warm start is an
            # amplitude scaling, resampled if the point counts differ
            vals = _change_points(seed_from.profile.values, target.num_points)
            guesses.append(Field(target, amp * vals))
            embedded = _embed_same_spacing(seed_from.profile, target)
            if embedded is not None:
                guesses.append(embedded)
        elif seed_from.grid == target:
            guesses.append(rescale_in_speed(seed_from, params.c))
    if not guesses:
        return solve_double_power(params, target, config)
    base = config or SolverConfig()
    for k, guess in enumerate(guesses):
        cfg = replace(base, initial_guess=PriorSolution(guess))
        try:
            return solve_double_power(params, target, cfg)
        except SolverError:
            if k + 1 == len(guesses):
                raise


@dataclass(frozen=True)
class CriticalSpeedResult:
    """Outcome of the sign-change search for the criterion over c."""

    found: bool
    lower: float
    upper: float
    evaluations: tuple  # (c, criterion) pairs in evaluation order
    note: str = ""

    @property
    def bracket(self) -> Optional[tuple]:
        return (self.lower, self.upper) if self.found else None

    @property
    def relative_width(self) -> float:
        return (self.upper - self.lower) / self.upper


def find_critical_speed(
    params: ModelParams,
    bracket_hint: tuple = (0.1, 10.0),
    grid: Optional[Grid] = None,
    config: Optional[SolverConfig] = None,
    rel_width: float = 1e-3,
    c_max: float = 1e6,
    c_min: float = 1e-4,
) -> CriticalSpeedResult:
    """Bracket the speed where the scaling criterion changes sign.

    Expands the hinted interval geometrically until the criterion is
    nonnegative at the lower end and negative at the upper end, then
    bisects to relative width rel_width.  The returned bracket certifies
    one sign change; it does not claim the crossing is unique.

    The theorem behind the beyond-a-critical-speed verdicts only promises
    negativity for large c; the criterion may stay negative all the way
    down, in which case the search runs out at c_min and reports
    found=False with the evaluations as the record.  Solver loss during
    expansion is reported the same way rather than raised: a failed solve
    deep in the defocusing-dominated regime is an expected outcome, not a
    usage error.

    params.c is ignored; the verdict must be of the beyond-a-critical-
    speed kind, otherwise there is no crossing to look for.
    """
    verdict = theorem_verdict(params.sigma, params.p, params.q, params.a)
    if verdict.kind is not VerdictKind.UNSTABLE_BEYOND:
        raise ConfigError(
            f"criterion sign is one-sided for {verdict}; no crossing to bracket"
        )
    lo, hi = (float(b) for b in bracket_hint)
    if not 0 < lo < hi:
        raise ConfigError(f"bracket hint must satisfy 0 < lo < hi, got {bracket_hint}")

    evals: list[tuple] = []
    states: list[GroundState] = []
    attempted = [math.nan]

    def crit(c: float) -> float:
        attempted[0] = c
        near = None
        if states:
            near = min(states, key=lambda s: abs(math.log(s.params.c / c)))
        st = _solve(params.with_c(c), grid, config, seed_from=near)
        states.append(st)
        value = scaling_criterion(st.profile, params.with_c(c))
        evals.append((c, value))
        return value

    def indeterminate(c: float, value: float) -> bool:
        # zero within noise of the action scale cannot certify a sign
        st = next(s for s in states if s.params.c == c)
        return abs(value) < 1e-8 * abs(action(st.profile, st.params))

    try:
        v_hi = crit(hi)
        while v_hi >= 0 or indeterminate(hi, v_hi):
            hi *= 4.0
            if hi > c_max:
                return CriticalSpeedResult(
                    False, lo, hi / 4.0, tuple(evals),
                    note=f"criterion still nonnegative at c = {hi / 4.0:g}",
                )
            v_hi = crit(hi)

        v_lo = crit(lo)
        while v_lo < 0 or indeterminate(lo, v_lo):
            lo /= 4.0
            if lo < c_min:
                return CriticalSpeedResult(
                    False, lo * 4.0, hi, tuple(evals),
                    note=f"criterion already negative at c = {lo * 4.0:g}, "
                         f"search floor c_min = {c_min:g} reached",
                )
            v_lo = crit(lo)
    except SolverError as exc:
        return CriticalSpeedResult(
            False, lo, hi, tuple(evals),
            note=f"solver lost the state during expansion near c = {attempted[0]:g}: {exc}",
        )

    note = ""
    try:
        while hi - lo > rel_width * hi:
            mid = 0.5 * (lo + hi)
            v = crit(mid)
            if indeterminate(mid, v):
                # nudge once toward each side before giving up on this level
                for shove in (0.05, -0.05):
                    mid2 = mid + shove * (hi - lo)
                    v = crit(mid2)
                    if not indeterminate(mid2, v):
                        mid = mid2
                        break
                else:
                    note = "criterion indistinguishable from zero inside the bracket"
                    break
            if v < 0:
                hi = mid
            else:
                lo = mid
    except SolverError as exc:
        # sign change is already certified, keep the bracket we have
        note = f"bisection stopped early, solver failed at c = {attempted[0]:g}: {exc}"
    return CriticalSpeedResult(True, lo, hi, tuple(evals), note=note)


@dataclass(frozen=True)
class ScanRow:
    sigma: float
    p: int
    q: int
    a: int
    c: float
    case: str
    verdict: str
    tag: Optional[str]
    criterion: float
    residual: float
    nehari: float
    pohozaev: float
    iterations: int
    converged: bool
    error: str = ""

    def as_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "p": self.p,
            "q": self.q,
            "a": self.a,
            "c": self.c,
            "case": self.case,
            "verdict": self.verdict,
            "tag": self.tag or "",
            "criterion": self.criterion,
            "residual": self.residual,
            "nehari": self.nehari,
            "pohozaev": self.pohozaev,
            "iterations": self.iterations,
            "converged": self.converged,
            "error": self.error,
        }


def _scan_row(sigma, p, q, a, c, grid, config) -> ScanRow:
    nan = float("nan")
    base = dict(sigma=sigma, p=p, q=q, a=a, c=c, criterion=nan, residual=nan,
                nehari=nan, pohozaev=nan, iterations=0, converged=False)
    try:
        label = classify_case(p, q, a)
        if label is CaseLabel.UNCOVERED:
            return ScanRow(case=label.value, verdict="", tag=None,
                           error="no covered ground state", **base)
        verdict = theorem_verdict(sigma, p, q, a)
        prm = ModelParams(sigma, p, q, a, c)
        state = _solve(prm, grid, config)
        rep = functional_report(state.profile, prm)
        base.update(criterion=rep.criterion, residual=state.residual,
                    nehari=rep.nehari, pohozaev=rep.pohozaev,
                    iterations=state.iterations, converged=state.converged)
        return ScanRow(case=label.value, verdict=verdict.kind.value,
                       tag=verdict.tag, **base)
    except (ConfigError, SolverError, ValueError) as exc:
        return ScanRow(case="", verdict="", tag=None,
                       error=f"{type(exc).__name__}: {exc}", **base)


def scan(
    sigma_list: Sequence[float],
    pq_list: Sequence[tuple],
    a_list: Sequence[int],
    c_list: Sequence[float],
    grid: Optional[Grid] = None,
    config: Optional[SolverConfig] = None,
    max_workers: Optional[int] = None,
) -> list[ScanRow]:
    """Criterion survey over the parameter product, one solve per row.

    Row order follows the input lists regardless of scheduling; failures
    are recorded in the row and do not stop the scan.
    """
    jobs = [
        (sigma, p, q, a, c)
        for sigma in sigma_list
        for (p, q) in pq_list
        for a in a_list
        for c in c_list
    ]
    if not jobs:
        return []
    if max_workers == 1:
        return [_scan_row(*job, grid, config) for job in jobs]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = [pool.submit(_scan_row, *job, grid, config) for job in jobs]
        return [f.result() for f in futures]
