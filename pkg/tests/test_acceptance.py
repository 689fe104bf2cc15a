"""Go/no-go suite.

Eleven checks, one test each, covering the full pipeline: closed-form
recovery, stationarity identities, the scaling criterion against a direct
second difference, sign tables along speed ladders, the critical-speed
bracket, the speed limit of rescaled profiles, kernel asymptotics, decay
rates, faithful soliton propagation, and the dilated-data experiment.

Every test registers a PASS/FAIL line with the measured numbers on the
scoreboard (printed after the run) before asserting, so one glance at the
summary gives the verdict per criterion even on a red run.
"""

import math
import time
import warnings

import numpy as np
import pytest

from conftest import (
    MATRIX,
    identity_tolerance,
    relative_nehari,
    relative_pohozaev,
    single_signed,
)
from fkdvlab import (
    EvolutionConfig,
    Grid,
    ModelParams,
    action,
    classify_case,
    compute_G,
    compute_K_km,
    convergence_study,
    criterion_at,
    dilate,
    evolve,
    find_critical_speed,
    fit_tail,
    g1_origin_check,
    ground_state_sign,
    instability_experiment,
    kernel_mass,
    kernel_tail_constant,
    scaling_criterion,
    sobolev_norm,
    solve_single_power,
)

EULER_GAMMA = 0.5772156649015329


def test_criterion_01_quadratic_closed_form(record_criterion):
    start = time.perf_counter()
    grid = Grid(60.0, 4096)
    state = solve_single_power(2.0, 2, grid)
    elapsed = time.perf_counter() - start
    exact = 1.5 / np.cosh(0.5 * grid.x) ** 2
    rel = float(np.max(np.abs(state.profile.values - exact)) / np.max(exact))
    ok = rel <= 1e-8 and elapsed < 10.0
    record_criterion(
        1, ok, f"sech^2 recovery rel err {rel:.2e} in {elapsed:.2f}s (limits 1e-8, 10s)"
    )
    assert rel <= 1e-8
    assert elapsed < 10.0


def test_criterion_02_lorentzian_closed_form(record_criterion):
    start = time.perf_counter()
    grid = Grid(800.0, 32768)
    state = solve_single_power(1.0, 2, grid)
    peak = float(np.max(state.profile.values))
    peak_err = abs(peak - 2.0) / 2.0
    fit = fit_tail(state.profile, 1.0, derivative_order=0, window=(80.0, 240.0))
    exp_err = abs(fit.exponent / -2.0 - 1.0)
    elapsed = time.perf_counter() - start
    ok = peak_err <= 1e-3 and exp_err <= 0.05 and elapsed < 60.0
    record_criterion(
        2,
        ok,
        f"peak rel err {peak_err:.2e} (limit 1e-3), tail exponent "
        f"{fit.exponent:.4f} off -2 by {100 * exp_err:.2f}% (limit 5%), "
        f"{elapsed:.1f}s (limit 60s)",
    )
    assert peak_err <= 1e-3
    assert exp_err <= 0.05
    assert elapsed < 60.0


def test_criterion_03_stationarity_identities(record_criterion, solved):
    worst_n = worst_p = 0.0
    cases = set()
    sigmas = set()
    failures = []
    for name in sorted(MATRIX):
        state = solved(name)
        params = state.params
        cases.add(classify_case(params.p, params.q, params.a).value)
        sigmas.add(params.sigma)
        tol = identity_tolerance(params.sigma)
        rn = relative_nehari(state)
        rp = relative_pohozaev(state)
        worst_n = max(worst_n, rn)
        worst_p = max(worst_p, rp)
        sign = ground_state_sign(params.p, params.q, params.a)
        even_ok = state.profile.even_defect() <= 1e-9 * state.profile.max_abs
        sign_ok = single_signed(state.profile.values, sign)
        if rn > tol or rp > tol or not even_ok or not sign_ok:
            failures.append(name)
    span_ok = (
        len(MATRIX) >= 8
        and cases == {"I", "II-1", "II-2"}
        and sigmas == {1.0, 1.5, 2.0}
    )
    ok = not failures and span_ok
    record_criterion(
        3,
        ok,
        f"{len(MATRIX)} states over cases {sorted(cases)} and sigma "
        f"{sorted(sigmas)}; worst rel nehari {worst_n:.1e}, "
        f"pohozaev {worst_p:.1e}",
    )
    assert span_ok
    assert not failures, failures


def test_criterion_04_criterion_vs_second_difference(record_criterion, solved):
    h = 1e-3
    worst_ratio = 0.0
    failures = []
    for name in sorted(MATRIX):
        state = solved(name)
        u, params = state.profile, state.params
        crit = scaling_criterion(u, params)
        with warnings.catch_warnings():
            # dilation clips algebraic tails at the box edge; harmless at h = 1e-3
            warnings.simplefilter("ignore")
            s_mid = action(u, params)
            numeric = (
                action(dilate(u, 1.0 + h), params)
                - 2.0 * s_mid
                + action(dilate(u, 1.0 - h), params)
            ) / h**2
        tol = max(1e-4 * abs(crit), 1e-6 * abs(s_mid))
        err = abs(numeric - crit)
        worst_ratio = max(worst_ratio, err / tol)
        if err > tol:
            failures.append((name, err, tol))
    ok = not failures
    record_criterion(
        4,
        ok,
        f"second difference (h = 1e-3) on {len(MATRIX)} states; "
        f"worst error / tolerance = {worst_ratio:.3f}",
    )
    assert not failures, failures


def test_criterion_05_sign_table_along_speeds(record_criterion):
    start = time.perf_counter()
    speeds = (0.5, 1.0, 5.0)
    unstable = (
        ModelParams(2.0, 3, 5, -1),
        ModelParams(1.5, 3, 4, -1),
        ModelParams(1.5, 4, 5, -1),
        ModelParams(2.0, 5, 7, +1),
    )
    bad = []
    for params in unstable:
        for c in speeds:
            value = criterion_at(params.with_c(c))
            if not value < 0.0:
                bad.append((params.p, params.q, params.a, c, value))
    control = ModelParams(2.0, 2, 3, +1)
    for c in speeds:
        value = criterion_at(control.with_c(c))
        if not value > 0.0:
            bad.append((control.p, control.q, control.a, c, value))
    elapsed = time.perf_counter() - start
    ok = not bad and elapsed < 600.0
    record_criterion(
        5,
        ok,
        f"criterion negative for 4 families x 3 speeds, positive control, "
        f"{elapsed:.1f}s (limit 600s)",
    )
    assert not bad, bad
    assert elapsed < 600.0


def test_criterion_06_critical_speed_bracket(record_criterion):
    params = ModelParams(2.0, 2, 7, +1)
    result = find_critical_speed(params)
    rel_width = (result.upper - result.lower) / result.upper if result.found else math.inf
    sign_ok = result.found and all(
        (v > 0 if c <= result.lower else v < 0 if c >= result.upper else True)
        for c, v in result.evaluations
    )
    beyond = criterion_at(params.with_c(10.0 * result.upper)) if result.found else math.nan
    ok = result.found and rel_width <= 1e-3 and sign_ok and beyond < 0.0
    record_criterion(
        6,
        ok,
        f"bracket [{result.lower:.6f}, {result.upper:.6f}], rel width "
        f"{rel_width:.2e} (limit 1e-3), criterion at 10x upper = {beyond:.2f}",
    )
    assert result.found
    assert rel_width <= 1e-3
    assert sign_ok
    assert beyond < 0.0


def test_criterion_07_fast_speed_limit(record_criterion):
    speeds = [1.0, 10.0, 100.0, 1000.0]
    grid = Grid(60.0, 2048)
    summaries = []
    ok = True
    for a in (+1, -1):
        rows = convergence_study(ModelParams(2.0, 2, 3, a), speeds, grid)
        d = [row.distance for row in rows]
        decreasing = all(x > y for x, y in zip(d, d[1:]))
        ok = ok and decreasing
        summaries.append(f"a={a:+d}: {d[0]:.2e} -> {d[-1]:.2e}")
    record_criterion(
        7, ok, "distance to the pure-power limit strictly decreasing over "
        f"c = {speeds}; " + "; ".join(summaries)
    )
    assert ok


def test_criterion_08_kernel_suite(record_criterion):
    checks = {}

    masses = {s: kernel_mass(s) for s in (1.0, 1.25, 1.5, 1.75)}
    checks["mass"] = all(abs(m - 1.0) <= 1e-4 for m in masses.values())

    xs = np.geomspace(0.1, 20.0, 25)
    g2 = compute_G(2.0, xs)
    closed_err = float(np.max(np.abs(g2.values - 0.5 * np.exp(-xs))))
    checks["sigma2_closed_form"] = closed_err <= 1e-6

    positive = bool(np.all(g2.values > 0.0))
    plateau_hi = {1.0: 400.0, 1.25: 800.0, 1.5: 800.0, 1.75: 700.0}
    plateau_worst = 0.0
    for sigma, x_hi in plateau_hi.items():
        sample = compute_G(sigma, np.geomspace(x_hi / 100.0, x_hi, 25))
        positive = positive and bool(np.all(sample.values > 0.0))
        fit = kernel_tail_constant(sample)
        plateau_worst = max(plateau_worst, fit.residual)
    checks["plateau"] = plateau_worst <= 0.02
    # the cosine-transform representation is even in x by construction
    checks["positive"] = positive

    ratio = g1_origin_check([1e-4])[0][1]
    law = 1.0 - EULER_GAMMA / math.log(1e4)
    checks["origin_ratio"] = abs(ratio - 1.0) <= 0.05

    bound = 10.0 * math.gamma(2.5) * math.sin(0.75 * math.pi) / math.pi
    k_ok = True
    for k, m in ((1, 1), (2, 1), (2, 2)):
        sample = compute_K_km(k, m, 1.5, np.geomspace(4.0, 400.0, 20))
        weighted = np.abs(sample.values) * sample.points**2.5
        k_ok = k_ok and bool(np.all(np.isfinite(weighted))) and float(
            np.max(weighted)
        ) <= bound
    checks["iterated_tails"] = k_ok

    ok = all(checks.values())
    failed = sorted(name for name, good in checks.items() if not good)
    detail = (
        f"mass off by <= {max(abs(m - 1.0) for m in masses.values()):.1e}, "
        f"sigma=2 closed form {closed_err:.1e}, plateau variation "
        f"{plateau_worst:.4f}, origin ratio {ratio:.4f} "
        f"(equals 1 - gamma/log(1e4) = {law:.4f}, outside the 5% pin around 1)"
    )
    record_criterion(8, ok, detail + (f"; failing: {failed}" if failed else ""))
    assert ok, f"failing sub-checks: {failed}; {detail}"


def test_criterion_09_decay_exponents(record_criterion, solved):
    cases = [
        ("s1_23", 1.0, (80.0, 240.0)),
        ("s32_23", 1.5, (30.0, 90.0)),
    ]
    offs = []
    ok = True
    for name, sigma, window in cases:
        state = solved(name)
        for order in (0, 1):
            fit = fit_tail(state.profile, sigma, derivative_order=order, window=window)
            want = -(1.0 + sigma) - order
            off = abs(fit.exponent / want - 1.0)
            offs.append(f"sigma={sigma} l={order}: {100 * off:.2f}%")
            ok = ok and off <= 0.05
    exp_fit = fit_tail(solved("gardner").profile, 2.0)
    exponential_ok = exp_fit.exponent == pytest.approx(-1.0, abs=5e-3)
    ok = ok and exponential_ok
    record_criterion(
        9,
        ok,
        "algebraic exponents off by " + ", ".join(offs) +
        f" (limit 5%); sigma=2 rate {exp_fit.exponent:.5f}",
    )
    assert ok, offs


def test_criterion_10_soliton_propagation(record_criterion, solved):
    state = solved("gardner")
    traj = evolve(
        state.profile,
        state.params,
        EvolutionConfig(dt=2e-3, t_end=10.0, sample_stride=100),
        reference=state,
    )
    drift = max(np.max(np.abs(traj.mass_drift)), np.max(np.abs(traj.energy_drift)))
    tube = float(np.max(traj.tube_distance))
    tube_limit = 1e-6 * sobolev_norm(state.profile, 1.0)
    speed_err = float(np.max(np.abs(traj.shift - state.params.c * traj.times)))

    finals = []
    for dt in (4e-3, 2e-3, 1e-3):
        run = evolve(
            state.profile,
            state.params,
            EvolutionConfig(dt=dt, t_end=1.0, sample_stride=int(round(1.0 / dt))),
        )
        finals.append(run.final.values)
    e_coarse = float(np.max(np.abs(finals[0] - finals[1])))
    e_fine = float(np.max(np.abs(finals[1] - finals[2])))
    ratio = e_coarse / e_fine

    ok = (
        drift <= 1e-8
        and tube <= tube_limit
        and speed_err <= 1e-4
        and 12.0 <= ratio <= 20.0
    )
    record_criterion(
        10,
        ok,
        f"drift {drift:.1e} (limit 1e-8), tube {tube:.1e} (limit {tube_limit:.1e}), "
        f"speed err {speed_err:.1e} (limit 1e-4), step-halving ratio {ratio:.1f} "
        f"(fourth order: [12, 20])",
    )
    assert drift <= 1e-8
    assert tube <= tube_limit
    assert speed_err <= 1e-4
    assert 12.0 <= ratio <= 20.0


def test_criterion_11_dilated_data_escape(record_criterion):
    start = time.perf_counter()
    cfg = EvolutionConfig(dt=1e-3, t_end=200.0, sample_stride=200)

    params, grid = MATRIX["cubic_quintic"]
    result = instability_experiment(params, 0.01, 0.1, cfg, grid=grid)
    dj = np.abs(result.trajectory.virial - result.trajectory.virial[0])
    escape_ok = (
        result.verdict == "escaped"
        and result.exit_time is not None
        and result.exit_time < 200.0
        and result.action_drop < 0.0
        and bool(np.all(np.diff(dj[-3:]) > 0))
    )

    control_params, control_grid = MATRIX["gardner"]
    control = instability_experiment(control_params, 0.01, 0.1, cfg, grid=control_grid)
    control_ok = (
        control.verdict == "stayed"
        and control.trajectory.times[-1] >= 199.0
    )
    elapsed = time.perf_counter() - start

    ok = escape_ok and control_ok and elapsed < 900.0
    record_criterion(
        11,
        ok,
        f"negative-criterion run escapes at t = {result.exit_time:g} with action "
        f"drop {result.action_drop:.2e} and |J - J0| growing to {dj[-1]:.3f}; "
        f"positive-criterion control stays for 200 time units; "
        f"{elapsed:.0f}s (limit 900s)",
    )
    assert escape_ok
    assert control_ok
    assert elapsed < 900.0
