"""Verdict table, numeric criterion, critical-speed search, and scans.

The verdict logic is rechecked against a second, independently written
encoding of the case table over the whole exponent range p < q <= 12 and
all boundary values of 2*sigma + 1, so any drift in the dispatch shows up
as a disagreement between the two encodings.
"""

import math
from fractions import Fraction

import numpy as np
import pytest

from fkdvlab import (
    CaseLabel,
    ConfigError,
    Grid,
    ModelParams,
    UncoveredCaseError,
    VerdictKind,
    classify_case,
    criterion_at,
    find_critical_speed,
    scaling_criterion,
    scan,
    theorem_verdict,
)

SIGMAS = (1.0, 1.25, 1.5, 1.75, 2.0)  # all exact binary fractions


def expected_verdict(sigma, p, q, a):
    """Independent re-encoding of the classification table.

    Returns ("uncovered",), or (kind string, tag or None).
    """
    crit = 2 * Fraction(sigma) + 1
    if a == 1:
        if q % 2 == 0:
            return ("uncovered",)
        if p >= crit:
            return ("unstable for all c", "I-1")
        if q > crit:
            return ("unstable beyond a critical speed", "I-2")
        return ("no assertion", None)
    if p % 2 == 1:
        if q == crit:
            return ("unstable for all c", "II-1-i")
        if q > crit and p <= crit:
            return ("unstable for all c", "II-1-ii")
        if p > crit:
            return ("unstable beyond a critical speed", "II-1-iii")
        return ("no assertion", None)
    if q % 2 == 0:
        return ("uncovered",)
    if p >= crit:
        return ("unstable for all c", "II-2-i")
    if q > crit:
        return ("unstable beyond a critical speed", "II-2-ii")
    return ("no assertion", None)


class TestCaseDispatch:
    def test_exhaustive_partition(self):
        for p in range(2, 12):
            for q in range(p + 1, 13):
                for a in (1, -1):
                    label = classify_case(p, q, a)
                    if a == 1:
                        want = CaseLabel.CASE_I if q % 2 else CaseLabel.UNCOVERED
                    elif p % 2:
                        want = CaseLabel.CASE_II_1
                    else:
                        want = CaseLabel.CASE_II_2 if q % 2 else CaseLabel.UNCOVERED
                    assert label is want, (p, q, a)

    @pytest.mark.parametrize("p,q", [(2, 2), (3, 2), (1, 3)])
    def test_rejects_bad_exponents(self, p, q):
        with pytest.raises(ConfigError):
            classify_case(p, q, 1)

    def test_rejects_bad_sign(self):
        with pytest.raises(ConfigError):
            classify_case(2, 3, 0)


class TestVerdictTable:
    def test_agrees_with_independent_encoding_everywhere(self):
        checked = 0
        for sigma in SIGMAS:
            for p in range(2, 12):
                for q in range(p + 1, 13):
                    for a in (1, -1):
                        want = expected_verdict(sigma, p, q, a)
                        if want == ("uncovered",):
                            with pytest.raises(UncoveredCaseError):
                                theorem_verdict(sigma, p, q, a)
                            continue
                        verdict = theorem_verdict(sigma, p, q, a)
                        assert verdict.kind.value == want[0], (sigma, p, q, a)
                        assert verdict.tag == want[1], (sigma, p, q, a)
                        checked += 1
        assert checked > 300

    def test_exact_boundary_dispatch(self):
        # q equal to the critical power at sigma = 3/2 is the all-speeds clause
        v = theorem_verdict(1.5, 3, 4, -1)
        assert v.kind is VerdictKind.UNSTABLE_ALL_C
        assert v.tag == "II-1-i"
        # one grid point over, the verdict moves to the critical-speed clause
        v = theorem_verdict(1.5, 5, 6, -1)
        assert v.tag == "II-1-iii"
        assert v.speed_name == "c2"

    def test_sigma_accepts_strings_and_fractions(self):
        as_float = theorem_verdict(1.5, 3, 4, -1)
        assert theorem_verdict("3/2", 3, 4, -1) == as_float
        assert theorem_verdict(Fraction(3, 2), 3, 4, -1) == as_float

    def test_speed_names(self):
        assert theorem_verdict(2.0, 2, 7, 1).speed_name == "c1"
        assert theorem_verdict(2.0, 7, 9, -1).speed_name == "c2"
        assert theorem_verdict(2.0, 2, 7, -1).speed_name == "c3"
        assert theorem_verdict(2.0, 2, 3, 1).speed_name is None

    def test_str_embeds_tag(self):
        assert str(theorem_verdict(2.0, 3, 5, -1)) == "unstable for all c [II-1-i]"
        assert str(theorem_verdict(2.0, 2, 3, 1)) == "no assertion"


class TestNumericCriterion:
    def test_matches_cached_states_at_unit_speed(self, solved):
        for name, value in [
            ("gardner", 0.5860093678181473),
            ("quintic_pos", 0.3725779651033908),
            ("cubic_quintic", -1.3928401074911487),
        ]:
            state = solved(name)
            crit = scaling_criterion(state.profile, state.params)
            assert crit == pytest.approx(value, rel=1e-9), name

    def test_sign_flips_across_families(self, solved):
        # theorem-silent Gardner sits on the stable side, the II-1-i case
        # on the unstable side, at the same speed
        assert scaling_criterion(
            solved("gardner").profile, solved("gardner").params
        ) > 0
        assert scaling_criterion(
            solved("cubic_quintic").profile, solved("cubic_quintic").params
        ) < 0

    def test_criterion_at_adapts_the_grid(self):
        # same state, two entry points
        params = ModelParams(2.0, 2, 3, 1)
        direct = criterion_at(params)
        assert direct == pytest.approx(0.5860093678181473, rel=1e-9)


class TestCriticalSpeed:
    def test_gardner_like_crossing(self):
        result = find_critical_speed(
            ModelParams(2.0, 2, 7, 1), bracket_hint=(0.5, 2.0)
        )
        assert result.found
        assert 0.99 <= result.lower < result.upper <= 1.01
        assert (result.upper - result.lower) <= 1e-3 * result.upper
        # verified sign change: positive values only below, negative above
        below = [v for c, v in result.evaluations if c <= result.lower]
        above = [v for c, v in result.evaluations if c >= result.upper]
        assert below and all(v > 0 for v in below)
        assert above and all(v < 0 for v in above)

    def test_reports_when_no_crossing_is_reachable(self):
        # criterion already negative at every probed speed down to the
        # floor; the honest outcome is found=False with the floor recorded
        result = find_critical_speed(
            ModelParams(2.0, 7, 9, -1), bracket_hint=(0.5, 2.0), c_min=0.01
        )
        assert not result.found
        assert "c_min" in result.note
        assert all(v < 0 for _, v in result.evaluations)


class TestScan:
    def test_small_matrix_rows(self):
        rows = scan([2.0], [(2, 3), (3, 5), (2, 4)], [1, -1], [1.0])
        assert len(rows) == 6
        by_key = {(r.p, r.q, r.a): r for r in rows}

        gardner = by_key[(2, 3, 1)]
        assert gardner.case == "I"
        assert gardner.verdict == "no assertion"
        assert gardner.criterion == pytest.approx(0.5860093678181473, rel=1e-9)
        assert gardner.converged and gardner.error == ""

        neg = by_key[(3, 5, -1)]
        assert neg.case == "II-1"
        assert neg.verdict == "unstable for all c"
        assert neg.tag == "II-1-i"
        assert neg.criterion == pytest.approx(-1.3928401074911487, rel=1e-9)

        for a in (1, -1):
            row = by_key[(2, 4, a)]
            assert row.case == "uncovered"
            assert not row.converged
            assert "ground state" in row.error
            assert math.isnan(row.criterion)

    def test_row_identities_are_small(self):
        rows = scan([2.0], [(2, 3)], [1], [1.0])
        row = rows[0]
        assert abs(row.nehari) <= 1e-6
        assert abs(row.pohozaev) <= 1e-6
        assert row.residual <= 1e-10

    def test_empty_matrix(self):
        assert scan([], [], [1], [1.0]) == []
