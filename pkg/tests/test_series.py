import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flatmod.errors import DivergentAtZeroT, ExtrapolationUnstable, NonInvariantPolynomial
from flatmod.lie_core import SUPPORTED_GROUPS, HolonomySpec, build_root_system
from flatmod.polynomial import InvariantPolynomial as P
from flatmod.series import (
    SurfaceTopology,
    assembled_invariant,
    boundary_derivative,
    c_to_u_limit,
    closed_form_group_volume,
    group_and_torus_volumes,
    heat_trace_volume,
    moduli_series,
    moduli_volume,
    regularized_limit,
    schedule_csv,
    series_document,
    torus_volume,
    vanishing_check,
)

A1 = build_root_system("A", 1)
A2 = build_root_system("A", 2)
SCHED = [0.4 * 2.0**-k for k in range(6)]
BASEL = math.pi**2 / 6
ETA2 = math.pi**2 / 12
# Mordell-Tornheim: sum 1/(a b (a+b))^2 = pi^6 / 2835, and d = ab(a+b)/2 for SU(3)
SU3_ZETA2 = 4 * math.pi**6 / 2835


def closed(g, u=0, rs=A1):
    return SurfaceTopology.closed(g, u, rs.rank)


def half_angle(theta):
    # orthonormal coordinate for A1 with alpha(C) = 2 theta
    return HolonomySpec(0, (math.sqrt(8) * theta,))


class TestSeriesExamples:
    def test_basel_at_t0_with_tail(self):
        res = moduli_series(A1, closed(2), None, 0.0, 10**6)
        assert abs(res.value - BASEL) <= res.tail_bound
        assert res.tail_bound < 1e-2

    def test_zeta4(self):
        res = moduli_series(A1, closed(3), None, 0.0, 2000)
        assert res.value == pytest.approx(math.pi**4 / 90, abs=1e-6)
        assert res.converged

    def test_eta2(self):
        assert regularized_limit(A1, closed(2, 1), None, SCHED).value == pytest.approx(ETA2, abs=1e-6)

    def test_nonorientable_case_ii(self):
        res = regularized_limit(A1, SurfaceTopology.nonorientable(1, "ii"), None, SCHED)
        assert res.value == pytest.approx(ETA2, abs=1e-6)

    def test_boundary_sawtooth(self):
        topo = SurfaceTopology(1, (half_angle(math.pi / 2),))
        assert regularized_limit(A1, topo, None).value == pytest.approx(math.pi / 4, abs=1e-5)

    @pytest.mark.parametrize("theta", [0.3, 1.0, 2.5])
    def test_boundary_sawtooth_general(self, theta):
        topo = SurfaceTopology(1, (half_angle(theta),))
        expect = (math.pi - theta) / (2 * math.sin(theta))
        assert regularized_limit(A1, topo, None).value == pytest.approx(expect, abs=1e-5)


class TestRegularizedLimit:
    def test_basel_not_degraded(self):
        assert regularized_limit(A1, closed(2), None, SCHED).value == pytest.approx(BASEL, abs=1e-6)

    def test_x4_central_minus_identity(self):
        assert abs(regularized_limit(A1, closed(2, 1), P.parse("x^4", 1), SCHED).value) < 1e-3

    def test_x2_central_minus_identity(self):
        # p(lam + rho) = n^2 / 8 in orthonormal coordinates: eta(0) / 8
        res = regularized_limit(A1, closed(2, 1), P.parse("x^2", 1), SCHED)
        assert res.value == pytest.approx(1 / 16, abs=1e-6)

    def test_x2_identity_is_zeta0(self):
        res = regularized_limit(A1, closed(2), P.parse("x^2", 1))
        assert res.value == pytest.approx(-1 / 16, abs=1e-6)

    def test_schedule_validation(self):
        with pytest.raises(ValueError):
            regularized_limit(A1, closed(2, 1), None, [0.1, 0.2, 0.05, 0.01])
        with pytest.raises(ValueError):
            regularized_limit(A1, closed(2, 1), None, [0.4, 0.2, 0.1])
        with pytest.raises(ValueError):
            # five-column model needs six points
            regularized_limit(A1, closed(2), None, [0.4, 0.2, 0.1, 0.05])

    def test_unstable_is_reported(self):
        # deg p = 2 on a boundary approaching e has no c -> u limit
        with pytest.raises(ExtrapolationUnstable):
            c_to_u_limit(A1, 2, 0, P.parse("x^2", 1))

    def test_non_invariant_rejected(self):
        with pytest.raises(NonInvariantPolynomial):
            regularized_limit(A2, closed(2, 0, A2), P.parse("x1^2", 2))

    def test_determinism_across_workers(self):
        a = regularized_limit(A2, closed(2, 1, A2), None, workers=1)
        b = regularized_limit(A2, closed(2, 1, A2), None, workers=4)
        assert a.value == b.value and a.schedule_values == b.schedule_values


class TestCtoU:
    def test_basel(self):
        assert c_to_u_limit(A1, 2, 0, None).value == pytest.approx(BASEL, abs=1e-4)

    def test_x4_vanishes(self):
        assert abs(c_to_u_limit(A1, 2, 0, P.parse("x^4", 1)).value) < 1e-3

    def test_x2_minus_identity_cross_method(self):
        c = c_to_u_limit(A1, 2, 1, P.parse("x^2", 1)).value
        r = regularized_limit(A1, closed(2, 1), P.parse("x^2", 1), SCHED).value
        assert c == pytest.approx(r, abs=1e-4)

    @pytest.mark.parametrize("u", [0, 1])
    def test_a2_spot_grid(self, u):
        c = c_to_u_limit(A2, 2, u, None).value
        r = regularized_limit(A2, closed(2, u, A2), None).value
        assert c == pytest.approx(r, abs=1e-4)

    def test_a2_identity_exact(self):
        assert regularized_limit(A2, closed(2, 0, A2), None).value == pytest.approx(SU3_ZETA2, abs=1e-5)

    def test_rejects_central_points(self):
        with pytest.raises(ValueError):
            c_to_u_limit(A1, 2, 0, None, [(0.0,), (0.1,), (0.05,)])


class TestTails:
    def test_divergent_at_zero(self):
        with pytest.raises(DivergentAtZeroT):
            moduli_series(A1, closed(2), P.parse("x^2", 1), 0.0, 100)
        with pytest.raises(DivergentAtZeroT):
            moduli_series(A1, closed(1), None, 0.0, 100)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(2, 4), st.integers(0, 1), st.integers(1, 200), st.integers(1, 200), st.sampled_from([0.0, 0.05, 0.5]))
    def test_nested_cutoffs_within_tail(self, g, u, k1, k2, t):
        lo, hi = sorted((k1, k2))
        topo = closed(g, u)
        a = moduli_series(A1, topo, None, t, lo)
        b = moduli_series(A1, topo, None, t, hi)
        assert abs(a.value - b.value) <= a.tail_bound * (1 + 1e-9) + 1e-15
        assert b.tail_bound <= a.tail_bound

    def test_tail_rank2(self):
        topo = closed(3, 0, A2)
        a = moduli_series(A2, topo, None, 0.0, 20)
        b = moduli_series(A2, topo, None, 0.0, 400)
        assert abs(a.value - b.value) <= a.tail_bound


class TestVolumes:
    def test_torus_volume_a1(self):
        assert torus_volume(A1) == pytest.approx(2 * math.pi * math.sqrt(8), rel=1e-15)

    def test_flatness_a1(self):
        assert heat_trace_volume(A1, 0.1) / heat_trace_volume(A1, 0.05) == pytest.approx(1, abs=1e-6)

    def test_flatness_a2(self):
        assert heat_trace_volume(A2, 0.05) / heat_trace_volume(A2, 0.025) == pytest.approx(1, abs=1e-4)

    def test_a1_volume_is_s3(self):
        # SU(2) = S^3 of radius sqrt(8) in the Killing metric (|alpha^vee|^2 = 8)
        vol_g, _ = group_and_torus_volumes(A1)
        assert vol_g == pytest.approx(2 * math.pi**2 * 8**1.5, rel=1e-12)

    @pytest.mark.parametrize("fam,rank", [g for g in SUPPORTED_GROUPS if g[1] <= 4 and g != ("A", 4)])
    def test_heat_trace_matches_closed_form(self, fam, rank):
        rs = build_root_system(fam, rank)
        vol_g, _ = group_and_torus_volumes(rs)
        assert vol_g == pytest.approx(closed_form_group_volume(rs), rel=1e-9)


class TestAssembled:
    def test_a1_genus2(self):
        vol_g, _ = group_and_torus_volumes(A1)
        expect = 2 * vol_g**2 / (2 * math.pi) ** 6 * BASEL
        assert moduli_volume(A1, closed(2)) == pytest.approx(expect, rel=1e-9)

    def test_pi1_order(self):
        one = moduli_volume(A1, closed(2, 1))
        assert moduli_volume(A1, closed(2, 1), pi1_order=2) == pytest.approx(one / 2, rel=1e-15)

    def test_volume_bit_identical(self):
        assert assembled_invariant(A1, closed(2)) == moduli_volume(A1, closed(2))
        assert assembled_invariant(A1, closed(2), P.constant(1)) == moduli_volume(A1, closed(2))

    def test_nonorientable_case_i(self):
        vol_g, _ = group_and_torus_volumes(A1)
        pref = 2 * vol_g**3 / (2 * math.pi) ** 9
        topo = SurfaceTopology.nonorientable(2, "i")
        assert moduli_volume(A1, topo) == pytest.approx(pref * ETA2, rel=1e-6)

    def test_generic_boundary(self):
        theta = math.pi / 2
        topo = SurfaceTopology(1, (half_angle(theta),))
        vol_g, vol_t = group_and_torus_volumes(A1)
        # dim = (2g + s - 2) dim G - rank = 2; |j| = 2 sin(theta)
        pref = 2 * vol_g / ((2 * math.pi) ** 2 * vol_t) * 2 * math.sin(theta)
        assert moduli_volume(A1, topo) == pytest.approx(pref * math.pi / 4, rel=1e-5)

    def test_positive_sign(self):
        assert moduli_volume(A2, closed(2, 1, A2)) > 0

    def test_mixed_boundaries_rejected(self):
        topo = SurfaceTopology(1, (HolonomySpec.central(1, 1), half_angle(1.0)))
        with pytest.raises(ValueError):
            moduli_volume(A1, topo)


class TestVanishing:
    def test_closed_x4(self):
        rep = vanishing_check(A1, closed(2), P.parse("x^4", 1))
        assert rep.expected_zero and rep.achieved < 1e-3 and not rep.violation

    def test_boundary_x6(self):
        rep = vanishing_check(A1, SurfaceTopology(2, (half_angle(math.pi / 2),)), P.parse("x^6", 1))
        assert rep.bound == 3 and rep.expected_zero and rep.achieved < 1e-3

    def test_closed_x2_not_expected(self):
        rep = vanishing_check(A1, closed(2), P.parse("x^2", 1))
        assert not rep.expected_zero and not rep.violation

    @pytest.mark.parametrize("deg", [4, 6, 8])
    @pytest.mark.parametrize("u", [0, 1])
    def test_suite(self, deg, u):
        p = P.parse(f"x^{deg}", 1)
        assert abs(regularized_limit(A1, closed(2, u), p).value) < 1e-3
        assert abs(c_to_u_limit(A1, 2, u, p).value) < 1e-3


class TestConventions:
    def test_exponent_table(self):
        assert closed(2).exponent() == 3
        assert SurfaceTopology.nonorientable(3, "i").exponent() == 4
        assert SurfaceTopology.nonorientable(3, "ii").exponent() == 6
        assert SurfaceTopology.nonorientable(3, "i").exponent("holonomy") == 5

    def test_holonomy_values(self):
        r = regularized_limit(A1, SurfaceTopology.nonorientable(1, "i"), None, convention="holonomy")
        assert r.value == pytest.approx(math.log(2), abs=1e-6)
        r = regularized_limit(A1, SurfaceTopology.nonorientable(1, "ii"), None, convention="holonomy")
        assert r.value == pytest.approx(BASEL, abs=1e-6)


def test_boundary_derivative():
    topo = SurfaceTopology(1, (half_angle(math.pi / 2),))
    # d/dtheta of (pi - theta) / (2 sin theta) at pi/2 is -1/2; x = sqrt(8) theta
    got = boundary_derivative(A1, topo, None, 0, (1.0,), step=1e-3)
    assert got == pytest.approx(-0.5 / math.sqrt(8), abs=1e-5)


def test_serialization():
    res = regularized_limit(A1, closed(2, 1), None, SCHED)
    doc = series_document(A1, closed(2, 1), None, res)
    assert {"group", "topology", "polynomial", "t_schedule", "cutoff", "value", "tail_bound", "schedule_values", "residual"} <= set(doc)
    json.dumps(doc)
    text = schedule_csv(res)
    lines = text.strip().split("\n")
    assert lines[0] == "t,partial_sum,residual" and len(lines) == 7
