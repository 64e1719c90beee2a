import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from raas.costs import (CandidateVehicle, DegenerateRates, arrangement_cost, avg_arrival,
                        blocked_volume, do_nothing_split, leaving_rate, loyalty_cost,
                        monetary_cost, passenger_split, payment_phase, price_vehicle,
                        service_rate, vehicle_distance, willingness_to_wait)
from raas.model import CostParams, DemandBin, Mode, ModeKind

BUS = Mode(ModeKind.BUS, 0.454, 0.0, 70, 20.0)
TAXI = Mode(ModeKind.TAXI, 2.2, 1.72, 4, 30.0)
P = CostParams()


def cand(vid="b", mode=ModeKind.BUS, d_ri=2.0, d_ij=12.0, ta=600.0, cap=70):
    return CandidateVehicle(vid, mode, ("I", "J"), d_ri, d_ij, ta, cap, 20.0, "o")


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


class TestBlockedVolume:
    def test_constant_rate_two_hours(self):
        bins = (DemandBin(0, 7200, 150.0),)
        assert blocked_volume(bins, (0, 7200)) == 300.0

    def test_zero_rate(self):
        assert blocked_volume((DemandBin(0, 3600, 0.0),), (0, 3600)) == 0.0

    def test_two_bins(self):
        bins = (DemandBin(25200, 28800, 100.0), DemandBin(28800, 32400, 200.0))
        assert blocked_volume(bins, (25200, 32400)) == 300.0

    def test_partial_overlap_and_gaps(self):
        bins = (DemandBin(0, 3600, 60.0),)
        assert blocked_volume(bins, (1800, 7200)) == 30.0


class TestPaymentPhase:
    def test_early(self):
        assert payment_phase(30 * 60, 120 * 60, 0.3, 1.0) == 1.0

    def test_middle(self):
        assert payment_phase(90 * 60, 120 * 60, 0.3, 1.0) == 0.0

    def test_late_value(self):
        y = payment_phase(130 * 60, 120 * 60, 0.3, 1.0)
        assert rel(y, float(Fraction(-3, 7))) < 1e-9

    def test_boundaries(self):
        assert payment_phase(60 * 60, 120 * 60, 0.3, 1.0) == 1.0
        assert payment_phase(120 * 60, 120 * 60, 0.3, 1.0) == -0.3 / 0.7

    def test_degenerate_rates(self):
        with pytest.raises(DegenerateRates):
            payment_phase(200, 100, 0.5, 0.5)

    @settings(max_examples=10_000, deadline=None)
    @given(st.floats(0, 1e5), st.floats(1, 1e5))
    def test_step_function(self, ta, td):
        y = payment_phase(ta, td, 0.3, 1.0)
        if ta <= td / 2:
            assert y == 1.0
        elif ta < td:
            assert y == 0.0
        else:
            assert y == -0.3 / 0.7


class TestServiceRate:
    def test_bus_full_rate(self):
        assert rel(service_rate(BUS, 14, 1.0, 0.3, 1.0), 0.454) < 1e-9

    def test_bus_min_rate(self):
        assert rel(service_rate(BUS, 14, 0.0, 0.3, 1.0), 0.1362) < 1e-9

    def test_late_is_zero(self):
        assert service_rate(BUS, 14, -0.3 / 0.7, 0.3, 1.0) == 0.0
        assert service_rate(TAXI, 9, -0.3 / 0.7, 0.3, 1.0) == 0.0

    def test_taxi_fare_rule(self):
        assert rel(service_rate(TAXI, 10, 1.0, 0.3, 1.0), 2.2 + 17.2) < 1e-12

    @given(st.floats(0, 50), st.floats(1, 5000), st.floats(0, 5000))
    def test_nonincreasing_in_ta(self, d, td, ta):
        early = service_rate(TAXI, d, payment_phase(ta, td, 0.3, 1.0), 0.3, 1.0)
        later = service_rate(TAXI, d, payment_phase(ta + 100, td, 0.3, 1.0), 0.3, 1.0)
        assert later <= early + 1e-12


class TestDistanceAndArrangement:
    def test_distance(self):
        assert vehicle_distance(cand(d_ri=2, d_ij=12)) == 14
        assert vehicle_distance(cand(d_ri=0, d_ij=12)) == 12
        assert vehicle_distance(cand(d_ri=5, d_ij=0)) == 5

    def test_transfer_one_bus(self):
        c = cand(ta=600)
        v = price_vehicle(c, BUS, 7200, P)
        assert rel(v.transfer, 444.92) < 1e-9

    def test_arrangement_example(self):
        c = cand(ta=4.27 * 60)
        assert rel(arrangement_cost(c, 444.92, 0.2), 88.984 / 4.27) < 1e-9
        assert round(arrangement_cost(c, 444.92, 0.2), 2) == 20.84

    def test_arrangement_zero_rate(self):
        assert arrangement_cost(cand(), 444.92, 0.0) == 0.0

    def test_arrangement_clamped(self):
        assert arrangement_cost(cand(ta=30), 444.92, 0.2) == 0.2 * 444.92

    def test_late_vehicle_still_pays_arrangement(self):
        v = price_vehicle(cand(ta=8000), BUS, 7200, P)
        assert v.transfer == 0.0
        assert v.arrangement > 0.0

    def test_empty_selection(self):
        t, a, items = monetary_cost([], {ModeKind.BUS: BUS}, 7200, P)
        assert (t, a, items) == (0.0, 0.0, [])

    def test_ta_override(self):
        c = cand(ta=600)
        assert price_vehicle(c, BUS, 7200, P, ta=5000).y == 0.0


class TestArrivalAndBehaviour:
    def test_avg_arrival(self):
        sel = [cand("a", ta=200), cand("b", ta=312)]
        assert avg_arrival(sel, ModeKind.BUS) == 256.0
        assert avg_arrival(sel[:1], ModeKind.BUS) == 200.0
        assert avg_arrival(sel, ModeKind.TAXI) == 0.0

    def test_leaving_rate_examples(self):
        assert leaving_rate(0, 7200, 0.1, 0.1) == 0.1
        assert rel(leaving_rate(7200, 7200, 0.1, 0.1), 0.9) < 1e-12
        assert rel(leaving_rate(256, 7200, 0.1, 0.1), 0.12844444444444444) < 1e-9
        assert rel(leaving_rate(256, 7200, 0.1, 0.1), 0.1 + 0.8 * 256 / 7200) < 1e-9

    @given(st.floats(0, 1e5), st.floats(1, 1e5), st.floats(0, 0.5), st.floats(0, 0.5))
    def test_leaving_rate_bounds(self, m, td, a, b):
        lr = leaving_rate(m, td, a, b)
        assert a - 1e-12 <= lr <= 1 - b + 1e-12
        assert leaving_rate(m + 10, td, a, b) >= lr - 1e-12

    def test_willingness(self):
        assert willingness_to_wait(0, 7200, 0.2) == 1.0
        assert rel(willingness_to_wait(7200, 7200, 0.2), 0.2) < 1e-12
        assert rel(willingness_to_wait(3600, 7200, 0.2), 0.6) < 1e-12

    def test_split_examples(self):
        s = passenger_split(300, 0.2, 280)
        assert (s.leaving, s.waiting) == (60, 0.0)
        s = passenger_split(900, 0.1, 280)
        assert (s.leaving, s.waiting) == (90, 530.0)
        s = passenger_split(0, 0.5, 10)
        assert (s.leaving, s.waiting, s.served) == (0, 0.0, 0.0)

    def test_round_half_up(self):
        assert passenger_split(5, 0.5, 0).leaving == 3

    @given(st.integers(0, 2000), st.floats(0, 1), st.integers(0, 2000))
    def test_split_conservation(self, v, lr, cap):
        s = passenger_split(v, lr, cap)
        if cap <= v - s.leaving:
            assert s.leaving + s.served + s.waiting == v
        else:
            assert s.waiting == 0


class TestLoyalty:
    def test_do_nothing_7395(self):
        s = do_nothing_split(300, P)
        assert (s.leaving, s.waiting) == (270, 30.0)
        lc = loyalty_cost({("I", "J"): s}, {}, P, 7200)
        assert rel(lc.total, (2.5 + 22.4) * 270 + 22.4 * 30) < 1e-9
        assert rel(lc.total, 7395.0) < 1e-9

    def test_all_zero(self):
        s = passenger_split(0, 0.5, 0)
        assert loyalty_cost({("I", "J"): s}, {("R", "S"): (s, 15)}, P, 7200).total == 0.0

    def test_deliberate_109(self):
        s = passenger_split(30, 1 / 3, 0)
        assert (s.leaving, s.waiting) == (10, 20.0)
        lc = loyalty_cost({}, {("R", "S"): (s, 15.0)}, P, 7200)
        assert rel(lc.total, 109.0) < 1e-9

    @given(st.integers(0, 500), st.integers(0, 500), st.floats(0, 50), st.floats(0, 50))
    def test_additive_and_homogeneous(self, v1, v2, cl, ct):
        p = CostParams(cl=cl, ct=ct)
        a = {("A", "B"): passenger_split(v1, 0.3, 50)}
        b = {("C", "D"): passenger_split(v2, 0.6, 10)}
        both = loyalty_cost({**a, **b}, {}, p, 5400).total
        parts = loyalty_cost(a, {}, p, 5400).total + loyalty_cost(b, {}, p, 5400).total
        assert math.isclose(both, parts, rel_tol=1e-12, abs_tol=1e-9)
        p2 = CostParams(cl=2 * cl, ct=2 * ct)
        assert math.isclose(loyalty_cost(a, {}, p2, 5400).total,
                            2 * loyalty_cost(a, {}, p, 5400).total, rel_tol=1e-12, abs_tol=1e-9)


@given(st.floats(0.01, 5), st.floats(0, 50))
def test_transfer_linear_in_op_cost(k, d):
    m1 = Mode(ModeKind.BUS, 0.454, 0.0, 70, 20.0)
    m2 = Mode(ModeKind.BUS, 0.454 * k, 0.0, 70, 20.0)
    c = cand(d_ri=d)
    t1 = price_vehicle(c, m1, 7200, P).transfer
    t2 = price_vehicle(c, m2, 7200, P).transfer
    assert math.isclose(t2, k * t1, rel_tol=1e-12, abs_tol=1e-12)
