"""Channel model, simulator invariants, determinism, and the handover study."""

import math

import numpy as np
import pytest

from smartps import netsim, scenarios
from smartps.netsim import (
    DEFAULT_CHANNELS, LTE, WIFI, ChannelParams, MetricsReport, SimError,
    SimParams, channel_map, report_percentiles, run, switch_time,
    walkaway_comparison,
)
from smartps.selector import Decision, MODEL
from smartps.traceio import WF, LF


# ---------------------------------------------------------------------------
# Channel model
# ---------------------------------------------------------------------------

class TestChannelMap:
    def test_wifi_at_reference_point(self):
        cap, rtt, loss = channel_map(-45.0, 25.0, WIFI)
        assert cap == pytest.approx(25.0)
        want_loss = 1.0 / (1.0 + math.exp((-45.0 + 75.0) / 3.0))
        assert loss == pytest.approx(want_loss, abs=1e-12)
        assert rtt == pytest.approx(20.0 * (1.0 + 1.0 * want_loss), abs=1e-9)

    def test_loss_is_half_at_cliff(self):
        _, rtt, loss = channel_map(-75.0, 25.0, WIFI)
        assert loss == pytest.approx(0.5)
        assert rtt == pytest.approx(30.0)

    def test_lte_at_reference_point(self):
        cap, rtt, loss = channel_map(-60.0, 20.0, LTE)
        assert cap == pytest.approx(15.0)
        want_loss = 1.0 / (1.0 + math.exp((-60.0 + 95.0) / 3.0))
        assert rtt == pytest.approx(38.0 * (1.0 + 2.0 * want_loss), abs=1e-9)

    def test_capacity_clamped_above_reference(self):
        cap_hi, _, _ = channel_map(-45.0, 40.0, WIFI)
        assert cap_hi == 25.0

    def test_capacity_shannon_shape_below_reference(self):
        p = DEFAULT_CHANNELS[WIFI]
        cap, _, _ = channel_map(-45.0, 10.0, WIFI)
        want = 25.0 * math.log2(1.0 + 10.0) / math.log2(1.0 + 10.0 ** 2.5)
        assert cap == pytest.approx(want, abs=1e-9)

    def test_capacity_monotone_in_sinr(self):
        caps = [channel_map(-45.0, s, WIFI)[0] for s in range(-10, 30, 2)]
        assert all(b >= a for a, b in zip(caps, caps[1:]))

    def test_loss_monotone_decreasing_in_rssi(self):
        losses = [channel_map(r, 25.0, WIFI)[2] for r in range(-110, -30, 5)]
        assert all(b <= a for a, b in zip(losses, losses[1:]))


# ---------------------------------------------------------------------------
# Simulator basics
# ---------------------------------------------------------------------------

def dead(interface):
    p = DEFAULT_CHANNELS[interface]
    return ChannelParams(cap_max=0.0, sinr_ref=p.sinr_ref, rssi_cliff=p.rssi_cliff,
                         loss_scale=p.loss_scale, rtt_floor=p.rtt_floor,
                         rtt_loss_factor=p.rtt_loss_factor)


class TestRun:
    def test_zero_duration_rejected(self):
        with pytest.raises(SimError):
            run(scenarios.stable(seed=0, duration=0.0), WF)

    def test_zero_capacity_delivers_nothing(self):
        params = SimParams(duration=2.0, channels={WIFI: dead(WIFI), LTE: dead(LTE)})
        rep = run(scenarios.stable(seed=0, duration=2.0), WF, params)
        assert rep.total_goodput == 0.0
        assert rep.ad_samples == []
        assert rep.conservation_ok

    def test_single_perfect_path_approaches_capacity(self):
        from smartps.traceio import Scenario, Segment, constant
        scn = Scenario(name="perfect", duration=10.0, seed=0, segments=(
            Segment(0.0, {"rssi_wifi": constant(-40.0),
                          "sinr_wifi": constant(30.0)}),))
        params = SimParams(duration=10.0, seed=1, channels={
            WIFI: DEFAULT_CHANNELS[WIFI], LTE: dead(LTE)})
        rep = run(scn, WF, params)
        assert 23.0 <= rep.total_goodput <= 25.0 * 1.05

    def test_goodput_bounded_by_combined_capacity(self):
        rep = run(scenarios.stable(seed=2, duration=5.0), "RR",
                  SimParams(duration=5.0, seed=2))
        assert rep.total_goodput <= 40.0

    def test_conservation_holds_across_policies(self):
        scn = scenarios.walkaway(seed=5, duration=10.0)
        for policy in (WF, LF, "MINRTT", "RR"):
            rep = run(scn, policy, SimParams(duration=10.0, seed=5))
            assert rep.conservation_ok

    def test_decision_cadence(self):
        rep = run(scenarios.stable(seed=0, duration=2.0), WF,
                  SimParams(duration=2.0))
        assert len(rep.decisions) == 20  # one per 100 ms

    def test_window_series_aligned(self):
        rep = run(scenarios.stable(seed=0, duration=1.0), WF,
                  SimParams(duration=1.0))
        assert len(rep.window_t) == len(rep.ag_series) == 10
        assert len(rep.accumulation[WIFI]) == len(rep.accumulation[LTE]) == 10
        assert rep.window_t[0] == 0.0

    def test_ad_at_least_one_way_delay(self):
        params = SimParams(duration=5.0, seed=3, channels={
            WIFI: DEFAULT_CHANNELS[WIFI], LTE: dead(LTE)})
        rep = run(scenarios.stable(seed=0, duration=5.0), WF, params)
        assert rep.ad_samples
        assert min(v for _, v in rep.ad_samples) >= 10.0  # half of 20 ms rtt

    def test_cwnd_cap_bounds_accumulation(self):
        params = SimParams(duration=3.0, seed=4, cwnd_init=1.0, cwnd_max=1.0)
        rep = run(scenarios.stable(seed=0, duration=3.0), WF, params)
        for name in (WIFI, LTE):
            assert max(rep.accumulation[name]) <= 1500.0

    def test_byte_identical_determinism(self):
        scn = scenarios.walkaway(seed=9, duration=5.0)
        a = run(scn, "MINRTT", SimParams(duration=5.0, seed=9))
        b = run(scn, "MINRTT", SimParams(duration=5.0, seed=9))
        assert a.to_csv_bundle() == b.to_csv_bundle()

    def test_seed_changes_outcome(self):
        a = run(scenarios.walkaway(seed=1, duration=5.0), "MINRTT",
                SimParams(duration=5.0, seed=1))
        b = run(scenarios.walkaway(seed=2, duration=5.0), "MINRTT",
                SimParams(duration=5.0, seed=2))
        assert a.to_csv_bundle() != b.to_csv_bundle()


# ---------------------------------------------------------------------------
# Report percentiles and CSV bundle
# ---------------------------------------------------------------------------

def make_report(**overrides):
    base = dict(policy="WF", scenario="s", seed=0, window=0.1,
                window_t=[0.0, 0.1, 0.2], ag_series=[10.0, 20.0, 30.0],
                ad_samples=[(0.1, 10.0), (0.2, 20.0), (0.3, 30.0)],
                accumulation={WIFI: [0.0, 1500.0, 3000.0], LTE: [0.0, 0.0, 0.0]},
                decisions=[Decision(0.0, WF, MODEL)], total_goodput=20.0,
                conservation_ok=True)
    base.update(overrides)
    return MetricsReport(**base)


class TestReport:
    def test_ad_median(self):
        assert report_percentiles(make_report(), "ad", 50) == 20.0

    def test_ag_p90(self):
        assert report_percentiles(make_report(), "ag", 90) == 30.0

    def test_accumulation_percentile(self):
        assert report_percentiles(make_report(), "acc_wifi", 90) == 3000.0

    def test_unknown_metric_rejected(self):
        with pytest.raises(SimError):
            report_percentiles(make_report(), "bogus", 50)

    def test_csv_bundle_files(self):
        bundle = make_report().to_csv_bundle()
        assert set(bundle) == {"ag.csv", "ad.csv", "accumulation.csv",
                               "decisions.csv", "summary.txt"}
        assert bundle["ag.csv"].startswith("t,ag_mbps\n")
        assert "total_goodput_mbps 20.000000" in bundle["summary.txt"]


# ---------------------------------------------------------------------------
# Switch detection and the walkaway study
# ---------------------------------------------------------------------------

def dseq(prios, dt=0.1):
    return [Decision(i * dt, p, MODEL) for i, p in enumerate(prios)]


class TestSwitchTime:
    def test_static_lf_switches_at_zero(self):
        assert switch_time(dseq([LF] * 20)) == 0.0

    def test_never_switching_is_none(self):
        assert switch_time(dseq([WF] * 20)) is None

    def test_reports_window_start(self):
        prios = [WF] * 30 + [LF] * 10
        # First trailing window with >= 8/10 LF covers decisions 28..37, so
        # the reported time is that window's start (index 28).
        assert switch_time(dseq(prios)) == pytest.approx(2.8)

    def test_short_sequences_never_fire(self):
        assert switch_time(dseq([LF] * 9)) is None

    def test_tolerates_sparse_dissent(self):
        prios = ([WF] * 10 + [LF, LF, LF, LF, WF, LF, LF, LF, LF, LF])
        # Window covering decisions 9..18 holds 8 LF; its start is index 9.
        assert switch_time(dseq(prios)) == pytest.approx(0.9)


class TestWalkaway:
    def test_smartps_switches_no_later_than_minrtt(self):
        cmp = walkaway_comparison(seed=0, params=SimParams(duration=60.0))
        s = cmp.switch_times["SMARTPS"]
        m = cmp.switch_times["MINRTT"]
        assert s is not None
        inf = float("inf")
        assert s <= (m if m is not None else inf)

    def test_smartps_drains_wifi_after_cliff(self):
        cmp = walkaway_comparison(seed=0, params=SimParams(duration=60.0))
        assert (cmp.degraded_accumulation_p90["SMARTPS"]
                < cmp.degraded_accumulation_p90["MINRTT"])
