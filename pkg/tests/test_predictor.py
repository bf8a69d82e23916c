import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from guardian.errors import InsufficientDataError
from guardian.memory import IncidentMemory, IncidentRecord, IncidentSignature
from guardian.predictor import (
    Series,
    fit_trend,
    forecast_disk_fill,
    forecast_heap,
    forecast_nvme_wear,
    forecast_shard_growth,
    log_escalation,
    nic_risk,
    pattern_predict,
)


def hourly(values):
    return Series.of([(i * 3600.0, v) for i, v in enumerate(values)])


class TestFitTrend:
    def test_exact_linear_slope(self):
        fit = fit_trend(Series.of([(0, 50.0), (3600, 55.0), (7200, 60.0)]))
        assert fit.slope_per_h == pytest.approx(5.0, rel=1e-12)
        assert fit.r2 == pytest.approx(1.0)

    def test_constant_series(self):
        fit = fit_trend(hourly([42.0, 42.0, 42.0]))
        assert fit.slope_per_h == 0.0
        assert fit.r2 == 1.0

    def test_needs_two_points(self):
        with pytest.raises(InsufficientDataError):
            fit_trend(Series.of([(0, 1.0)]))

    def test_timestamps_must_increase(self):
        with pytest.raises(ValueError):
            Series.of([(10, 1.0), (10, 2.0)])

    def test_negative_slope(self):
        fit = fit_trend(hourly([60.0, 55.0, 50.0]))
        assert fit.slope_per_h == pytest.approx(-5.0)


class TestEtaForecasts:
    def test_disk_eta_exact(self):
        # 50% now, climbing 5 pct/h toward an 85% threshold -> 7 h.
        fc = forecast_disk_fill(hourly([40.0, 45.0, 50.0]), threshold_pct=85.0, subject="s797")
        assert fc.eta_hours == pytest.approx(7.0, rel=1e-12)
        assert fc.model == "disk_fill"

    def test_flat_series_has_no_eta(self):
        fc = forecast_disk_fill(hourly([50.0, 50.0, 50.0]), threshold_pct=85.0)
        assert fc.eta_hours is None

    def test_already_past_threshold(self):
        fc = forecast_disk_fill(hourly([80.0, 86.0, 92.0]), threshold_pct=85.0)
        assert fc.eta_hours == 0.0

    def test_heap_eta(self):
        fc = forecast_heap(hourly([70.0, 75.0, 80.0]), crit_pct=90.0, subject="es-data-0")
        assert fc.eta_hours == pytest.approx(2.0)

    def test_shard_growth(self):
        fc = forecast_shard_growth(hourly([1.0, 2.0, 3.0]), rebalance_threshold=10.0)
        assert fc.eta_hours == pytest.approx(7.0)

    def test_nvme_wear_in_months(self):
        # 1 pct/week at 40% wear: (95-40) * 168 h / 730 h-per-month.
        weekly = Series.of([(i * 7 * 24 * 3600.0, 38.0 + i) for i in range(3)])
        fc = forecast_nvme_wear(weekly, threshold_pct=95.0)
        assert fc.eta_hours == pytest.approx(55 * 168 / 730, rel=1e-9)


class TestNicRisk:
    def test_slope_normalization(self):
        # 25 errs/s growth per hour against a 50 full-risk slope -> 0.5.
        series = Series.of([(0, 0.0), (3600, 25.0)])
        assert nic_risk(series, bond_degraded=False).risk == pytest.approx(0.5)

    def test_bond_floor(self):
        flat = hourly([3.0, 3.0, 3.0])
        assert nic_risk(flat, bond_degraded=True).risk == pytest.approx(0.5)
        assert nic_risk(flat, bond_degraded=False).risk == 0.0

    def test_saturates_at_one(self):
        steep = Series.of([(0, 0.0), (3600, 500.0)])
        assert nic_risk(steep, bond_degraded=True).risk == 1.0

    def test_negative_slope_is_zero_risk(self):
        assert nic_risk(hourly([9.0, 6.0, 3.0]), bond_degraded=False).risk == 0.0


class TestLogEscalation:
    def test_all_info_window_is_zero(self):
        window = [(float(i), "INFO") for i in range(20)]
        fc = log_escalation(window)
        assert fc.risk == 0.0

    def test_rising_error_ratio(self):
        window = [(float(i), "INFO") for i in range(30)]
        window += [(30.0 + i, "ERROR") for i in range(30)]
        assert log_escalation(sorted(window)).risk > 0.5

    def test_falling_error_ratio(self):
        window = [(float(i), "ERROR") for i in range(30)]
        window += [(30.0 + i, "INFO") for i in range(30)]
        assert log_escalation(sorted(window)).risk < 0.5

    def test_empty_window_raises(self):
        with pytest.raises(InsufficientDataError):
            log_escalation([])


class TestBoundsProperties:
    @given(st.lists(st.floats(min_value=0, max_value=1e6,
                              allow_nan=False, allow_infinity=False),
                    min_size=2, max_size=40),
           st.booleans())
    @settings(max_examples=300, deadline=None)
    def test_nic_risk_bounded(self, values, degraded):
        series = Series.of([(float(i), v) for i, v in enumerate(values)])
        risk = nic_risk(series, bond_degraded=degraded).risk
        assert 0.0 <= risk <= 1.0

    @given(st.lists(st.sampled_from(["INFO", "WARN", "ERROR"]), min_size=1, max_size=60))
    @settings(max_examples=300, deadline=None)
    def test_log_escalation_bounded(self, levels):
        window = [(float(i), level) for i, level in enumerate(levels)]
        risk = log_escalation(window).risk
        assert 0.0 <= risk <= 1.0


class TestPatternPredict:
    def _record(self, codes, actions, closed=100):
        return IncidentRecord(
            incident_id="",
            opened_at_s=0,
            closed_at_s=closed,
            signature=IncidentSignature(
                categorical=frozenset((c, 0, "host") for c in codes)),
            causal_chain=["x"],
            actions=actions,
            outcome="resolved",
        )

    def test_stages_only_tag_relevant_actions(self, tmp_path):
        memory = IncidentMemory(tmp_path / "mem.jsonl")
        memory.append(self._record(
            ["disk_high"],
            [{"tool": "exec_on_node", "args": {}, "tags": ["disk_pressure"]},
             {"tool": "es_api_write", "args": {}, "tags": ["shard_recovery"]}],
        ))
        current = IncidentSignature(categorical=frozenset({("disk_high", 0, "host")}))
        matches = pattern_predict(current, memory)
        assert len(matches) == 1
        staged = matches[0].staged_actions
        assert len(staged) == 1
        assert staged[0]["tags"] == ["disk_pressure"]

    def test_below_floor_matches_nothing(self, tmp_path):
        memory = IncidentMemory(tmp_path / "mem.jsonl")
        memory.append(self._record(["nic_degradation"], []))
        current = IncidentSignature(categorical=frozenset({("disk_high", 0, "host")}))
        assert pattern_predict(current, memory) == []
