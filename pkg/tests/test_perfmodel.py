import math

import pytest

from guardian.errors import CalibrationRefusedError, FitError
from guardian.perfmodel import (
    QUERY_ANCHORS,
    QUERY_CALIBRATION_ITERATIONS,
    QUERY_PROBES,
    UNTUNED_LATENCY_MULTIPLIER,
    WRITE_BATCH_SIZES,
    WRITE_CALIBRATION_ITERATIONS,
    Baselines,
    ScalingCoefficients,
    SlaTarget,
    calibrate,
    evaluate_sla,
    fit_coefficients,
    fit_table_anchors,
    optimize_config,
    query_latency,
    sim_probe_coefficients,
    write_latency,
)

COEFFS = ScalingCoefficients(base_ms=5.0, vol_coeff=10.0, shard_coeff=2.0)


class TestWriteModel:
    def test_exact_value_at_reference_point(self):
        # 1.4 fixed + 1000 docs * 20 us + 1 replica * 8 ms
        assert write_latency(1000, 1, COEFFS) == pytest.approx(29.4, abs=1e-12)

    def test_component_breakdown(self):
        assert write_latency(0, 0, COEFFS) == pytest.approx(1.4)
        assert write_latency(100, 0, COEFFS) - write_latency(0, 0, COEFFS) == pytest.approx(2.0)
        assert write_latency(0, 3, COEFFS) - write_latency(0, 0, COEFFS) == pytest.approx(24.0)

    def test_rejects_negative_inputs(self):
        with pytest.raises(ValueError):
            write_latency(-1, 0, COEFFS)


class TestQueryModel:
    def test_affine_form(self):
        assert query_latency(2.0, 300, COEFFS) == pytest.approx(5.0 + 20.0 + 6.0)

    def test_monotone_in_volume_and_shards(self):
        base = query_latency(1.0, 100, COEFFS)
        assert query_latency(2.0, 100, COEFFS) > base
        assert query_latency(1.0, 200, COEFFS) > base

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            query_latency(-0.1, 100, COEFFS)

    def test_coefficients_must_be_nonnegative(self):
        with pytest.raises(ValueError):
            ScalingCoefficients(base_ms=-1.0, vol_coeff=1.0, shard_coeff=1.0)


class TestFitting:
    def test_recovers_synthetic_coefficients(self):
        truth = ScalingCoefficients(base_ms=12.0, vol_coeff=9.5, shard_coeff=2.1)
        points = [
            (g, s, query_latency(g, s, truth))
            for g, s in [(0.5, 100), (1.0, 400), (2.0, 800), (4.0, 200)]
        ]
        fitted = fit_coefficients(points).coefficients
        assert fitted.base_ms == pytest.approx(12.0, abs=1e-6)
        assert fitted.vol_coeff == pytest.approx(9.5, abs=1e-6)
        assert fitted.shard_coeff == pytest.approx(2.1, abs=1e-6)

    def test_requires_three_points(self):
        with pytest.raises(FitError):
            fit_coefficients(QUERY_ANCHORS[:2])

    def test_requires_two_volumes(self):
        with pytest.raises(FitError):
            fit_coefficients([(1.0, 100, 10), (1.0, 200, 12), (1.0, 300, 14)])

    def test_anchor_fit_matches_largest_point(self):
        coeffs = fit_table_anchors()
        g, s, observed = QUERY_ANCHORS[3]
        predicted = query_latency(g, s, coeffs)
        assert abs(predicted - observed) / observed < 0.10

    def test_sim_probe_coefficients_hit_production_band(self):
        latency = query_latency(3.72, 840, sim_probe_coefficients())
        assert 89.0 <= latency <= 111.0

    def test_untuned_multiplier(self):
        assert UNTUNED_LATENCY_MULTIPLIER == pytest.approx(297.0 / 196.0)


class TestSla:
    TARGET = SlaTarget(query_p50_ms=100.0, write_p50_ms=50.0, availability_pct=99.9,
                       expected_gb_per_shard=2.0, expected_shard_count=300)

    def test_feasible_with_margin(self):
        report = evaluate_sla(self.TARGET, COEFFS)
        assert report.feasible
        assert report.query_margin_ms > 0

    def test_boundary_is_feasible(self):
        predicted = query_latency(2.0, 300, COEFFS)
        target = SlaTarget(query_p50_ms=predicted, write_p50_ms=50.0, availability_pct=99.9,
                           expected_gb_per_shard=2.0, expected_shard_count=300)
        assert evaluate_sla(target, COEFFS).feasible

    def test_infeasible(self):
        target = SlaTarget(query_p50_ms=10.0, write_p50_ms=50.0, availability_pct=99.9,
                           expected_gb_per_shard=2.0, expected_shard_count=300)
        report = evaluate_sla(target, COEFFS)
        assert not report.feasible
        assert report.query_margin_ms < 0


class TestOptimizeConfig:
    def test_two_index_settings_no_cluster_settings(self):
        rec = optimize_config("mixed")
        assert rec.index_settings == {"refresh_interval": "30s", "translog.durability": "async"}
        assert rec.cluster_settings == {}
        assert rec.note

    def test_unknown_workload(self):
        with pytest.raises(ValueError):
            optimize_config("graph")


class _Health:
    def __init__(self, value):
        self.value = value


class _State:
    sim_time_s = 0


class _CountingCluster:
    """Minimal cluster stand-in that counts probe invocations."""

    def __init__(self, healthy=True):
        self._health = _Health("green" if healthy else "yellow")
        self.calls = []
        self.state = _State()

    def health(self):
        return self._health

    def run_probe(self, probe, docs=100, **kwargs):
        self.calls.append((probe, docs))
        return 50.0 if probe != "write_bulk" else 20.0 + docs / 100.0


class TestCalibration:
    def test_probe_counts_and_p95_rule(self):
        cluster = _CountingCluster()
        baselines = calibrate(cluster)
        queries = [c for c in cluster.calls if c[0] != "write_bulk"]
        writes = [c for c in cluster.calls if c[0] == "write_bulk"]
        assert len(queries) == QUERY_CALIBRATION_ITERATIONS * len(QUERY_PROBES)
        assert len(writes) == WRITE_CALIBRATION_ITERATIONS * len(WRITE_BATCH_SIZES)
        for baseline in baselines.probes.values():
            assert baseline.p95_ms == pytest.approx(2.0 * baseline.p50_ms)

    def test_refused_unless_green(self):
        with pytest.raises(CalibrationRefusedError):
            calibrate(_CountingCluster(healthy=False))

    def test_baselines_roundtrip(self, tmp_path):
        baselines = calibrate(_CountingCluster())
        path = tmp_path / "baselines.json"
        baselines.save(path)
        loaded = Baselines.load(path)
        assert loaded.to_dict() == baselines.to_dict()

    def test_real_cluster_calibration(self, default_cluster):
        baselines = calibrate(default_cluster)
        assert set(baselines.probes) == {
            "query_match_all", "query_term_status", "query_range_timestamp",
            "query_bool_compound", "write_bulk_100", "write_bulk_1000",
        }
        p50 = baselines.probes["query_term_status"].p50_ms
        assert 89.0 <= p50 <= 111.0
        assert math.isfinite(p50)
