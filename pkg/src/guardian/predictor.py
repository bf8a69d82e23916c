"""Layer 2: trend-based forecasting models and pattern-based prediction.

Each model is pure: it reads a telemetry series and emits a Forecast.
ETA models populate ``eta_hours`` (absent when the trend is flat or
negative); score models populate ``risk`` in [0, 1]. Nothing here mutates
cluster state or issues remediations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateSeriesError, InsufficientDataError
from .memory import IncidentMemory, IncidentRecord, IncidentSignature, relevant_action_tags

ROLLING_WINDOW_SAMPLES = 60  # ~30 min of 30 s telemetry
HOURS_PER_MONTH = 730.0  # continuous-duty conversion for wear ETAs
DEFAULT_FULL_RISK_SLOPE_PER_H = 50.0  # retransmit-rate growth mapping to risk 1.0
LOG_ESCALATION_STEEPNESS = 10.0  # logistic k per unit ratio-slope/hour
BOND_DEGRADED_RISK_FLOOR = 0.5

ETA_MODELS = ("disk_fill", "heap_trend", "shard_growth", "nvme_wear")
RISK_MODELS = ("nic_risk", "log_escalation")


def clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


@dataclass(frozen=True)
class Series:
    """Ordered (t_s, value) telemetry samples."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        ts = [t for t, _ in self.points]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("series timestamps must be strictly increasing")

    @classmethod
    def of(cls, points) -> "Series":
        return cls(points=tuple((float(t), float(v)) for t, v in points))

    def last_value(self) -> float:
        return self.points[-1][1]

    def windowed(self, n: int = ROLLING_WINDOW_SAMPLES) -> "Series":
        return Series(points=self.points[-n:])


@dataclass(frozen=True)
class TrendFit:
    slope_per_h: float
    intercept: float
    r2: float


@dataclass(frozen=True)
class Forecast:
    model: str
    subject: str
    at_s: int
    eta_hours: float | None = None
    risk: float | None = None
    confidence: float = 0.0

    def __post_init__(self) -> None:
        if self.model in ETA_MODELS:
            assert self.risk is None, f"{self.model} is an ETA model"
        elif self.model in RISK_MODELS:
            assert self.risk is not None and self.eta_hours is None
            assert 0.0 <= self.risk <= 1.0
        else:
            raise ValueError(f"unknown forecast model {self.model!r}")

    def to_dict(self) -> dict:
        d = {
            "model": self.model,
            "subject": self.subject,
            "at_s": self.at_s,
            "confidence": round(self.confidence, 6),
        }
        if self.eta_hours is not None:
            d["eta_hours"] = round(self.eta_hours, 6)
        if self.risk is not None:
            d["risk"] = round(self.risk, 6)
        return d


def fit_trend(series: Series) -> TrendFit:
    """Ordinary least squares over (t, value); slope reported per hour."""
    points = series.points
    if len(points) < 2:
        raise InsufficientDataError(f"need >= 2 points, got {len(points)}")
    ts = [t for t, _ in points]
    vs = [v for _, v in points]
    n = len(points)
    t_mean = sum(ts) / n
    v_mean = sum(vs) / n
    sxx = sum((t - t_mean) ** 2 for t in ts)
    if sxx == 0:
        raise DegenerateSeriesError("all timestamps identical")
    sxy = sum((t - t_mean) * (v - v_mean) for t, v in points)
    slope_per_s = sxy / sxx
    intercept = v_mean - slope_per_s * t_mean
    ss_tot = sum((v - v_mean) ** 2 for v in vs)
    if ss_tot == 0:
        r2 = 1.0
    else:
        ss_res = sum((v - (intercept + slope_per_s * t)) ** 2 for t, v in points)
        r2 = clamp01(1.0 - ss_res / ss_tot)
    return TrendFit(slope_per_h=slope_per_s * 3600.0, intercept=intercept, r2=r2)


def _eta_forecast(model: str, series: Series, threshold: float, subject: str,
                  at_s: int | None = None) -> Forecast:
    fit = fit_trend(series)
    current = series.last_value()
    at = at_s if at_s is not None else int(series.points[-1][0])
    eta = None
    if fit.slope_per_h > 0 and current < threshold:
        eta = (threshold - current) / fit.slope_per_h
    elif fit.slope_per_h > 0:
        eta = 0.0
    return Forecast(model=model, subject=subject, at_s=at, eta_hours=eta, confidence=fit.r2)


def forecast_disk_fill(series: Series, threshold_pct: float, subject: str = "host") -> Forecast:
    """Hours until the data mount reaches the eviction threshold."""
    return _eta_forecast("disk_fill", series, threshold_pct, subject)


def forecast_heap(series: Series, crit_pct: float = 90.0, subject: str = "pod") -> Forecast:
    """Hours until heap reaches the critical threshold."""
    return _eta_forecast("heap_trend", series, crit_pct, subject)


def forecast_shard_growth(series: Series, rebalance_threshold: float, subject: str = "index") -> Forecast:
    """Hours until per-index store size forces a rebalance."""
    return _eta_forecast("shard_growth", series, rebalance_threshold, subject)


def forecast_nvme_wear(series: Series, threshold_pct: float = 95.0, subject: str = "host") -> Forecast:
    """Months to replacement assuming continuous duty (730 h/month)."""
    fc = _eta_forecast("nvme_wear", series, threshold_pct, subject)
    if fc.eta_hours is None:
        return fc
    return Forecast(model=fc.model, subject=fc.subject, at_s=fc.at_s,
                    eta_hours=fc.eta_hours / HOURS_PER_MONTH, confidence=fc.confidence)


def nic_risk(series: Series, bond_degraded: bool, subject: str = "host",
             full_risk_slope_per_h: float = DEFAULT_FULL_RISK_SLOPE_PER_H) -> Forecast:
    """Failure risk score from retransmit-rate growth plus bond status."""
    fit = fit_trend(series)
    slope_norm = max(0.0, fit.slope_per_h) / full_risk_slope_per_h
    risk = clamp01(slope_norm)
    if bond_degraded:
        risk = clamp01(risk + BOND_DEGRADED_RISK_FLOOR)
    return Forecast(model="nic_risk", subject=subject, at_s=int(series.points[-1][0]),
                    risk=risk, confidence=fit.r2)


def log_escalation(window: list[tuple[float, str]], subject: str = "cluster",
                   steepness: float = LOG_ESCALATION_STEEPNESS) -> Forecast:
    """Anomaly probability from the error/warn ratio trend of a log window.

    A window with no ERROR/WARN lines at all carries no anomaly signal and
    maps to probability 0.
    """
    if not window:
        raise InsufficientDataError("empty log window")
    at_s = int(max(t for t, _ in window))
    severe = [(t, level) for t, level in window if level in ("ERROR", "WARN", "WARNING")]
    if not severe:
        return Forecast(model="log_escalation", subject=subject, at_s=at_s, risk=0.0, confidence=1.0)
    t_lo = min(t for t, _ in window)
    t_hi = max(t for t, _ in window)
    span = max(t_hi - t_lo, 1.0)
    buckets = 6
    counts = [[0, 0] for _ in range(buckets)]  # [severe, total]
    for t, level in window:
        i = min(buckets - 1, int((t - t_lo) / span * buckets))
        counts[i][1] += 1
        if level in ("ERROR", "WARN", "WARNING"):
            counts[i][0] += 1
    ratio_points = [
        (t_lo + (i + 0.5) * span / buckets, c[0] / c[1]) for i, c in enumerate(counts) if c[1] > 0
    ]
    if len(ratio_points) < 2:
        probability, confidence = 0.5, 0.0
    else:
        fit = fit_trend(Series.of(ratio_points))
        exponent = -steepness * fit.slope_per_h
        if exponent > 700.0:  # exp() overflows near 709
            probability = 0.0
        elif exponent < -700.0:
            probability = 1.0
        else:
            probability = 1.0 / (1.0 + math.exp(exponent))
        confidence = fit.r2
    return Forecast(model="log_escalation", subject=subject, at_s=at_s,
                    risk=clamp01(probability), confidence=confidence)


@dataclass(frozen=True)
class PatternMatch:
    record: IncidentRecord
    similarity: float
    staged_actions: tuple[dict, ...]


def pattern_predict(
    current: IncidentSignature,
    memory: IncidentMemory,
    k: int = 3,
    min_similarity: float | None = None,
) -> list[PatternMatch]:
    """Match the current signature against incident memory and pre-stage the
    recorded remediation actions relevant to the matched precursor signals."""
    matches = memory.similar(current, k=k, min_similarity=min_similarity)
    tags = relevant_action_tags(current)
    out = []
    for record, similarity in matches:
        staged = tuple(a for a in record.actions if set(a.get("tags", [])) & tags)
        out.append(PatternMatch(record=record, similarity=similarity, staged_actions=staged))
    return out
