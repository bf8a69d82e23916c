"""Append-only incident memory with signature-based similarity lookup.

Records are one canonical-JSON line each; record ids are content hashes so
re-appending the same incident is idempotent at the id level. Similarity
between signatures is a weighted blend of categorical-feature overlap
(Jaccard, weight 0.7) and numeric-slope proximity (weight 0.3).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import PersistenceError

CATEGORICAL_WEIGHT = 0.7
NUMERIC_WEIGHT = 0.3
DEFAULT_MIN_SIMILARITY = 0.6

# Scale per numeric feature: a slope difference of one scale (or more) counts
# as fully dissimilar for that feature.
NUMERIC_SCALES = {
    "disk_pct_per_h": 100.0,
    "heap_pct_per_h": 10.0,
    "retransmit_per_h": 50.0,
}
DEFAULT_NUMERIC_SCALE = 1.0

# Maps alert/forecast codes to the remediation-action tag they justify
# replaying. Codes without a tag never stage recorded actions.
ACTION_TAGS = {
    "disk_high": "disk_pressure",
    "disk_fill_predicted": "disk_pressure",
    "pods_pending": "disk_pressure",
    "cluster_red": "shard_recovery",
    "nic_degradation": "nic",
    "nic_risk_high": "nic",
    "heap_pressure": "heap",
    "heap_trend_predicted": "heap",
}


@dataclass(frozen=True)
class IncidentSignature:
    """Categorical (code, layer, subject_class) features plus numeric slopes."""

    categorical: frozenset[tuple[str, int, str]]
    numeric: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "categorical": sorted([list(f) for f in self.categorical]),
            "numeric": {k: round(v, 6) for k, v in sorted(self.numeric.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IncidentSignature":
        return cls(
            categorical=frozenset((c, int(layer), s) for c, layer, s in d.get("categorical", [])),
            numeric={k: float(v) for k, v in d.get("numeric", {}).items()},
        )


def similarity(a: IncidentSignature, b: IncidentSignature) -> float:
    """Weighted signature similarity in [0, 1]."""
    union = a.categorical | b.categorical
    jaccard = len(a.categorical & b.categorical) / len(union) if union else 1.0
    keys = set(a.numeric) | set(b.numeric)
    if not keys:
        proximity = 1.0
    else:
        total = 0.0
        for key in keys:
            scale = NUMERIC_SCALES.get(key, DEFAULT_NUMERIC_SCALE)
            va = a.numeric.get(key, 0.0)
            vb = b.numeric.get(key, 0.0)
            total += min(1.0, abs(va - vb) / scale)
        proximity = 1.0 - total / len(keys)
    return CATEGORICAL_WEIGHT * jaccard + NUMERIC_WEIGHT * proximity


@dataclass
class IncidentRecord:
    incident_id: str
    opened_at_s: int
    closed_at_s: int
    signature: IncidentSignature
    causal_chain: list[str]
    actions: list[dict]  # each: {"tool", "args", "tags", "verdict", ...}
    outcome: str
    health_transitions: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "incident_id": self.incident_id,
            "opened_at_s": self.opened_at_s,
            "closed_at_s": self.closed_at_s,
            "signature": self.signature.to_dict(),
            "causal_chain": list(self.causal_chain),
            "actions": list(self.actions),
            "outcome": self.outcome,
            "health_transitions": list(self.health_transitions),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IncidentRecord":
        return cls(
            incident_id=d["incident_id"],
            opened_at_s=d["opened_at_s"],
            closed_at_s=d["closed_at_s"],
            signature=IncidentSignature.from_dict(d["signature"]),
            causal_chain=list(d.get("causal_chain", [])),
            actions=list(d.get("actions", [])),
            outcome=d["outcome"],
            health_transitions=list(d.get("health_transitions", [])),
        )


def _canonical(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def content_id(record_body: dict) -> str:
    """Stable 16-hex-char id over the record body (without the id field)."""
    body = {k: v for k, v in record_body.items() if k != "incident_id"}
    return hashlib.sha256(_canonical(body).encode()).hexdigest()[:16]


class IncidentMemory:
    """JSONL-backed incident store. Loads eagerly; appends write through."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.records: list[IncidentRecord] = []
        if self.path.exists():
            for line in self.path.read_text().splitlines():
                if line.strip():
                    self.records.append(IncidentRecord.from_dict(json.loads(line)))

    def append(self, record: IncidentRecord) -> IncidentRecord:
        """Assign a content id and persist one line; returns the stored record."""
        body = record.to_dict()
        record.incident_id = content_id(body)
        body["incident_id"] = record.incident_id
        self.records.append(record)
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a") as fh:
                fh.write(_canonical(body) + "\n")
        except OSError as exc:
            raise PersistenceError(f"cannot append to {self.path}: {exc}") from exc
        return record

    def similar(
        self,
        signature: IncidentSignature,
        k: int = 3,
        min_similarity: float | None = None,
    ) -> list[tuple[IncidentRecord, float]]:
        """Top-k records above the similarity floor, most similar first;
        ties broken by recency (later records win)."""
        floor = DEFAULT_MIN_SIMILARITY if min_similarity is None else min_similarity
        scored = [
            (record, similarity(signature, record.signature))
            for record in self.records
        ]
        eligible = [(r, s) for r, s in scored if s >= floor]
        eligible.sort(key=lambda pair: (-pair[1], -pair[0].closed_at_s))
        return eligible[:k]


def relevant_action_tags(signature: IncidentSignature) -> set[str]:
    """Action tags justified by the codes present in a signature."""
    return {ACTION_TAGS[code] for code, _, _ in signature.categorical if code in ACTION_TAGS}


def build_signature(alerts, forecasts, slopes: dict[str, float] | None = None) -> IncidentSignature:
    """Fold current alerts and active forecasts into a matchable signature.

    Forecast-derived features use layer 2 and synthetic codes so a precursor
    (e.g. a disk-fill ETA) matches a later incident whose alerts only fire
    once the damage is done.
    """
    features: set[tuple[str, int, str]] = set()
    for alert in alerts:
        subject_class = "cluster" if alert.subject == "cluster" else (
            "host" if alert.subject.startswith("s") and alert.subject[1:].isdigit() else
            "pod" if alert.subject.startswith("es-") else "other"
        )
        features.add((alert.code, alert.layer, subject_class))
    for fc in forecasts:
        if fc.model == "disk_fill" and fc.eta_hours is not None and fc.eta_hours < 24.0:
            features.add(("disk_fill_predicted", 2, "host"))
        elif fc.model == "heap_trend" and fc.eta_hours is not None and fc.eta_hours < 24.0:
            features.add(("heap_trend_predicted", 2, "pod"))
        elif fc.model == "nic_risk" and fc.risk is not None and fc.risk >= 0.5:
            features.add(("nic_risk_high", 2, "host"))
    return IncidentSignature(categorical=frozenset(features), numeric=dict(slopes or {}))
