"""Scenario files: seed, cluster spec, fault schedule and duration."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ..errors import ConfigurationError
from .state import ClusterSpec, FaultSpec

BUILTIN_PREFIX = "builtin:"


@dataclass
class Scenario:
    name: str
    seed: int
    duration_s: int
    cluster_spec: ClusterSpec
    faults: list[FaultSpec] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "duration_s": self.duration_s,
            "cluster_spec": self.cluster_spec.to_dict(),
            "faults": [f.to_dict() for f in self.faults],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        return cls(
            name=d.get("name", "unnamed"),
            seed=d["seed"],
            duration_s=d["duration_s"],
            cluster_spec=ClusterSpec.from_dict(d.get("cluster_spec", {})),
            faults=[FaultSpec.from_dict(f) for f in d.get("faults", [])],
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def list_builtin() -> list[str]:
    files = resources.files("guardian.scenarios")
    return sorted(p.name[: -len(".json")] for p in files.iterdir() if p.name.endswith(".json"))


def load_scenario(ref: str | Path) -> Scenario:
    """Load a scenario from a file path or a ``builtin:<name>`` reference."""
    if isinstance(ref, str) and ref.startswith(BUILTIN_PREFIX):
        name = ref[len(BUILTIN_PREFIX):]
        resource = resources.files("guardian.scenarios") / f"{name}.json"
        if not resource.is_file():
            raise ConfigurationError(f"unknown builtin scenario {name!r}; have {list_builtin()}")
        return Scenario.from_dict(json.loads(resource.read_text()))
    path = Path(ref)
    if not path.exists():
        raise ConfigurationError(f"scenario file not found: {path}")
    return Scenario.from_dict(json.loads(path.read_text()))
