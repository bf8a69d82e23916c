"""Deny-list safety guard in front of every tool call.

Commands are normalized (lowercased, whitespace collapsed, quotes stripped)
before matching so trivially disguised variants of a denied command are
still denied. Shell substitution syntax is rejected outright because the
guard cannot see through it. Denied calls are never executed but still
count against the loop budget (request side only).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

TOOLS = ("es_api", "es_api_write", "exec_on_pod", "exec_on_node", "kubectl", "report")

# Top-level directories never eligible for rm, even recursively qualified.
PROTECTED_ROOTS = {
    "bin", "boot", "dev", "etc", "home", "lib", "lib64", "opt", "proc",
    "root", "run", "sbin", "srv", "sys", "usr", "var",
}

_SUBSTITUTION_RE = re.compile(r"\$\(|`")
_WS_RE = re.compile(r"\s+")


@dataclass(frozen=True)
class Verdict:
    allowed: bool
    reason: str

    def __bool__(self) -> bool:
        return self.allowed


ALLOW = Verdict(True, "allowed")


def normalize(command: str) -> str:
    """Lowercase, collapse whitespace, strip quote characters."""
    out = _WS_RE.sub(" ", command.strip().lower())
    return out.replace('"', "").replace("'", "")


def _deny(reason: str) -> Verdict:
    return Verdict(False, reason)


def _check_rm(norm: str) -> Verdict:
    targets = [w for w in norm.split()[1:] if not w.startswith("-")]
    if not targets:
        return _deny("rm with no explicit target")
    for raw in targets:
        target = raw.rstrip("/") or "/"
        if not target.startswith("/"):
            return _deny(f"rm requires an absolute path, got {raw!r}")
        parts = [p for p in target.split("/") if p]
        if len(parts) < 2:
            return _deny(f"rm of {raw!r} is too broad (need at least two path components)")
        if parts[0] in PROTECTED_ROOTS:
            return _deny(f"rm under /{parts[0]} is denied")
    return ALLOW


def _check_shell(norm: str) -> Verdict:
    word = norm.split()[0] if norm.split() else ""
    if word == "rm":
        return _check_rm(norm)
    if word.startswith("mkfs"):
        return _deny("mkfs is denied everywhere")
    if word == "dd" and "of=/dev/" in norm:
        return _deny("dd onto a block device is denied")
    if word in ("shutdown", "reboot", "halt", "poweroff"):
        return _deny(f"{word} is denied")
    return ALLOW


def _check_kubectl(norm: str) -> Verdict:
    words = norm.split()
    if words[:1] == ["kubectl"]:
        words = words[1:]
    if words[:1] == ["delete"]:
        resource = words[1] if len(words) > 1 else ""
        if resource in ("node", "nodes", "namespace", "namespaces", "ns", "pvc",
                        "persistentvolumeclaim", "persistentvolumeclaims", "pv"):
            return _deny(f"kubectl delete {resource} is denied")
        if resource not in ("pod", "pods"):
            return _deny(f"kubectl delete {resource or '?'} is not on the allow list")
    if "scale" in words and any(w.startswith("--replicas=0") for w in words):
        return _deny("scaling a workload to zero replicas is denied")
    return ALLOW


def _check_es_path(method: str, path: str, body: dict | None) -> Verdict:
    method = method.upper()
    clean = path.split("?", 1)[0].rstrip("/")
    if method == "DELETE":
        raw = clean.lstrip("/")
        if not raw:
            return _deny("DELETE with no index name is denied")
        for name in raw.split(","):
            if not name or "*" in name or name == "_all" or name.startswith("_"):
                return _deny(f"DELETE requires specific index names, got {name!r}")
    if body:
        flat = normalize(str(body))
        if "number_of_replicas: 0" in flat or "number_of_replicas:0" in flat:
            return _deny("setting number_of_replicas to 0 is denied")
    return ALLOW


def validate_command(tool: str, args: dict) -> Verdict:
    """Single entry point: returns an allow/deny verdict with a reason.

    ``args`` carries tool-specific keys: ``command`` for exec tools,
    ``args`` for kubectl, ``method``/``path``/``body`` for the ES tools.
    """
    if tool not in TOOLS:
        return _deny(f"unknown tool {tool!r}")
    if tool == "report":
        return ALLOW

    text_fields = [str(v) for v in args.values()]
    if any(_SUBSTITUTION_RE.search(t) for t in text_fields):
        return _deny("shell substitution syntax ($( or backtick) is denied")

    if tool in ("exec_on_node", "exec_on_pod"):
        return _check_shell(normalize(args.get("command", "")))
    if tool == "kubectl":
        return _check_kubectl(normalize(args.get("args", "")))
    if tool == "es_api":
        method = str(args.get("method", "GET")).upper()
        if method != "GET":
            return _deny("es_api is read-only; use es_api_write for mutations")
        return ALLOW
    if tool == "es_api_write":
        return _check_es_path(str(args.get("method", "GET")), str(args.get("path", "")), args.get("body"))
    return ALLOW
