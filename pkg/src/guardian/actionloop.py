"""Budgeted tool loop: propose, validate, execute, account, terminate.

One tool call per iteration against a closed six-tool set. Every call —
including denied ones — is charged against the token budget using the
4-bytes-per-token convention: ceil((request_bytes + response_bytes) / 4).
Denied calls execute nothing and return empty output, so they cost only
their request side. The loop ends when the investigator files a report or
a budget is exhausted.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import GuardianError, ProtocolError
from .safety import TOOLS, Verdict, validate_command

MAX_ITERATIONS = 20
MAX_TOKENS = 150_000
BYTES_PER_TOKEN = 4
SIM_SECONDS_PER_CALL = 2


@dataclass(frozen=True)
class ToolCall:
    tool: str
    args: dict
    tags: tuple[str, ...] = ()

    def request_bytes(self) -> int:
        payload = json.dumps({"tool": self.tool, "args": self.args}, sort_keys=True)
        return len(payload.encode())

    def to_dict(self) -> dict:
        return {"tool": self.tool, "args": self.args, "tags": list(self.tags)}


@dataclass(frozen=True)
class ToolResult:
    call: ToolCall
    output: str
    tokens: int
    denied: bool = False
    reason: str = ""
    error: str = ""

    def to_dict(self) -> dict:
        return {
            "call": self.call.to_dict(),
            "output": self.output,
            "tokens": self.tokens,
            "denied": self.denied,
            "reason": self.reason,
            "error": self.error,
        }


@dataclass
class LoopBudget:
    max_iterations: int = MAX_ITERATIONS
    max_tokens: int = MAX_TOKENS
    iterations_used: int = 0
    tokens_used: int = 0

    def charge(self, tokens: int) -> None:
        self.iterations_used += 1
        self.tokens_used = min(self.max_tokens, self.tokens_used + tokens)

    @property
    def exhausted(self) -> bool:
        return self.iterations_used >= self.max_iterations or self.tokens_used >= self.max_tokens


def token_cost(request_bytes: int, response_bytes: int) -> int:
    return math.ceil((request_bytes + response_bytes) / BYTES_PER_TOKEN)


@dataclass
class IncidentReport:
    trigger_alerts: list[dict]
    causal_chain: list[str]
    actions: list[dict]  # audit trail: verdict recorded before any execution
    outcome: str  # resolved | no_anomaly | needs_escalation | budget_exhausted
    final_health: str
    totals: dict
    flags: list[str] = field(default_factory=list)
    summary: str = ""

    def to_dict(self) -> dict:
        return {
            "trigger_alerts": self.trigger_alerts,
            "causal_chain": self.causal_chain,
            "actions": self.actions,
            "outcome": self.outcome,
            "final_health": self.final_health,
            "totals": self.totals,
            "flags": self.flags,
            "summary": self.summary,
        }


class ToolKit:
    """Executes validated tool calls against a cluster; each executed call
    advances simulated time by a fixed two seconds."""

    def __init__(self, cluster, seconds_per_call: int = SIM_SECONDS_PER_CALL):
        self.cluster = cluster
        self.seconds_per_call = seconds_per_call
        self.events = []  # simulator events emitted while tools were running

    def execute(self, call: ToolCall) -> str:
        try:
            output = self._dispatch(call)
        except GuardianError as exc:
            output = f"error: {exc}"
        self.events.extend(self.cluster.tick(self.seconds_per_call))
        return output

    def drain_events(self):
        events, self.events = self.events, []
        return events

    def _dispatch(self, call: ToolCall) -> str:
        args = call.args
        if call.tool in ("es_api", "es_api_write"):
            result = self.cluster.exec_es_api(
                args.get("method", "GET"), args.get("path", "/"), args.get("body")
            )
            return json.dumps(result, sort_keys=True)
        if call.tool == "exec_on_node":
            return self.cluster.exec_host_command(args["host"], args["command"])
        if call.tool == "exec_on_pod":
            return self.cluster.exec_pod_command(args["pod"], args["command"])
        if call.tool == "kubectl":
            return self.cluster.exec_kubectl(args["args"])
        raise ProtocolError(f"tool {call.tool!r} has no executor")


def run_loop(
    investigator,
    toolkit: ToolKit,
    trigger_alerts: list,
    budget: LoopBudget | None = None,
) -> IncidentReport:
    """Drive the investigator until it reports or a budget runs out.

    The investigator exposes ``propose(history) -> ToolCall``; a ``report``
    tool call ends the loop and its args become the report body.
    """
    budget = budget or LoopBudget()
    start_s = toolkit.cluster.state.sim_time_s
    history: list[ToolResult] = []
    actions: list[dict] = []
    outcome = "budget_exhausted"
    causal_chain: list[str] = []
    flags: list[str] = []
    summary = ""
    executed_calls = 0

    while not budget.exhausted:
        call = investigator.propose(history)
        if not isinstance(call, ToolCall) or call.tool not in TOOLS:
            raise ProtocolError(f"investigator proposed invalid call: {call!r}")
        request = call.request_bytes()

        if call.tool == "report":
            budget.charge(token_cost(request, 0))
            outcome = call.args.get("outcome", "resolved")
            causal_chain = list(call.args.get("causal_chain", []))
            flags = list(call.args.get("flags", []))
            summary = call.args.get("summary", "")
            actions.append({"call": call.to_dict(), "verdict": "allowed", "executed": False})
            break

        verdict: Verdict = validate_command(call.tool, call.args)
        if not verdict:
            result = ToolResult(call=call, output="", tokens=token_cost(request, 0),
                                denied=True, reason=verdict.reason)
            actions.append({"call": call.to_dict(), "verdict": f"denied: {verdict.reason}",
                            "executed": False})
        else:
            actions.append({"call": call.to_dict(), "verdict": "allowed", "executed": True})
            output = toolkit.execute(call)
            executed_calls += 1
            result = ToolResult(call=call, output=output,
                                tokens=token_cost(request, len(output.encode())))
        budget.charge(result.tokens)
        history.append(result)

    return IncidentReport(
        trigger_alerts=[a.to_dict() for a in trigger_alerts],
        causal_chain=causal_chain,
        actions=actions,
        outcome=outcome,
        final_health=toolkit.cluster.health().value,
        totals={
            "iterations": budget.iterations_used,
            "tool_calls": executed_calls,
            "tokens": budget.tokens_used,
            "duration_s": toolkit.cluster.state.sim_time_s - start_s,
        },
        flags=flags,
        summary=summary,
    )
