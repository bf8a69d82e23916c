"""Autonomous operations engine for a simulated Elasticsearch-on-Kubernetes cluster.

Layers: rule-based monitors, trend forecasting, a budgeted safety-guarded
tool loop, incident memory, and a lifecycle orchestrator with a CLI on top.
"""

__version__ = "0.1.0"
