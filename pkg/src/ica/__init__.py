"""Incident causation analysis toolkit.

Extracts structured root-cause knowledge from incident investigation
records, aggregates it into a causal knowledge graph, and serves incident
search plus retrieval-based root-cause/resolution prediction.
"""

__version__ = "0.1.0"
