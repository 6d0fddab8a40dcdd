"""Layered equity research engine.

Ingests company statements, computes the metric and valuation core
deterministically, asks an LLM provider the analyst questions, assembles a
fixed-schema research report, and scores the result with a judge harness.
"""

__version__ = "0.1.0"
