"""Python front end for the pdcfa analyzer."""

import json

from ._pdcfa import ParseError, anf, benchmark_source, corpus_names, dot, soundness
from . import _pdcfa

__all__ = ["ParseError", "analyze", "anf", "benchmark_source", "corpus_names", "dot", "grid", "soundness"]


def analyze(source, name="", k=0, policy="", pushdown=True, gc=True, node_cap=50000, graph=False):
    """Analyze Scheme source and return the report as a dict."""
    return json.loads(_pdcfa.analyze_json(source, name, k, policy, pushdown, gc, node_cap, graph))


def grid(source, name="", node_cap=50000):
    """All eight configurations for k in {0, 1}, keyed like "k0-pdcfa-gc"."""
    return json.loads(_pdcfa.grid_json(source, name, node_cap))
