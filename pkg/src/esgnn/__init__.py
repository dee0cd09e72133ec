"""Explainable-by-design subgraph-enhanced graph classification."""

__version__ = "0.1.0"
