"""Relevance propagation, topographic summaries, and feature export."""

from .export import (FEATURE_KINDS, export_embeddings, read_embeddings,
                     write_psd_csv, write_topomap_csv)
from .lrp import RelevanceMap, lrp_epsilon, relevance_steps
from .topo import TopoVector, minmax_normalize, topographic_relevance

__all__ = [
    "FEATURE_KINDS",
    "RelevanceMap",
    "TopoVector",
    "export_embeddings",
    "lrp_epsilon",
    "minmax_normalize",
    "read_embeddings",
    "relevance_steps",
    "topographic_relevance",
    "write_psd_csv",
    "write_topomap_csv",
]
