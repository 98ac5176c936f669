"""Classical neighborhood-similarity baselines over the undirected buys_from view."""

from __future__ import annotations

import math

import numpy as np

from .errors import InputError
from .graph import KnowledgeGraph
from .ontology import Relation

HEURISTICS = ("common_neighbors", "jaccard", "adamic_adar",
              "preferential_attachment", "resource_allocation")


def undirected_adjacency(graph: KnowledgeGraph,
                         relation: Relation = Relation.BUYS_FROM) -> dict[int, set[int]]:
    """Symmetrized neighbor sets for one relation."""
    adj: dict[int, set[int]] = {}
    for src, dsts in graph.adjacency(relation).items():
        for dst in dsts:
            adj.setdefault(src, set()).add(dst)
            adj.setdefault(dst, set()).add(src)
    return adj


def scores_from_adjacency(adj: dict[int, set[int]], pairs,
                          heuristic: str) -> np.ndarray:
    if heuristic not in HEURISTICS:
        raise InputError(f"unknown heuristic {heuristic!r}")
    empty: set[int] = set()
    out = np.zeros(len(pairs))
    for i, (u, v) in enumerate(pairs):
        gu = adj.get(u, empty)
        gv = adj.get(v, empty)
        if heuristic == "preferential_attachment":
            out[i] = len(gu) * len(gv)
            continue
        common = gu & gv
        if heuristic == "common_neighbors":
            out[i] = len(common)
        elif heuristic == "jaccard":
            union = len(gu | gv)
            out[i] = len(common) / union if union else 0.0
        elif heuristic == "adamic_adar":
            # degree-1 common neighbors are skipped: log(1) = 0 would divide by zero
            out[i] = sum(1.0 / math.log(len(adj[w])) for w in common if len(adj[w]) > 1)
        else:  # resource_allocation
            out[i] = sum(1.0 / len(adj[w]) for w in common)
    return out


def heuristic_scores(graph: KnowledgeGraph, pairs, heuristic: str) -> np.ndarray:
    """Score (source, dest) id pairs with one of the five baselines,
    computed on the undirected buys_from subgraph."""
    return scores_from_adjacency(undirected_adjacency(graph), pairs, heuristic)
