"""Deduced relations: capability->product co-occurrence and the product
bipartite projection, both filtered by integer weight thresholds.

Weights count companies: weight(capability, product) is the number of
companies that hold the capability and make the product; weight{p, q} is
the number of companies making both products. Thresholds are hyperparameters
(swept from the CLI, defaults 2).
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass

from .errors import InputError
from .graph import KnowledgeGraph, Triplet
from .ontology import Relation

DERIVABLE_RELATIONS = (Relation.CAPABILITY_PRODUCES, Relation.COMPLIMENTARY_PRODUCT_TO)


@dataclass(frozen=True)
class WeightedPair:
    left: int
    right: int
    weight: int


@dataclass(frozen=True)
class DeriveConfig:
    capability_cooccurrence_threshold: int = 2
    projection_weight_threshold: int = 2

    def __post_init__(self) -> None:
        if self.capability_cooccurrence_threshold < 1:
            raise InputError("capability_cooccurrence_threshold must be >= 1")
        if self.projection_weight_threshold < 1:
            raise InputError("projection_weight_threshold must be >= 1")


def cooccurrence_weights(graph: KnowledgeGraph) -> list[WeightedPair]:
    """(capability, product) pairs weighted by the number of companies
    exhibiting both; zero-weight pairs are omitted. Sorted by ids."""
    counts: Counter[tuple[int, int]] = Counter()
    for company, caps in graph.adjacency(Relation.HAS_CAPABILITY).items():
        prods = graph.adjacency(Relation.MAKES_PRODUCT).get(company)
        if not prods:
            continue
        for cap in caps:
            for prod in prods:
                counts[(cap, prod)] += 1
    return [WeightedPair(cap, prod, w) for (cap, prod), w in sorted(counts.items())]


def bipartite_projection(graph: KnowledgeGraph) -> list[WeightedPair]:
    """Project the company-product bipartite graph onto products.

    Each unordered product pair {p, q}, p != q, is weighted by the number of
    companies making both; pairs are canonical (min id, max id) and sorted.
    """
    counts: Counter[tuple[int, int]] = Counter()
    for prods in graph.adjacency(Relation.MAKES_PRODUCT).values():
        ordered = sorted(prods)
        for i, p in enumerate(ordered):
            for q in ordered[i + 1:]:
                counts[(p, q)] += 1
    return [WeightedPair(p, q, w) for (p, q), w in sorted(counts.items())]


def threshold_edges(pairs: list[WeightedPair], threshold: int, relation: Relation) -> list[Triplet]:
    """Materialize triplets for pairs with weight >= threshold (inclusive)."""
    if relation not in DERIVABLE_RELATIONS:
        raise InputError(f"relation {relation.value} is not a derived relation")
    if threshold < 1:
        raise InputError("threshold must be >= 1")
    return [Triplet(p.left, relation, p.right) for p in pairs if p.weight >= threshold]


def weight_histogram(pairs: list[WeightedPair], bin_width: int = 1) -> list[tuple[int, int, int]]:
    """Histogram rows (bin_lo, bin_hi, count) over pair weights.

    Bins are [lo, lo + width - 1] starting at weight 1 and run contiguously
    up to the maximum weight; total count equals the number of pairs.
    """
    if bin_width < 1:
        raise InputError("bin width must be >= 1")
    if not pairs:
        return []
    max_w = max(p.weight for p in pairs)
    n_bins = (max_w - 1) // bin_width + 1
    counts = [0] * n_bins
    for p in pairs:
        counts[(p.weight - 1) // bin_width] += 1
    return [(1 + i * bin_width, (i + 1) * bin_width, c) for i, c in enumerate(counts)]


def write_histogram_csv(rows: list[tuple[int, int, int]], path, fingerprint: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if fingerprint:
            fh.write(f"# config_fingerprint={fingerprint}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bin_lo", "bin_hi", "count"])
        writer.writerows(rows)


def derive_relations(graph: KnowledgeGraph, config: DeriveConfig) -> dict[Relation, int]:
    """Add both derived relation types to the graph in place.

    Returns the number of edges added per derived relation.
    """
    added = {}
    co = cooccurrence_weights(graph)
    n = 0
    for t in threshold_edges(co, config.capability_cooccurrence_threshold,
                             Relation.CAPABILITY_PRODUCES):
        n += graph.add_triplet(t)
    added[Relation.CAPABILITY_PRODUCES] = n
    proj = bipartite_projection(graph)
    n = 0
    for t in threshold_edges(proj, config.projection_weight_threshold,
                             Relation.COMPLIMENTARY_PRODUCT_TO):
        n += graph.add_triplet(t)
    added[Relation.COMPLIMENTARY_PRODUCT_TO] = n
    return added
