"""Triplet splitting, negative sampling, and fan-out neighbor sampling.

All randomness flows through numpy Generators seeded from explicit integers,
so every split, corruption, and sampled block is reproducible from
(seed, input) alone.
"""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import InputError, SupplyKGError
from .graph import KnowledgeGraph, Triplet, triplet_sort_key
from .ontology import RELATIONS, Relation, domain_range, relation_from_tag

logger = logging.getLogger(__name__)

DIRECTIONS = ("forward", "reverse")
CORRUPTION_MODES = ("source-swap", "destination-swap", "relation-resample")
UNIFORM_MODE = "uniform-over-modes"
MAX_CORRUPT_ATTEMPTS = 100


class ExhaustedNegativesError(SupplyKGError):
    """No valid negative found within the attempt budget (near-complete relation)."""


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.7
    validation_fraction: float = 0.2
    test_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        fracs = (self.train_fraction, self.validation_fraction, self.test_fraction)
        if any(f <= 0 for f in fracs):
            raise InputError("split fractions must be positive")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise InputError(f"split fractions must sum to 1, got {sum(fracs)}")


@dataclass
class TripletSplit:
    train: list[Triplet]
    validation: list[Triplet]
    test: list[Triplet]

    def parts(self) -> dict[str, list[Triplet]]:
        return {"train": self.train, "val": self.validation, "test": self.test}

    @property
    def size(self) -> int:
        return len(self.train) + len(self.validation) + len(self.test)


@dataclass(frozen=True)
class NegativeSample:
    triplet: Triplet
    kind: str
    label: int = 0


def allocate_counts(n: int, fractions: Sequence[float]) -> list[int]:
    """Largest-remainder apportionment of n items; ties go to earlier parts."""
    floors = [int(n * f) for f in fractions]
    remainders = [n * f - fl for f, fl in zip(fractions, floors)]
    short = n - sum(floors)
    for idx in sorted(range(len(fractions)), key=lambda i: (-remainders[i], i))[:short]:
        floors[idx] += 1
    return floors


def split_triplets(triplets: Sequence[Triplet], spec: SplitSpec) -> TripletSplit:
    """Stratified 70/20/10 split, deterministic per (seed, relation).

    Relations with fewer than 3 triplets go wholly to train with a warning.
    """
    if not triplets:
        raise InputError("cannot split an empty triplet collection")
    by_rel: dict[Relation, list[Triplet]] = {r: [] for r in RELATIONS}
    for t in triplets:
        by_rel[t.relation].append(t)
    fracs = (spec.train_fraction, spec.validation_fraction, spec.test_fraction)
    split = TripletSplit([], [], [])
    for rel_index, rel in enumerate(RELATIONS):
        group = sorted(by_rel[rel], key=triplet_sort_key)
        if not group:
            continue
        if len(group) < 3:
            warnings.warn(f"relation {rel.value} has {len(group)} triplet(s); "
                          "placing all in train")
            split.train.extend(group)
            continue
        rng = np.random.default_rng(np.random.SeedSequence((spec.seed, rel_index)))
        order = rng.permutation(len(group))
        n_train, n_val, _ = allocate_counts(len(group), fracs)
        for pos, idx in enumerate(order):
            if pos < n_train:
                split.train.append(group[idx])
            elif pos < n_train + n_val:
                split.validation.append(group[idx])
            else:
                split.test.append(group[idx])
    return split


def _fact_exists(graph: KnowledgeGraph, t: Triplet) -> bool:
    """Membership against E; symmetric for the canonical product-pair relation."""
    if graph.has_edge(t.source, t.relation, t.dest):
        return True
    if t.relation is Relation.COMPLIMENTARY_PRODUCT_TO:
        return graph.has_edge(t.dest, t.relation, t.source)
    return False


def corrupt(triplet: Triplet, graph: KnowledgeGraph, rng: np.random.Generator,
            mode: str = UNIFORM_MODE, max_attempts: int = MAX_CORRUPT_ATTEMPTS) -> NegativeSample:
    """Manufacture one non-fact by corrupting the triplet.

    Endpoint swaps draw a uniform replacement of the same entity type as the
    replaced endpoint (never equal to either original endpoint);
    relation-resample draws uniformly from the other 6 relation types and may
    violate the ontology on purpose. The result is rejection-resampled until
    absent from E, up to ``max_attempts``.
    """
    if mode != UNIFORM_MODE and mode not in CORRUPTION_MODES:
        raise InputError(f"unknown corruption mode {mode!r}")
    src_type, dst_type = domain_range(triplet.relation)
    other_relations = [r for r in RELATIONS if r is not triplet.relation]
    for _ in range(max_attempts):
        kind = mode if mode != UNIFORM_MODE else CORRUPTION_MODES[rng.integers(3)]
        if kind == "relation-resample":
            rel = other_relations[rng.integers(len(other_relations))]
            candidate = Triplet(triplet.source, rel, triplet.dest)
        elif kind == "source-swap":
            pool = graph.entities_of_type(src_type)
            new_src = pool[rng.integers(len(pool))]
            if new_src == triplet.source or new_src == triplet.dest:
                continue
            candidate = Triplet(new_src, triplet.relation, triplet.dest)
        else:  # destination-swap
            pool = graph.entities_of_type(dst_type)
            new_dst = pool[rng.integers(len(pool))]
            if new_dst == triplet.dest or new_dst == triplet.source:
                continue
            candidate = Triplet(triplet.source, triplet.relation, new_dst)
        if not _fact_exists(graph, candidate):
            return NegativeSample(candidate, kind)
    raise ExhaustedNegativesError(
        f"no valid negative for {triplet} after {max_attempts} attempts")


@dataclass
class MiniBatchBlock:
    """A sampled computation block for minibatch encoding.

    frontiers[k] holds the nodes whose depth-k embedding is needed;
    frontiers[depth] are the seeds and frontiers[k] is a subset of
    frontiers[k-1]. samples[k-1] maps (relation, direction) -> node ->
    sampled neighbor ids used to aggregate into the depth-k embedding.
    """
    seeds: tuple[int, ...]
    depth: int
    frontiers: list[tuple[int, ...]]
    samples: list[dict[tuple[Relation, str], dict[int, tuple[int, ...]]]]
    positives: tuple[Triplet, ...] = ()
    negatives: tuple[NegativeSample, ...] = ()

    def scored_triplets(self) -> list[Triplet]:
        return list(self.positives) + [n.triplet for n in self.negatives]

    def labels(self) -> np.ndarray:
        return np.concatenate([np.ones(len(self.positives)),
                               np.zeros(len(self.negatives))])


def sample_block(graph: KnowledgeGraph, seed_nodes: Sequence[int], fanout: int,
                 depth: int, rng: np.random.Generator) -> MiniBatchBlock:
    """Depth-K fan-out neighbor sampling in both edge directions.

    Per node, relation, and direction, uniformly samples min(fanout, degree)
    distinct neighbors per layer. Frontiers grow inward: the sampled
    neighbors at layer k join the layer k-1 frontier.
    """
    if fanout < 1 or depth < 1:
        raise InputError("fanout and depth must be >= 1")
    if not graph.frozen:
        raise SupplyKGError("sample_block requires a frozen graph")
    seeds: list[int] = []
    seen = set()
    for node in seed_nodes:
        graph.entity(node)  # raises GraphError on unknown ids
        if node not in seen:
            seen.add(node)
            seeds.append(node)

    frontiers: list[tuple[int, ...]] = [()] * (depth + 1)
    samples: list[dict[tuple[Relation, str], dict[int, tuple[int, ...]]]] = [
        {} for _ in range(depth)
    ]
    frontiers[depth] = tuple(seeds)
    for k in range(depth, 0, -1):
        base = frontiers[k]
        next_frontier = list(base)
        known = set(base)
        layer: dict[tuple[Relation, str], dict[int, tuple[int, ...]]] = {}
        for rel in RELATIONS:
            for direction in DIRECTIONS:
                per_node: dict[int, tuple[int, ...]] = {}
                for u in base:
                    neigh = graph.neighbors(u, rel, direction)
                    if not neigh:
                        continue
                    if len(neigh) > fanout:
                        picked = rng.choice(len(neigh), size=fanout, replace=False)
                        chosen = tuple(neigh[i] for i in sorted(picked))
                    else:
                        chosen = tuple(neigh)
                    per_node[u] = chosen
                    for v in chosen:
                        if v not in known:
                            known.add(v)
                            next_frontier.append(v)
                if per_node:
                    layer[(rel, direction)] = per_node
        samples[k - 1] = layer
        frontiers[k - 1] = tuple(next_frontier)
    return MiniBatchBlock(tuple(seeds), depth, frontiers, samples)


def attach_triplets(block: MiniBatchBlock, positives: Sequence[Triplet],
                    negatives: Sequence[NegativeSample]) -> MiniBatchBlock:
    block.positives = tuple(positives)
    block.negatives = tuple(negatives)
    return block


def batch_iterator(split: TripletSplit, message_graph: KnowledgeGraph,
                   full_graph: KnowledgeGraph, batch_size: int,
                   negatives_per_positive: int, rng: np.random.Generator,
                   fanout: int = 10, depth: int = 2,
                   mode: str = UNIFORM_MODE) -> Iterator[MiniBatchBlock]:
    """One epoch of training blocks.

    Visits every training positive exactly once in shuffled order, pairing
    each with ``negatives_per_positive`` corrupted negatives filtered against
    the full fact set. Neighborhoods are sampled from the message graph
    (training triplets only). Positives whose negatives exhaust are skipped.
    """
    if batch_size < 1:
        raise InputError("batch size must be >= 1")
    train = split.train
    order = rng.permutation(len(train))
    for start in range(0, len(train), batch_size):
        chunk = [train[i] for i in order[start:start + batch_size]]
        positives: list[Triplet] = []
        negatives: list[NegativeSample] = []
        for pos in chunk:
            try:
                negs = [corrupt(pos, full_graph, rng, mode)
                        for _ in range(negatives_per_positive)]
            except ExhaustedNegativesError:
                logger.warning("skipping positive %s: negatives exhausted", pos)
                continue
            positives.append(pos)
            negatives.extend(negs)
        if not positives:
            continue
        seed_nodes: list[int] = []
        for t in positives + [n.triplet for n in negatives]:
            seed_nodes.append(t.source)
            seed_nodes.append(t.dest)
        block = sample_block(message_graph, seed_nodes, fanout, depth, rng)
        yield attach_triplets(block, positives, negatives)


def save_manifest(split: TripletSplit, path, fingerprint: str | None = None) -> None:
    """Write the split manifest CSV: source_id,relation,dest_id,split."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if fingerprint:
            fh.write(f"# config_fingerprint={fingerprint}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["source_id", "relation", "dest_id", "split"])
        for name, triplets in split.parts().items():
            for t in sorted(triplets, key=triplet_sort_key):
                writer.writerow([t.source, t.relation.value, t.dest, name])


def load_manifest(path) -> TripletSplit:
    split = TripletSplit([], [], [])
    buckets = split.parts()
    with open(path, "r", encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh]
    rows = [ln for ln in lines if not ln.startswith("#")]
    reader = csv.reader(rows)
    header = next(reader, None)
    if header != ["source_id", "relation", "dest_id", "split"]:
        raise InputError(f"{path}: bad manifest header {header!r}")
    for rownum, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 4:
            raise InputError(f"{path}: row {rownum}: expected 4 columns")
        try:
            src, dst = int(row[0]), int(row[2])
        except ValueError:
            raise InputError(f"{path}: row {rownum}: bad entity id") from None
        rel = relation_from_tag(row[1])
        if row[3] not in buckets:
            raise InputError(f"{path}: row {rownum}: unknown split tag {row[3]!r}")
        buckets[row[3]].append(Triplet(src, rel, dst))
    return split
