"""In-memory heterogeneous knowledge graph with per-relation adjacency.

Entities get dense integer ids in insertion order; identity is the
(entity type, label) pair. Triplets are stored in forward and reverse
adjacency simultaneously, deduplicated, and every insertion is checked
against the ontology. A graph is mutable while it is being populated and
immutable after ``freeze()``; frozen graphs may be read concurrently.

Persistence format (UTF-8 text, tab-separated):

    #entities
    <id>\t<etype>\t<label>
    #triplets
    <source_id>\t<relation>\t<dest_id>
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

from .errors import InputError, SupplyKGError
from .ontology import (
    RELATIONS,
    EntityType,
    Relation,
    check_conformance,
    entity_type_from_tag,
    relation_from_tag,
)


class GraphError(InputError):
    """Unknown ids, bad labels, or malformed graph files."""


class FrozenGraphError(SupplyKGError):
    """Mutation attempted after freeze()."""


@dataclass(frozen=True)
class Entity:
    id: int
    etype: EntityType
    label: str


@dataclass(frozen=True)
class Triplet:
    source: int
    relation: Relation
    dest: int


def triplet_sort_key(t: Triplet) -> tuple[int, int, int]:
    """Deterministic ordering: Table-2 relation order, then endpoint ids."""
    return (RELATIONS.index(t.relation), t.source, t.dest)


class KnowledgeGraph:
    def __init__(self) -> None:
        self._entities: list[Entity] = []
        self._by_key: dict[tuple[EntityType, str], int] = {}
        self._by_type: dict[EntityType, list[int]] = {t: [] for t in EntityType}
        self._fwd: dict[Relation, dict[int, set[int]]] = {r: {} for r in RELATIONS}
        self._rev: dict[Relation, dict[int, set[int]]] = {r: {} for r in RELATIONS}
        self._counts: dict[Relation, int] = {r: 0 for r in RELATIONS}
        self._frozen = False
        # sorted-neighbor caches, built at freeze time
        self._fwd_sorted: dict[Relation, dict[int, tuple[int, ...]]] = {}
        self._rev_sorted: dict[Relation, dict[int, tuple[int, ...]]] = {}

    # -- entities -----------------------------------------------------------

    def add_entity(self, etype: EntityType, label: str) -> int:
        """Register (etype, label), returning its dense id. Idempotent."""
        if self._frozen:
            raise FrozenGraphError("cannot add entities to a frozen graph")
        if not label:
            raise GraphError("entity label must be non-empty")
        if "\t" in label or "\n" in label or "\r" in label:
            raise GraphError(f"entity label {label!r} contains tab/newline, "
                             "which the graph file format cannot represent")
        key = (etype, label)
        existing = self._by_key.get(key)
        if existing is not None:
            return existing
        eid = len(self._entities)
        self._entities.append(Entity(eid, etype, label))
        self._by_key[key] = eid
        self._by_type[etype].append(eid)
        return eid

    def entity(self, eid: int) -> Entity:
        self._check_node(eid)
        return self._entities[eid]

    def entity_id(self, etype: EntityType, label: str) -> int | None:
        """Dense id for (etype, label), or None if absent."""
        return self._by_key.get((etype, label))

    def entities(self) -> Iterator[Entity]:
        return iter(self._entities)

    def entities_of_type(self, etype: EntityType) -> list[int]:
        return list(self._by_type[etype])

    @property
    def num_entities(self) -> int:
        return len(self._entities)

    # -- triplets -----------------------------------------------------------

    def add_triplet(self, triplet: Triplet) -> bool:
        """Store a fact in both adjacency directions.

        Returns False (graph unchanged) when the triplet is already present.
        Raises GraphError for unknown ids and OntologyError for domain/range
        violations.
        """
        if self._frozen:
            raise FrozenGraphError("cannot add triplets to a frozen graph")
        self._check_node(triplet.source)
        self._check_node(triplet.dest)
        check_conformance(
            self._entities[triplet.source].etype,
            triplet.relation,
            self._entities[triplet.dest].etype,
        )
        fwd = self._fwd[triplet.relation].setdefault(triplet.source, set())
        if triplet.dest in fwd:
            return False
        fwd.add(triplet.dest)
        self._rev[triplet.relation].setdefault(triplet.dest, set()).add(triplet.source)
        self._counts[triplet.relation] += 1
        return True

    def has_triplet(self, triplet: Triplet) -> bool:
        return self.has_edge(triplet.source, triplet.relation, triplet.dest)

    def has_edge(self, source: int, relation: Relation, dest: int) -> bool:
        dsts = self._fwd[relation].get(source)
        return dsts is not None and dest in dsts

    def neighbors(self, node: int, relation: Relation, direction: str = "forward") -> list[int]:
        """Sorted, duplicate-free neighbor ids; [] when the node has no edges."""
        self._check_node(node)
        if direction not in ("forward", "reverse"):
            raise ValueError(f"direction must be 'forward' or 'reverse', got {direction!r}")
        if self._frozen:
            cache = self._fwd_sorted if direction == "forward" else self._rev_sorted
            return list(cache[relation].get(node, ()))
        adj = self._fwd if direction == "forward" else self._rev
        return sorted(adj[relation].get(node, ()))

    def degree(self, node: int, relation: Relation, direction: str = "forward") -> int:
        self._check_node(node)
        adj = self._fwd if direction == "forward" else self._rev
        return len(adj[relation].get(node, ()))

    def adjacency(self, relation: Relation, direction: str = "forward") -> dict[int, set[int]]:
        """Raw adjacency map node -> neighbor set for one relation. Treat as read-only."""
        if direction not in ("forward", "reverse"):
            raise ValueError(f"direction must be 'forward' or 'reverse', got {direction!r}")
        return self._fwd[relation] if direction == "forward" else self._rev[relation]

    def relation_counts(self) -> dict[Relation, int]:
        return dict(self._counts)

    @property
    def num_triplets(self) -> int:
        return sum(self._counts.values())

    def triplets(self, relation: Relation | None = None) -> Iterator[Triplet]:
        """All stored triplets in deterministic (relation, source, dest) order."""
        rels = (relation,) if relation is not None else RELATIONS
        for rel in rels:
            fwd = self._fwd[rel]
            for src in sorted(fwd):
                for dst in sorted(fwd[src]):
                    yield Triplet(src, rel, dst)

    # -- lifecycle ----------------------------------------------------------

    @property
    def frozen(self) -> bool:
        return self._frozen

    def freeze(self) -> "KnowledgeGraph":
        """Make the graph immutable and build sorted-neighbor caches."""
        if not self._frozen:
            self._fwd_sorted = {
                r: {u: tuple(sorted(v)) for u, v in adj.items()}
                for r, adj in self._fwd.items()
            }
            self._rev_sorted = {
                r: {u: tuple(sorted(v)) for u, v in adj.items()}
                for r, adj in self._rev.items()
            }
            self._frozen = True
        return self

    def subgraph(self, triplets: Iterable[Triplet], frozen: bool = True) -> "KnowledgeGraph":
        """New graph sharing this graph's entity table but only the given triplets."""
        g = KnowledgeGraph()
        for ent in self._entities:
            g.add_entity(ent.etype, ent.label)
        for t in triplets:
            g.add_triplet(t)
        if frozen:
            g.freeze()
        return g

    # -- misc ---------------------------------------------------------------

    def _check_node(self, eid: int) -> None:
        if not 0 <= eid < len(self._entities):
            raise GraphError(f"unknown entity id {eid}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return self._entities == other._entities and self._fwd == other._fwd

    def __repr__(self) -> str:
        return (f"KnowledgeGraph(entities={self.num_entities}, "
                f"triplets={self.num_triplets}, frozen={self._frozen})")


def save_graph(graph: KnowledgeGraph, path) -> None:
    """Write the two-section tab-separated graph file. Deterministic byte-wise."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("#entities\n")
        for ent in graph.entities():
            fh.write(f"{ent.id}\t{ent.etype.value}\t{ent.label}\n")
        fh.write("#triplets\n")
        for t in graph.triplets():
            fh.write(f"{t.source}\t{t.relation.value}\t{t.dest}\n")


def load_graph(path) -> KnowledgeGraph:
    """Parse a graph file; errors report the offending line number and reason."""
    graph = KnowledgeGraph()
    section = None
    seen_ids: dict[int, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            if line == "#entities":
                section = "entities"
                continue
            if line == "#triplets":
                section = "triplets"
                continue
            if section is None:
                raise GraphError(f"{path}:{lineno}: content before #entities section")
            fields = line.split("\t")
            if len(fields) != 3:
                raise GraphError(f"{path}:{lineno}: expected 3 tab-separated fields, "
                                 f"got {len(fields)}")
            if section == "entities":
                try:
                    eid = int(fields[0])
                except ValueError:
                    raise GraphError(f"{path}:{lineno}: bad entity id {fields[0]!r}") from None
                try:
                    etype = entity_type_from_tag(fields[1])
                except InputError as exc:
                    raise GraphError(f"{path}:{lineno}: {exc}") from None
                if eid in seen_ids:
                    raise GraphError(f"{path}:{lineno}: duplicate entity id {eid}")
                assigned = graph.add_entity(etype, fields[2])
                if assigned != eid:
                    raise GraphError(f"{path}:{lineno}: entity ids must be dense and "
                                     f"in order; expected {assigned}, got {eid}")
                seen_ids[eid] = lineno
            else:
                try:
                    src, dst = int(fields[0]), int(fields[2])
                except ValueError:
                    raise GraphError(f"{path}:{lineno}: bad entity id in triplet") from None
                try:
                    rel = relation_from_tag(fields[1])
                except InputError as exc:
                    raise GraphError(f"{path}:{lineno}: {exc}") from None
                if src not in seen_ids or dst not in seen_ids:
                    missing = src if src not in seen_ids else dst
                    raise GraphError(f"{path}:{lineno}: triplet references undeclared "
                                     f"entity id {missing}")
                graph.add_triplet(Triplet(src, rel, dst))
    return graph
