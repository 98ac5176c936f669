"""The fixed supply-chain ontology: entity types, relation types, domain/range rules.

Both sets are closed and compiled in; conformance of any (source type,
relation, destination type) triple is totally decidable.
"""

from __future__ import annotations

from enum import Enum

from .errors import InputError


class EntityType(Enum):
    COMPANY = "company"
    PRODUCT = "product"
    COUNTRY = "country"
    CAPABILITY = "capability"
    CERTIFICATION = "certification"


class Relation(Enum):
    CAPABILITY_PRODUCES = "capability_produces"
    BUYS_FROM = "buys_from"
    HAS_CAPABILITY = "has_capability"
    HAS_CERT = "has_cert"
    LOCATED_IN = "located_in"
    MAKES_PRODUCT = "makes_product"
    COMPLIMENTARY_PRODUCT_TO = "complimentary_product_to"


ENTITY_TYPES: tuple[EntityType, ...] = tuple(EntityType)
RELATIONS: tuple[Relation, ...] = tuple(Relation)

#: relation -> (source entity type, destination entity type)
SCHEMA: dict[Relation, tuple[EntityType, EntityType]] = {
    Relation.CAPABILITY_PRODUCES: (EntityType.CAPABILITY, EntityType.PRODUCT),
    Relation.BUYS_FROM: (EntityType.COMPANY, EntityType.COMPANY),
    Relation.HAS_CAPABILITY: (EntityType.COMPANY, EntityType.CAPABILITY),
    Relation.HAS_CERT: (EntityType.COMPANY, EntityType.CERTIFICATION),
    Relation.LOCATED_IN: (EntityType.COMPANY, EntityType.COUNTRY),
    Relation.MAKES_PRODUCT: (EntityType.COMPANY, EntityType.PRODUCT),
    Relation.COMPLIMENTARY_PRODUCT_TO: (EntityType.PRODUCT, EntityType.PRODUCT),
}


class OntologyError(InputError):
    """A triplet's endpoint types violate the relation's domain/range."""


def domain_range(relation: Relation) -> tuple[EntityType, EntityType]:
    """Source and destination entity types allowed for ``relation``."""
    return SCHEMA[relation]


def relations_for(etype: EntityType) -> tuple[Relation, ...]:
    """Relation types the given entity type may participate in, at either end."""
    return tuple(r for r, (src, dst) in SCHEMA.items() if etype in (src, dst))


def conforms(source_type: EntityType, relation: Relation, dest_type: EntityType) -> bool:
    src, dst = SCHEMA[relation]
    return source_type is src and dest_type is dst


def check_conformance(source_type: EntityType, relation: Relation, dest_type: EntityType) -> None:
    """Raise OntologyError unless the typed triple is allowed by the schema."""
    if not conforms(source_type, relation, dest_type):
        src, dst = SCHEMA[relation]
        raise OntologyError(
            f"({source_type.value}, {relation.value}, {dest_type.value}) violates the "
            f"schema: {relation.value} connects {src.value} -> {dst.value}"
        )


def entity_type_from_tag(tag: str) -> EntityType:
    try:
        return EntityType(tag)
    except ValueError:
        raise InputError(f"unknown entity type tag {tag!r}") from None


def relation_from_tag(tag: str) -> Relation:
    try:
        return Relation(tag)
    except ValueError:
        raise InputError(f"unknown relation tag {tag!r}") from None
