"""Tabular ingestion: company CSV rows -> base triplets.

Input CSV schema (first line is the header, multi-valued cells are
';'-separated):

    company,products,capabilities,certifications,country,suppliers

Incomplete rows are expected; empty cells become empty lists. Product and
capability strings are case-folded for identity, all strings are
whitespace-trimmed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

from .errors import InputError
from .graph import KnowledgeGraph, Triplet
from .ontology import EntityType, Relation

EXPECTED_HEADER = ["company", "products", "capabilities", "certifications", "country", "suppliers"]


class IngestError(InputError):
    """Malformed company table."""


@dataclass
class CompanyRecord:
    name: str
    products: list[str] = field(default_factory=list)
    capabilities: list[str] = field(default_factory=list)
    certifications: list[str] = field(default_factory=list)
    country: str | None = None
    suppliers: list[str] = field(default_factory=list)


def _split_multi(cell: str, casefold: bool = False) -> list[str]:
    out = []
    for part in cell.split(";"):
        part = part.strip()
        if casefold:
            part = part.casefold()
        if part:
            out.append(part)
    return out


def parse_company_table(path) -> list[CompanyRecord]:
    """One CompanyRecord per data row; errors carry the 1-based row number."""
    records: list[CompanyRecord] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file, missing header") from None
        if [h.strip().lower() for h in header] != EXPECTED_HEADER:
            raise IngestError(f"{path}: bad header {header!r}; expected "
                              f"{','.join(EXPECTED_HEADER)}")
        for rownum, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(EXPECTED_HEADER):
                raise IngestError(f"{path}: row {rownum}: expected "
                                  f"{len(EXPECTED_HEADER)} columns, got {len(row)}")
            name = row[0].strip()
            if not name:
                raise IngestError(f"{path}: row {rownum}: empty company name")
            country = row[4].strip()
            records.append(CompanyRecord(
                name=name,
                products=_split_multi(row[1], casefold=True),
                capabilities=_split_multi(row[2], casefold=True),
                certifications=_split_multi(row[3]),
                country=country or None,
                suppliers=_split_multi(row[5]),
            ))
    return records


def emit_base_triplets(records: list[CompanyRecord], graph: KnowledgeGraph) -> KnowledgeGraph:
    """Populate the graph with the five base relations from company records.

    Entities are auto-registered on first sight, including companies that
    only appear as suppliers. A row's suppliers column yields
    (row company, buys_from, supplier) edges.
    """
    for rec in records:
        cid = graph.add_entity(EntityType.COMPANY, rec.name)
        for prod in rec.products:
            pid = graph.add_entity(EntityType.PRODUCT, prod)
            graph.add_triplet(Triplet(cid, Relation.MAKES_PRODUCT, pid))
        for cap in rec.capabilities:
            kid = graph.add_entity(EntityType.CAPABILITY, cap)
            graph.add_triplet(Triplet(cid, Relation.HAS_CAPABILITY, kid))
        for cert in rec.certifications:
            sid = graph.add_entity(EntityType.CERTIFICATION, cert)
            graph.add_triplet(Triplet(cid, Relation.HAS_CERT, sid))
        if rec.country:
            oid = graph.add_entity(EntityType.COUNTRY, rec.country)
            graph.add_triplet(Triplet(cid, Relation.LOCATED_IN, oid))
        for supplier in rec.suppliers:
            sid = graph.add_entity(EntityType.COMPANY, supplier)
            graph.add_triplet(Triplet(cid, Relation.BUYS_FROM, sid))
    return graph
