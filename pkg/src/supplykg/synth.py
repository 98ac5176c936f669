"""Seeded synthetic supply-chain graphs with planted, learnable structure.

Companies acquire capabilities; each product belongs to exactly one latent
capability and companies make products drawn from their capabilities'
product pools. buys_from edges grow by preferential attachment (supply
networks hub heavily), then each edge is rewired, with probability
``assortativity``, toward a supplier whose portfolio shares a latent
capability with the buyer's products. That rewiring is the signal a link
predictor is supposed to find; at assortativity 0 supplier choice is
independent of portfolios.

Entity-count defaults are scaled-down ratios of a real automotive dataset,
small enough for sub-minute desk runs. The generator's realism against any
particular real network is unvalidated.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .graph import KnowledgeGraph, Triplet
from .ontology import EntityType, Relation


@dataclass(frozen=True)
class SynthConfig:
    companies: int = 200
    products: int = 600
    capabilities: int = 12
    certifications: int = 5
    countries: int = 20
    attachment_edges: int = 4          # m: suppliers per new company
    capability_mean: float = 1.0       # capabilities per company (min 1)
    products_mean: float = 6.0         # products per company (min 1)
    cert_rate: float = 0.3             # per-certification inclusion probability
    assortativity: float = 0.9         # lambda: rewiring probability per edge
    holdout_fraction: float = 0.0
    seed: int = 42

    def __post_init__(self) -> None:
        for name in ("companies", "products", "capabilities", "certifications", "countries"):
            if getattr(self, name) < 1:
                raise InputError(f"{name} must be >= 1")
        if self.attachment_edges < 1:
            raise InputError("attachment_edges must be >= 1")
        if not 0.0 <= self.assortativity <= 1.0:
            raise InputError("assortativity must be in [0, 1]")
        if not 0.0 <= self.holdout_fraction < 1.0:
            raise InputError("holdout_fraction must be in [0, 1)")


@dataclass
class SynthGraph:
    graph: KnowledgeGraph
    #: latent truth: product id -> capability id that actually produces it
    product_capability: dict[int, int]

    def truth_pairs(self) -> list[tuple[str, str]]:
        """(capability label, product label) rows, sorted, for the sidecar file."""
        g = self.graph
        pairs = [(g.entity(cap).label, g.entity(prod).label)
                 for prod, cap in self.product_capability.items()]
        return sorted(pairs)


def _preferential_attachment(n: int, m: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """(customer, supplier) index pairs; suppliers drawn prop. to in-degree + 1."""
    indeg = np.zeros(n)
    edges: list[tuple[int, int]] = []
    for c in range(1, n):
        k = min(m, c)
        weights = indeg[:c] + 1.0
        for _ in range(k):
            total = weights.sum()
            if total <= 0:
                break
            s = int(rng.choice(c, p=weights / total))
            edges.append((c, s))
            indeg[s] += 1.0
            weights[s] = 0.0  # without replacement within one company
    return edges


def generate(config: SynthConfig) -> SynthGraph:
    """Build a conformant graph plus its latent capability->product truth."""
    rng = np.random.default_rng(config.seed)
    g = KnowledgeGraph()
    companies = [g.add_entity(EntityType.COMPANY, f"company_{i:04d}")
                 for i in range(config.companies)]
    products = [g.add_entity(EntityType.PRODUCT, f"product_{i:04d}")
                for i in range(config.products)]
    capabilities = [g.add_entity(EntityType.CAPABILITY, f"capability_{i:02d}")
                    for i in range(config.capabilities)]
    certs = [g.add_entity(EntityType.CERTIFICATION, f"cert_{i:02d}")
             for i in range(config.certifications)]
    countries = [g.add_entity(EntityType.COUNTRY, f"country_{i:02d}")
                 for i in range(config.countries)]

    # latent truth: round-robin guarantees every capability produces something
    product_capability = {}
    cap_products: dict[int, list[int]] = {cap: [] for cap in capabilities}
    for j, prod in enumerate(products):
        cap = capabilities[j % config.capabilities] if j < config.capabilities \
            else capabilities[int(rng.integers(config.capabilities))]
        product_capability[prod] = cap
        cap_products[cap].append(prod)

    company_caps: list[list[int]] = []
    company_products: list[list[int]] = []
    for cid in companies:
        n_caps = min(1 + int(rng.poisson(max(config.capability_mean - 1.0, 0.0))),
                     config.capabilities)
        caps = sorted(rng.choice(config.capabilities, size=n_caps, replace=False).tolist())
        caps = [capabilities[i] for i in caps]
        pool = sorted({p for cap in caps for p in cap_products[cap]})
        n_prods = min(1 + int(rng.poisson(max(config.products_mean - 1.0, 0.0))), len(pool))
        prods = sorted(rng.choice(len(pool), size=n_prods, replace=False).tolist()) \
            if pool else []
        prods = [pool[i] for i in prods]
        company_caps.append(caps)
        company_products.append(prods)
        for cap in caps:
            g.add_triplet(Triplet(cid, Relation.HAS_CAPABILITY, cap))
        for prod in prods:
            g.add_triplet(Triplet(cid, Relation.MAKES_PRODUCT, prod))
        for cert in certs:
            if rng.random() < config.cert_rate:
                g.add_triplet(Triplet(cid, Relation.HAS_CERT, cert))
        country = countries[int(rng.integers(config.countries))]
        g.add_triplet(Triplet(cid, Relation.LOCATED_IN, country))

    edges = _preferential_attachment(config.companies, config.attachment_edges, rng)

    # companies holding each capability (via their latent product capabilities)
    companies_by_cap: dict[int, list[int]] = {cap: [] for cap in capabilities}
    for idx, prods in enumerate(company_products):
        for cap in sorted({product_capability[p] for p in prods}):
            companies_by_cap[cap].append(companies[idx])

    rewired: list[tuple[int, int]] = []
    for c_idx, s_idx in edges:
        customer = companies[c_idx]
        supplier = companies[s_idx]
        if rng.random() < config.assortativity:
            buyer_caps = sorted({product_capability[p] for p in company_products[c_idx]})
            candidates = sorted({comp for cap in buyer_caps
                                 for comp in companies_by_cap[cap]} - {customer})
            if candidates:
                supplier = candidates[int(rng.integers(len(candidates)))]
        rewired.append((customer, supplier))
    for customer, supplier in rewired:
        if customer != supplier:
            g.add_triplet(Triplet(customer, Relation.BUYS_FROM, supplier))

    return SynthGraph(g, product_capability)


def holdout(synth: SynthGraph | KnowledgeGraph, fraction: float,
            rng: np.random.Generator) -> tuple[KnowledgeGraph, list[Triplet]]:
    """Remove a uniform fraction of buys_from edges; returns (visible graph,
    held-out triplets). Held-out and visible edge sets partition buys_from."""
    if not 0.0 < fraction < 1.0:
        raise InputError("holdout fraction must be in (0, 1)")
    graph = synth.graph if isinstance(synth, SynthGraph) else synth
    buys = list(graph.triplets(Relation.BUYS_FROM))
    n_out = int(round(fraction * len(buys)))
    chosen = set(rng.choice(len(buys), size=n_out, replace=False).tolist())
    held = [buys[i] for i in sorted(chosen)]
    held_set = set(held)
    visible = [t for t in graph.triplets() if t not in held_set]
    return graph.subgraph(visible, frozen=False), held


def write_truth_csv(synth: SynthGraph, path, fingerprint: str | None = None) -> None:
    """Sidecar CSV of the latent production pairs: capability,product."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if fingerprint:
            fh.write(f"# config_fingerprint={fingerprint}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["capability", "product"])
        writer.writerows(synth.truth_pairs())
