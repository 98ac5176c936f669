"""Acceptance suite: one test per criterion, one printed pass/fail line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines live.
The two end-to-end criteria train real models and take ~40 s each.
"""

import json
import time
from contextlib import contextmanager

import numpy as np
import pytest

from supplykg.cli import main as cli_main
from supplykg.config import ModelConfig, TrainConfig
from supplykg.derive import (DeriveConfig, bipartite_projection,
                             cooccurrence_weights, derive_relations)
from supplykg.evaluate import auc, evaluate
from supplykg.graph import KnowledgeGraph, Triplet, load_graph, save_graph
from supplykg.model import (backward, forward_batch, init_optimizer, init_params,
                            load_checkpoint, save_checkpoint)
from supplykg.ontology import RELATIONS, SCHEMA, EntityType, OntologyError, Relation
from supplykg.sampling import (ExhaustedNegativesError, SplitSpec, corrupt,
                               split_triplets)
from supplykg.synth import SynthConfig, generate
from supplykg.train import train_model

from gradcheck import finite_difference_grads, max_relative_error
from test_derive import brute_force_cooccurrence, brute_force_projection, \
    company_graph, random_assignments
from test_graph import random_graph
from test_model import batch_block


@contextmanager
def criterion(number, name):
    try:
        yield
    except BaseException:
        print(f"\n[criterion {number:02d}] {name}: FAIL")
        raise
    print(f"\n[criterion {number:02d}] {name}: PASS")


def build_random_kg(rng, n_triplets, n_companies=60, n_products=40, n_caps=8,
                    n_certs=4, n_countries=6):
    """Random conformant graph with an exact triplet count over all 7 relations."""
    g = KnowledgeGraph()
    pools = {
        EntityType.COMPANY: [g.add_entity(EntityType.COMPANY, f"c{i}") for i in range(n_companies)],
        EntityType.PRODUCT: [g.add_entity(EntityType.PRODUCT, f"p{i}") for i in range(n_products)],
        EntityType.CAPABILITY: [g.add_entity(EntityType.CAPABILITY, f"k{i}") for i in range(n_caps)],
        EntityType.CERTIFICATION: [g.add_entity(EntityType.CERTIFICATION, f"s{i}") for i in range(n_certs)],
        EntityType.COUNTRY: [g.add_entity(EntityType.COUNTRY, f"l{i}") for i in range(n_countries)],
    }
    while g.num_triplets < n_triplets:
        rel = RELATIONS[rng.integers(len(RELATIONS))]
        src_t, dst_t = SCHEMA[rel]
        u = pools[src_t][rng.integers(len(pools[src_t]))]
        v = pools[dst_t][rng.integers(len(pools[dst_t]))]
        if u != v:
            g.add_triplet(Triplet(u, rel, v))
    return g


@pytest.fixture(scope="module")
def planted_run():
    """Default pipeline on the planted lambda=0.9 graph (criteria 4 and 5)."""
    started = time.monotonic()
    graph = generate(SynthConfig(assortativity=0.9, seed=42)).graph
    derive_relations(graph, DeriveConfig())
    graph.freeze()
    split = split_triplets(list(graph.triplets()), SplitSpec(seed=42))
    result = train_model(graph, split, ModelConfig(), TrainConfig(), seed=42)
    report = evaluate(result.best_params, graph, split, ModelConfig().fanout, seed=42)
    return {"report": report, "elapsed": time.monotonic() - started}


def test_criterion_01_gradient_correctness():
    with criterion(1, "gradient correctness vs central finite differences"):
        started = time.monotonic()
        rng = np.random.default_rng(101)
        graph = random_graph(rng, n_companies=12, n_products=10, n_caps=4,
                             n_certs=2, n_countries=2, n_edges=90).freeze()
        assert graph.num_entities == 30
        params = init_params(graph, d=8, depth=2, seed=7)
        block = batch_block(graph, np.random.default_rng(102), n_pos=10, fanout=5)
        labels = block.labels()
        _, trace = forward_batch(block, params)
        analytic = backward(trace, params)
        numeric = finite_difference_grads(
            lambda: forward_batch(block, params, labels)[0],
            params.tensors(), step=1e-5)
        worst, name = max_relative_error(analytic, numeric)
        elapsed = time.monotonic() - started
        assert worst < 1e-4, f"worst relative error {worst:.3e} in {name}"
        assert elapsed < 30.0, f"gradient check took {elapsed:.1f}s"


def test_criterion_02_auc_oracle_equivalence():
    with criterion(2, "AUC equals O(n^2) pairwise oracle on 100 instances"):
        rng = np.random.default_rng(201)
        checked = 0
        while checked < 100:
            n = int(rng.integers(10, 1001))
            if rng.random() < 0.5:
                scores = rng.integers(0, 20, size=n).astype(float)  # force ties
            else:
                scores = rng.normal(size=n)
            labels = rng.integers(0, 2, size=n).astype(float)
            n_pos = int(labels.sum())
            if n_pos in (0, n):
                continue
            pos, neg = scores[labels == 1], scores[labels == 0]
            oracle = (float((pos[:, None] > neg).sum())
                      + 0.5 * float((pos[:, None] == neg).sum())) / (len(pos) * len(neg))
            assert auc(scores, labels) == oracle
            checked += 1


def test_criterion_03_derivation_oracle_equivalence():
    with criterion(3, "derivation equals nested-loop oracles on 100 graphs"):
        rng = np.random.default_rng(301)
        for _ in range(100):
            g = company_graph(random_assignments(rng, int(rng.integers(2, 101))))
            got_co = {(p.left, p.right): p.weight for p in cooccurrence_weights(g)}
            got_proj = {(p.left, p.right): p.weight for p in bipartite_projection(g)}
            assert got_co == brute_force_cooccurrence(g)
            assert got_proj == brute_force_projection(g)


def test_criterion_04_planted_structure_learning(planted_run):
    with criterion(4, "planted-signal AUC bounds (lambda 0.9 vs 0.0)"):
        planted_auc = planted_run["report"].lookup("buys_from", "test").auc
        assert planted_run["elapsed"] < 120.0, \
            f"lambda=0.9 run took {planted_run['elapsed']:.0f}s"
        assert planted_auc >= 0.85, f"lambda=0.9 test AUC {planted_auc:.4f} < 0.85"

        started = time.monotonic()
        graph = generate(SynthConfig(assortativity=0.0, seed=42)).graph
        derive_relations(graph, DeriveConfig())
        graph.freeze()
        split = split_triplets(list(graph.triplets()), SplitSpec(seed=42))
        result = train_model(graph, split, ModelConfig(), TrainConfig(), seed=42)
        report = evaluate(result.best_params, graph, split, ModelConfig().fanout,
                          seed=42, with_baselines=False)
        elapsed = time.monotonic() - started
        null_auc = report.lookup("buys_from", "test").auc
        assert elapsed < 120.0, f"lambda=0.0 run took {elapsed:.0f}s"
        assert null_auc <= 0.65, f"lambda=0.0 test AUC {null_auc:.4f} > 0.65"
        print(f"  planted {planted_auc:.4f} vs null {null_auc:.4f}", end="")


def test_criterion_05_model_beats_heuristic_baselines(planted_run):
    with criterion(5, "trained model beats best heuristic by >= 0.05"):
        report = planted_run["report"]
        model_auc = report.lookup("buys_from", "test").auc
        best_heuristic = max(b.auc for b in report.baselines if b.split == "test")
        assert model_auc >= best_heuristic + 0.05, \
            f"model {model_auc:.4f} vs best heuristic {best_heuristic:.4f}"


def test_criterion_06_split_contract():
    with criterion(6, "stratified 1000-triplet split contract"):
        rng = np.random.default_rng(601)
        graph = build_random_kg(rng, n_triplets=1000)
        triplets = list(graph.triplets())
        assert len(triplets) == 1000
        spec = SplitSpec(seed=17)
        split = split_triplets(triplets, spec)
        again = split_triplets(triplets, spec)
        assert split.train == again.train and split.validation == again.validation \
            and split.test == again.test
        parts = [set(split.train), set(split.validation), set(split.test)]
        assert parts[0] | parts[1] | parts[2] == set(triplets)
        assert sum(len(p) for p in parts) == 1000  # pairwise disjoint
        for rel in RELATIONS:
            n = sum(1 for t in triplets if t.relation is rel)
            if n < 3:
                continue
            for frac, part in ((0.7, split.train), (0.2, split.validation),
                               (0.1, split.test)):
                got = sum(1 for t in part if t.relation is rel)
                assert abs(got - frac * n) <= 1, (rel, frac, got, n)


def test_criterion_07_negative_sample_soundness():
    with criterion(7, "100k negatives: none are facts, swaps type-correct"):
        graph = generate(SynthConfig(seed=42)).graph
        derive_relations(graph, DeriveConfig())
        graph.freeze()
        triplets = list(graph.triplets())
        rng = np.random.default_rng(701)
        produced = 0
        while produced < 100_000:
            pos = triplets[rng.integers(len(triplets))]
            try:
                neg = corrupt(pos, graph, rng)
            except ExhaustedNegativesError:
                continue
            t = neg.triplet
            assert not graph.has_triplet(t)
            if t.relation is Relation.COMPLIMENTARY_PRODUCT_TO:
                assert not graph.has_edge(t.dest, t.relation, t.source)
            if neg.kind in ("source-swap", "destination-swap"):
                src_t, dst_t = SCHEMA[pos.relation]
                assert graph.entity(t.source).etype is src_t
                assert graph.entity(t.dest).etype is dst_t
            produced += 1


def test_criterion_08_determinism_byte_identical(tmp_path):
    with criterion(8, "identical config -> byte-identical loss logs and reports"):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "model": {"d": 16, "fanout": 5},
            "train": {"epochs": 4, "batch_size": 64, "learning_rate": 0.02},
            "seed": 9,
        }))
        artifacts = {}
        for run in ("one", "two"):
            out = tmp_path / run
            base = ["--config", str(cfg), "--out", str(out)]
            assert cli_main(["--seed", "9", "--out", str(out), "synth",
                             "--companies", "60", "--products", "80",
                             "--capabilities", "6"]) == 0
            assert cli_main(base + ["derive", "--graph", str(out / "graph.tsv")]) == 0
            assert cli_main(base + ["split", "--graph", str(out / "derived.tsv")]) == 0
            assert cli_main(base + ["train", "--graph", str(out / "derived.tsv"),
                                    "--manifest", str(out / "split.csv")]) == 0
            assert cli_main(base + ["eval", "--graph", str(out / "derived.tsv"),
                                    "--manifest", str(out / "split.csv"),
                                    "--checkpoint", str(out / "best.ckpt")]) == 0
            artifacts[run] = {name: (out / name).read_bytes()
                              for name in ("loss.csv", "report.csv", "report.md",
                                           "report.json", "baselines.csv")}
        for name in artifacts["one"]:
            assert artifacts["one"][name] == artifacts["two"][name], name


def test_criterion_09_conformance_fuzzing():
    with criterion(9, "10k type-violating triplets all rejected"):
        rng = np.random.default_rng(901)
        graph = build_random_kg(rng, n_triplets=50)
        by_type = {t: graph.entities_of_type(t) for t in EntityType}
        rejected = 0
        while rejected < 10_000:
            rel = RELATIONS[rng.integers(len(RELATIONS))]
            src_t = list(EntityType)[rng.integers(5)]
            dst_t = list(EntityType)[rng.integers(5)]
            if (src_t, dst_t) == SCHEMA[rel]:
                continue  # only type-violating probes count
            u = by_type[src_t][rng.integers(len(by_type[src_t]))]
            v = by_type[dst_t][rng.integers(len(by_type[dst_t]))]
            with pytest.raises(OntologyError):
                graph.add_triplet(Triplet(u, rel, v))
            rejected += 1


def test_criterion_10_persistence_round_trips(tmp_path):
    with criterion(10, "graph and checkpoint round-trips are exact"):
        rng = np.random.default_rng(1001)
        for trial in range(10):
            g = build_random_kg(rng, n_triplets=int(rng.integers(10, 2000)))
            path = tmp_path / f"g{trial}.tsv"
            save_graph(g, path)
            assert load_graph(path) == g
        graph = build_random_kg(rng, n_triplets=300).freeze()
        params = init_params(graph, d=12, depth=2, seed=3)
        state = init_optimizer(params)
        state.step = 5
        ckpt = tmp_path / "model.ckpt"
        save_checkpoint(params, state, ckpt)
        loaded, lstate = load_checkpoint(ckpt, graph=graph, expect_d=12, expect_depth=2)
        for name, t in params.tensors().items():
            assert np.array_equal(t, loaded.tensors()[name])
        assert lstate.step == 5
