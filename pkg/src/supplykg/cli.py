"""Command-line front end.

Subcommands: build, derive, split, train, eval, sweep, predict, synth.
Global flags: --config <json>, --seed <int>, --out <dir>. Every command is
non-interactive, embeds the resolved config fingerprint in its artifacts,
and is deterministic given (inputs, config, seed).

Exit codes: 0 success, 2 input error, 3 numerical failure, 4 compatibility error.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .config import RunConfig, apply_overrides, fingerprint_payload
from .derive import (bipartite_projection, cooccurrence_weights,
                     derive_relations, weight_histogram, write_histogram_csv)
from .errors import CompatibilityError, InputError, NumericalError, SupplyKGError
from .evaluate import emit_baselines_csv, emit_report, evaluate
from .graph import KnowledgeGraph, load_graph, save_graph
from .ingest import emit_base_triplets, parse_company_table
from .model import load_checkpoint, node_embeddings, predict_prob, save_checkpoint, score_pairs
from .ontology import ENTITY_TYPES, RELATIONS, Relation, domain_range, relation_from_tag
from .sampling import load_manifest, save_manifest, split_triplets
from .synth import SynthConfig, generate, holdout, write_truth_csv
from .train import train_model, write_loss_log

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_COMPAT = 4

PREDICT_CANDIDATE_CAP = 10_000_000


def _print_counts(graph: KnowledgeGraph) -> None:
    print("entity counts:")
    for etype in ENTITY_TYPES:
        print(f"  {etype.value:<14} {len(graph.entities_of_type(etype))}")
    print(f"  {'total':<14} {graph.num_entities}")
    print("triplet counts:")
    counts = graph.relation_counts()
    for rel in RELATIONS:
        print(f"  {rel.value:<26} {counts[rel]}")
    print(f"  {'total':<26} {graph.num_triplets}")


def _write_run_meta(outdir: Path, command: str, cfg: RunConfig, extra: dict | None = None) -> None:
    meta = {"command": command, "config_fingerprint": cfg.fingerprint(),
            "config": cfg.to_dict()}
    if extra:
        meta.update(extra)
    with open(outdir / "run_meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_config(args, extra_overrides: dict | None = None) -> RunConfig:
    overrides = dict(extra_overrides or {})
    if args.seed is not None:
        overrides["seed"] = args.seed
        overrides["split.seed"] = args.seed
    if args.config:
        return RunConfig.load(args.config, overrides)
    return RunConfig.from_dict(apply_overrides({}, overrides))


# -- commands -----------------------------------------------------------------


def cmd_build(args) -> int:
    cfg = _load_config(args)
    out = _outdir(args)
    records = parse_company_table(args.input)
    graph = emit_base_triplets(records, KnowledgeGraph())
    save_graph(graph, out / "graph.tsv")
    _write_run_meta(out, "build", cfg, {"input": str(args.input)})
    print(f"built graph from {len(records)} records -> {out / 'graph.tsv'}")
    _print_counts(graph)
    return EXIT_OK


def cmd_derive(args) -> int:
    from .plots import save_weight_histogram

    overrides = {}
    if args.cap_threshold is not None:
        overrides["derive.capability_cooccurrence_threshold"] = args.cap_threshold
    if args.proj_threshold is not None:
        overrides["derive.projection_weight_threshold"] = args.proj_threshold
    cfg = _load_config(args, overrides)
    out = _outdir(args)
    fp = cfg.fingerprint()
    graph = load_graph(args.graph)

    co = cooccurrence_weights(graph)
    proj = bipartite_projection(graph)
    added = derive_relations(graph, cfg.derive)
    for rel, n in added.items():
        if n == 0:
            logger.warning("threshold produced zero %s edges", rel.value)
    save_graph(graph, out / "derived.tsv")

    co_hist = weight_histogram(co, args.bin_width)
    proj_hist = weight_histogram(proj, args.bin_width)
    write_histogram_csv(co_hist, out / "cooccurrence_weights.csv", fp)
    write_histogram_csv(proj_hist, out / "projection_weights.csv", fp)
    save_weight_histogram(co_hist, out / "cooccurrence_weights.png",
                          "capability-product co-occurrence weights", fp)
    save_weight_histogram(proj_hist, out / "projection_weights.png",
                          "product bipartite projection weights", fp)
    _write_run_meta(out, "derive", cfg, {"graph": str(args.graph)})
    print(f"derived edges: "
          f"{added[Relation.CAPABILITY_PRODUCES]} capability_produces "
          f"(threshold {cfg.derive.capability_cooccurrence_threshold}), "
          f"{added[Relation.COMPLIMENTARY_PRODUCT_TO]} complimentary_product_to "
          f"(threshold {cfg.derive.projection_weight_threshold})")
    _print_counts(graph)
    return EXIT_OK


def cmd_split(args) -> int:
    cfg = _load_config(args)
    out = _outdir(args)
    graph = load_graph(args.graph)
    split = split_triplets(list(graph.triplets()), cfg.split)
    save_manifest(split, out / "split.csv", cfg.fingerprint())
    _write_run_meta(out, "split", cfg, {"graph": str(args.graph)})
    print(f"split {split.size} triplets -> train {len(split.train)}, "
          f"val {len(split.validation)}, test {len(split.test)}")
    return EXIT_OK


def cmd_train(args) -> int:
    from .plots import save_loss_curve

    overrides = {}
    if args.epochs is not None:
        overrides["train.epochs"] = args.epochs
    if args.learning_rate is not None:
        overrides["train.learning_rate"] = args.learning_rate
    cfg = _load_config(args, overrides)
    out = _outdir(args)
    fp = cfg.fingerprint()
    graph = load_graph(args.graph).freeze()
    split = load_manifest(args.manifest)

    result = train_model(graph, split, cfg.model, cfg.train, cfg.seed)
    write_loss_log(result.history, out / "loss.csv", fp)
    save_loss_curve(result.history, out / "loss.png", fp)
    save_checkpoint(result.params, result.opt_state, out / "final.ckpt")
    save_checkpoint(result.best_params, None, out / "best.ckpt")
    _write_run_meta(out, "train", cfg,
                    {"graph": str(args.graph), "manifest": str(args.manifest)})
    last = result.history[-1].loss if result.history else float("nan")
    print(f"trained {cfg.train.epochs} epochs ({len(result.history)} steps), "
          f"final loss {last:.4f}, best val {cfg.train.target_relation} AUC "
          f"{result.best_val_auc:.4f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .plots import save_auc_bars

    cfg = _load_config(args)
    out = _outdir(args)
    fp = cfg.fingerprint()
    graph = load_graph(args.graph).freeze()
    split = load_manifest(args.manifest)
    params, _ = load_checkpoint(args.checkpoint, graph=graph)

    report = evaluate(params, graph, split, cfg.model.fanout, cfg.seed, fp)
    emit_report(report, out / "report.csv", "csv")
    emit_report(report, out / "report.md", "markdown")
    emit_report(report, out / "report.json", "json")
    emit_baselines_csv(report, out / "baselines.csv")
    save_auc_bars(report, out / "auc.png", fp)
    _write_run_meta(out, "eval", cfg, {"graph": str(args.graph),
                                       "manifest": str(args.manifest),
                                       "checkpoint": str(args.checkpoint)})
    for row in report.rows:
        print(f"{row.relation:<26} {row.split:<6} auc={row.auc:.4f} "
              f"(n={row.n_pos}+{row.n_neg})")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    out = _outdir(args)
    with open(args.grid, "r", encoding="utf-8") as fh:
        try:
            grid = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{args.grid}: invalid JSON: {exc}") from None
    if not grid or not isinstance(grid, dict) or any(not v for v in grid.values()):
        raise InputError("sweep grid must map dotted config keys to non-empty value lists")

    base_dict = cfg.to_dict()
    keys = sorted(grid)
    target = Relation(cfg.train.target_relation)
    rows = []
    for values in itertools.product(*(grid[k] for k in keys)):
        overrides = dict(zip(keys, values))
        point = RunConfig.from_dict(apply_overrides(base_dict, overrides))
        graph = load_graph(args.graph)
        derive_relations(graph, point.derive)
        graph.freeze()
        split = split_triplets(list(graph.triplets()), point.split)
        result = train_model(graph, split, point.model, point.train, point.seed)
        rows.append({"overrides": overrides, "val_auc": result.best_val_auc,
                     "fingerprint": point.fingerprint()})
        print(f"grid point {overrides} -> val {target.value} AUC "
              f"{result.best_val_auc:.4f}")

    def sort_key(row):
        o = row["overrides"]
        return (-row["val_auc"],
                o.get("derive.capability_cooccurrence_threshold", 0),
                o.get("derive.projection_weight_threshold", 0),
                json.dumps(o, sort_keys=True))

    rows.sort(key=sort_key)
    with open(out / "leaderboard.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# config_fingerprint={cfg.fingerprint()}\n")
        fh.write("rank,val_auc,fingerprint," + ",".join(keys) + "\n")
        for rank, row in enumerate(rows, start=1):
            cells = ",".join(str(row["overrides"][k]) for k in keys)
            fh.write(f"{rank},{row['val_auc']:.6f},{row['fingerprint']},{cells}\n")
    best = RunConfig.from_dict(apply_overrides(base_dict, rows[0]["overrides"]))
    with open(out / "best_config.json", "w", encoding="utf-8") as fh:
        json.dump(best.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_run_meta(out, "sweep", cfg, {"graph": str(args.graph), "grid": keys})
    print(f"best: {rows[0]['overrides']} (val {target.value} AUC "
          f"{rows[0]['val_auc']:.4f}) -> {out / 'best_config.json'}")
    return EXIT_OK


def cmd_predict(args) -> int:
    cfg = _load_config(args)
    out = _outdir(args)
    fp = cfg.fingerprint()
    if args.top_k < 1:
        raise InputError("--top-k must be >= 1")
    relation = relation_from_tag(args.relation)
    graph = load_graph(args.graph).freeze()
    params, _ = load_checkpoint(args.checkpoint, graph=graph)

    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 3)))
    emb = node_embeddings(graph, params, cfg.model.fanout, rng)
    src_type, dst_type = domain_range(relation)
    sources = np.asarray(graph.entities_of_type(src_type), dtype=np.int64)
    dests = np.asarray(graph.entities_of_type(dst_type), dtype=np.int64)
    symmetric = relation is Relation.COMPLIMENTARY_PRODUCT_TO

    total = len(sources) * len(dests)
    sampled_cap = None
    keep = max(2 * args.top_k, 1024)
    best_s = np.empty(0)
    best_u = np.empty(0, dtype=np.int64)
    best_v = np.empty(0, dtype=np.int64)
    r_vec = params.rel_vectors[relation]
    n_candidates = 0

    if total > PREDICT_CANDIDATE_CAP:
        sampled_cap = PREDICT_CANDIDATE_CAP
        flat = rng.choice(total, size=sampled_cap, replace=False)
        cand_u = sources[flat // len(dests)]
        cand_v = dests[flat % len(dests)]
        chunks = [(cand_u[i:i + 1_000_000], cand_v[i:i + 1_000_000])
                  for i in range(0, sampled_cap, 1_000_000)]
    else:
        chunks = []
        row_chunk = max(1, 2_000_000 // max(len(dests), 1))
        for i in range(0, len(sources), row_chunk):
            us = np.repeat(sources[i:i + row_chunk], len(dests))
            vs = np.tile(dests, len(sources[i:i + row_chunk]))
            chunks.append((us, vs))

    for us, vs in chunks:
        mask = us != vs
        if symmetric:
            mask &= us < vs  # canonical unordered pairs only
        us, vs = us[mask], vs[mask]
        if len(us) == 0:
            continue
        exists = np.asarray([graph.has_edge(u, relation, v) or
                             (symmetric and graph.has_edge(v, relation, u))
                             for u, v in zip(us, vs)])
        us, vs = us[~exists], vs[~exists]
        if len(us) == 0:
            continue
        n_candidates += len(us)
        scores = score_pairs(emb, r_vec, np.column_stack([us, vs]))
        best_s = np.concatenate([best_s, scores])
        best_u = np.concatenate([best_u, us])
        best_v = np.concatenate([best_v, vs])
        if len(best_s) > keep:
            order = np.lexsort((best_v, best_u, -best_s))[:keep]
            best_s, best_u, best_v = best_s[order], best_u[order], best_v[order]

    if n_candidates == 0:
        raise InputError(f"no {relation.value} candidates outside the stored facts")
    order = np.lexsort((best_v, best_u, -best_s))[:args.top_k]
    probs = predict_prob(best_s[order])
    with open(out / "predictions.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# config_fingerprint={fp}\n")
        if sampled_cap is not None:
            fh.write(f"# candidate_space={total} sampled={sampled_cap}\n")
        fh.write("source_id,relation,dest_id,probability,source_label,dest_label\n")
        for i, idx in enumerate(order):
            u, v = int(best_u[idx]), int(best_v[idx])
            fh.write(f"{u},{relation.value},{v},{probs[i]:.6f},"
                     f"{graph.entity(u).label},{graph.entity(v).label}\n")
    _write_run_meta(out, "predict", cfg, {"graph": str(args.graph),
                                          "checkpoint": str(args.checkpoint),
                                          "relation": relation.value,
                                          "candidates": n_candidates,
                                          "sampled_cap": sampled_cap})
    print(f"wrote top-{len(order)} of {n_candidates} candidates "
          f"-> {out / 'predictions.csv'}" +
          (f" (sampled from {total})" if sampled_cap else ""))
    return EXIT_OK


def cmd_synth(args) -> int:
    seed = args.seed if args.seed is not None else 42
    scfg = SynthConfig(
        companies=args.companies, products=args.products,
        capabilities=args.capabilities, certifications=args.certifications,
        countries=args.countries, attachment_edges=args.attachment_edges,
        capability_mean=args.capability_mean, products_mean=args.products_mean,
        cert_rate=args.cert_rate, assortativity=args.assortativity,
        holdout_fraction=args.holdout_fraction, seed=seed,
    )
    out = _outdir(args)
    fp = fingerprint_payload(asdict(scfg))
    synth = generate(scfg)
    save_graph(synth.graph, out / "graph.tsv")
    write_truth_csv(synth, out / "truth.csv", fp)
    if scfg.holdout_fraction > 0:
        rng = np.random.default_rng(np.random.SeedSequence((seed, 4)))
        visible, held = holdout(synth, scfg.holdout_fraction, rng)
        save_graph(visible, out / "visible.tsv")
        with open(out / "heldout.csv", "w", encoding="utf-8", newline="") as fh:
            fh.write(f"# config_fingerprint={fp}\n")
            fh.write("source_id,relation,dest_id\n")
            for t in held:
                fh.write(f"{t.source},{t.relation.value},{t.dest}\n")
    with open(out / "run_meta.json", "w", encoding="utf-8") as fh:
        json.dump({"command": "synth", "config_fingerprint": fp,
                   "config": asdict(scfg)}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"generated synthetic graph (assortativity={scfg.assortativity}) "
          f"-> {out / 'graph.tsv'}")
    _print_counts(synth.graph)
    return EXIT_OK


# -- wiring -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="supplykg",
        description="Supply-chain knowledge graph construction, derivation, "
                    "and link prediction.")
    parser.add_argument("--config", help="run config JSON")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", default="out", help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="convert a company CSV into a graph file")
    p.add_argument("--input", required=True, help="company table CSV")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("derive", help="add co-occurrence and projection relations")
    p.add_argument("--graph", required=True)
    p.add_argument("--cap-threshold", type=int,
                   help="capability co-occurrence weight threshold")
    p.add_argument("--proj-threshold", type=int,
                   help="product projection weight threshold")
    p.add_argument("--bin-width", type=int, default=1, help="histogram bin width")
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("split", help="stratified 70/20/10 triplet split")
    p.add_argument("--graph", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train encoder+decoder on a split")
    p.add_argument("--graph", required=True)
    p.add_argument("--manifest", required=True, help="split manifest CSV")
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", type=float)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="per-relation AUC report with baselines")
    p.add_argument("--graph", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="grid search by validation AUC")
    p.add_argument("--graph", required=True, help="base graph (underived)")
    p.add_argument("--grid", required=True,
                   help="JSON mapping dotted config keys to value lists")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("predict", help="rank unseen candidate triplets")
    p.add_argument("--graph", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--relation", required=True)
    p.add_argument("--top-k", type=int, default=100)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("synth", help="generate a planted synthetic graph")
    p.add_argument("--companies", type=int, default=200)
    p.add_argument("--products", type=int, default=600)
    p.add_argument("--capabilities", type=int, default=12)
    p.add_argument("--certifications", type=int, default=5)
    p.add_argument("--countries", type=int, default=20)
    p.add_argument("--attachment-edges", type=int, default=4,
                   help="suppliers attached per new company")
    p.add_argument("--capability-mean", type=float, default=1.0)
    p.add_argument("--products-mean", type=float, default=6.0)
    p.add_argument("--cert-rate", type=float, default=0.3)
    p.add_argument("--assortativity", type=float, default=0.9,
                   help="probability a buys_from edge is rewired toward a "
                        "portfolio-compatible supplier")
    p.add_argument("--holdout-fraction", type=float, default=0.0)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except CompatibilityError as exc:
        print(f"incompatible inputs: {exc}", file=sys.stderr)
        return EXIT_COMPAT
    except SupplyKGError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
