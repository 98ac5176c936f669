"""Exact AUC, per-relation evaluation reports, and baseline comparisons.

Evaluation scores every positive of each relation and split against one
filtered, type-correct negative (endpoint swap, side chosen uniformly, no
relation resampling) and reports the rank-statistic AUC. Encoder messages
come only from training triplets, so held-out edges never leak into the
neighborhoods that score them.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .graph import KnowledgeGraph
from .heuristics import HEURISTICS, scores_from_adjacency, undirected_adjacency
from .model import ModelParams, node_embeddings, score_pairs
from .ontology import RELATIONS, Relation, relation_from_tag
from .sampling import ExhaustedNegativesError, TripletSplit, corrupt

#: AUC reported for the homogeneous buys_from predictor this work is compared against.
SNLP_REFERENCE_AUC = 0.76

SPLIT_NAMES = ("train", "val", "test")


def auc(scores, labels) -> float:
    """Exact AUC as a rank statistic: the fraction of (positive, negative)
    pairs ranked correctly, ties counted 0.5. O(n log n) via midranks."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise InputError("scores and labels must be 1-d and the same length")
    if not np.all(np.isfinite(s)):
        raise InputError("scores must be finite")
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        raise InputError("AUC needs at least one positive and one negative")
    order = np.argsort(s, kind="mergesort")
    s_sorted = s[order]
    bounds = np.flatnonzero(np.r_[True, s_sorted[1:] != s_sorted[:-1], True])
    starts, ends = bounds[:-1], bounds[1:]
    midranks_sorted = np.repeat((starts + ends + 1) / 2.0, ends - starts)
    ranks = np.empty_like(midranks_sorted)
    ranks[order] = midranks_sorted
    rank_sum = ranks[y == 1].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


@dataclass
class EvalRow:
    relation: str
    split: str
    auc: float
    n_pos: int
    n_neg: int


@dataclass
class BaselineRow:
    heuristic: str
    split: str
    auc: float
    n_pos: int
    n_neg: int


@dataclass
class EvalReport:
    rows: list[EvalRow] = field(default_factory=list)
    baselines: list[BaselineRow] = field(default_factory=list)
    fingerprint: str = ""

    def lookup(self, relation: str, split: str) -> EvalRow | None:
        for row in self.rows:
            if row.relation == relation and row.split == split:
                return row
        return None

    def to_dict(self) -> dict:
        return {
            "fingerprint": self.fingerprint,
            "snlp_reference_auc": SNLP_REFERENCE_AUC,
            "rows": [vars(r) for r in self.rows],
            "baselines": [vars(b) for b in self.baselines],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        report = cls(fingerprint=d.get("fingerprint", ""))
        report.rows = [EvalRow(**r) for r in d["rows"]]
        report.baselines = [BaselineRow(**b) for b in d["baselines"]]
        return report


def sample_eval_pairs(positives, full_graph, rng):
    """One endpoint-swap negative per positive; exhausted positives dropped."""
    kept, neg_pairs = [], []
    for t in positives:
        mode = "source-swap" if rng.integers(2) == 0 else "destination-swap"
        try:
            neg = corrupt(t, full_graph, rng, mode)
        except ExhaustedNegativesError:
            continue
        kept.append((t.source, t.dest))
        neg_pairs.append((neg.triplet.source, neg.triplet.dest))
    return kept, neg_pairs


def evaluate(params: ModelParams, graph: KnowledgeGraph, split: TripletSplit,
             fanout: int, seed: int, fingerprint: str = "",
             with_baselines: bool = True) -> EvalReport:
    """Per-relation AUC for train/val/test plus buys_from heuristic baselines.

    ``graph`` is the full fact graph (used to filter negatives); encoder
    messages are restricted to the split's training triplets. Relations with
    no positives in a split are absent from the report, not reported as zero.
    """
    message_graph = graph.subgraph(split.train)
    emb_rng = np.random.default_rng(np.random.SeedSequence((seed, 0)))
    emb = node_embeddings(message_graph, params, fanout, emb_rng)

    report = EvalReport(fingerprint=fingerprint)
    baseline_adj = undirected_adjacency(message_graph) if with_baselines else None
    parts = split.parts()
    for rel_i, rel in enumerate(RELATIONS):
        for split_i, split_name in enumerate(SPLIT_NAMES):
            positives = [t for t in parts[split_name] if t.relation is rel]
            if not positives:
                continue
            rng = np.random.default_rng(np.random.SeedSequence((seed, 1, rel_i, split_i)))
            pos_pairs, neg_pairs = sample_eval_pairs(positives, graph, rng)
            if not pos_pairs or not neg_pairs:
                continue
            pairs = np.asarray(pos_pairs + neg_pairs, dtype=np.int64)
            labels = np.r_[np.ones(len(pos_pairs)), np.zeros(len(neg_pairs))]
            scores = score_pairs(emb, params.rel_vectors[rel], pairs)
            report.rows.append(EvalRow(rel.value, split_name,
                                       auc(scores, labels),
                                       len(pos_pairs), len(neg_pairs)))
            if with_baselines and rel is Relation.BUYS_FROM:
                for heuristic in HEURISTICS:
                    h_scores = scores_from_adjacency(baseline_adj, pairs, heuristic)
                    report.baselines.append(BaselineRow(
                        heuristic, split_name, auc(h_scores, labels),
                        len(pos_pairs), len(neg_pairs)))
    return report


# -- report emission ----------------------------------------------------------


def emit_report(report: EvalReport, path, fmt: str) -> None:
    """Write the report as csv, markdown, or json (deterministic ordering)."""
    if fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            if report.fingerprint:
                fh.write(f"# config_fingerprint={report.fingerprint}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["relation", "split", "auc", "n_pos", "n_neg"])
            for row in report.rows:
                writer.writerow([row.relation, row.split, f"{row.auc:.6f}",
                                 row.n_pos, row.n_neg])
    elif fmt == "json":
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    elif fmt == "markdown":
        _emit_markdown(report, path)
    else:
        raise InputError(f"unknown report format {fmt!r}")


def emit_baselines_csv(report: EvalReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if report.fingerprint:
            fh.write(f"# config_fingerprint={report.fingerprint}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["heuristic", "split", "auc", "n_pos", "n_neg"])
        for row in report.baselines:
            writer.writerow([row.heuristic, row.split, f"{row.auc:.6f}",
                             row.n_pos, row.n_neg])


def _fmt_cell(row: EvalRow | BaselineRow | None) -> str:
    return f"{row.auc:.3f}" if row is not None else "-"


def _emit_markdown(report: EvalReport, path) -> None:
    lines = []
    if report.fingerprint:
        lines.append(f"<!-- config_fingerprint={report.fingerprint} -->")
    lines.append("| Relation Type | Train | Validation | Test |")
    lines.append("|---|---|---|---|")
    for rel in RELATIONS:
        cells = [_fmt_cell(report.lookup(rel.value, s)) for s in SPLIT_NAMES]
        if all(c == "-" for c in cells):
            continue
        lines.append(f"| {rel.value} | {cells[0]} | {cells[1]} | {cells[2]} |")
    if report.baselines:
        lines.append("")
        lines.append("### Baselines (buys_from, undirected train graph)")
        lines.append("")
        lines.append("| Heuristic | Train | Validation | Test |")
        lines.append("|---|---|---|---|")
        for heuristic in HEURISTICS:
            cells = []
            for s in SPLIT_NAMES:
                match = [b for b in report.baselines
                         if b.heuristic == heuristic and b.split == s]
                cells.append(f"{match[0].auc:.3f}" if match else "-")
            lines.append(f"| {heuristic} | {cells[0]} | {cells[1]} | {cells[2]} |")
        lines.append(f"| SNLP (reported reference) | - | - | {SNLP_REFERENCE_AUC:.2f} |")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_report_json(path) -> EvalReport:
    with open(path, "r", encoding="utf-8") as fh:
        return EvalReport.from_dict(json.load(fh))


def load_report_csv(path) -> EvalReport:
    report = EvalReport()
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(rows)
    header = next(reader, None)
    if header != ["relation", "split", "auc", "n_pos", "n_neg"]:
        raise InputError(f"{path}: bad report header {header!r}")
    for row in reader:
        if not row:
            continue
        relation_from_tag(row[0])  # validate the tag
        report.rows.append(EvalRow(row[0], row[1], float(row[2]),
                                   int(row[3]), int(row[4])))
    return report
