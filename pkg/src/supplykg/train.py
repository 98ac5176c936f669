"""Fixed-epoch training loop with per-epoch validation AUC and best-model tracking."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .config import ModelConfig, TrainConfig
from .errors import NumericalError
from .evaluate import auc, sample_eval_pairs
from .graph import KnowledgeGraph
from .model import (ModelParams, OptimizerState, backward, forward_batch,
                    init_optimizer, init_params, node_embeddings, optimizer_step,
                    score_pairs)
from .ontology import Relation
from .sampling import TripletSplit, batch_iterator

logger = logging.getLogger(__name__)


@dataclass
class LossLogRow:
    step: int
    epoch: int
    loss: float
    val_auc: float | None = None


@dataclass
class TrainResult:
    params: ModelParams
    opt_state: OptimizerState
    best_params: ModelParams
    best_val_auc: float
    history: list[LossLogRow] = field(default_factory=list)


def validation_auc(params: ModelParams, message_graph: KnowledgeGraph,
                   full_graph: KnowledgeGraph, split: TripletSplit,
                   relation: Relation, fanout: int, seed: int) -> float | None:
    """AUC on the validation positives of one relation, 1:1 endpoint-swap
    negatives, messages restricted to training triplets."""
    positives = [t for t in split.validation if t.relation is relation]
    if not positives:
        return None
    rng = np.random.default_rng(np.random.SeedSequence((seed, 2)))
    pos_pairs, neg_pairs = sample_eval_pairs(positives, full_graph, rng)
    if not pos_pairs:
        return None
    emb = node_embeddings(message_graph, params, fanout, rng)
    pairs = np.asarray(pos_pairs + neg_pairs, dtype=np.int64)
    labels = np.r_[np.ones(len(pos_pairs)), np.zeros(len(neg_pairs))]
    return auc(score_pairs(emb, params.rel_vectors[relation], pairs), labels)


def train_model(full_graph: KnowledgeGraph, split: TripletSplit,
                model_cfg: ModelConfig, train_cfg: TrainConfig,
                seed: int) -> TrainResult:
    """Train on the split's training positives.

    The encoder's message graph contains only training triplets; negatives
    are filtered against the full fact graph. Identical
    (graph, config, seed) reruns produce identical histories.
    """
    message_graph = full_graph.subgraph(split.train)
    params = init_params(full_graph, model_cfg.d, model_cfg.depth, seed,
                         model_cfg.unit_norm)
    state = init_optimizer(params, learning_rate=train_cfg.learning_rate)
    target = Relation(train_cfg.target_relation)

    result = TrainResult(params, state, params.copy(), -math.inf)
    step = 0
    for epoch in range(train_cfg.epochs):
        rng = np.random.default_rng(np.random.SeedSequence((seed, 1, epoch)))
        epoch_rows: list[LossLogRow] = []
        for block in batch_iterator(split, message_graph, full_graph,
                                    train_cfg.batch_size,
                                    train_cfg.negatives_per_positive, rng,
                                    fanout=model_cfg.fanout,
                                    depth=model_cfg.depth,
                                    mode=train_cfg.corruption_mode):
            batch_loss, trace = forward_batch(block, params)
            if not math.isfinite(batch_loss):
                raise NumericalError(
                    f"non-finite loss {batch_loss} at step {step} (epoch {epoch})")
            grads = backward(trace, params)
            optimizer_step(params, grads, state)
            step += 1
            epoch_rows.append(LossLogRow(step, epoch, batch_loss))
        val = validation_auc(params, message_graph, full_graph, split, target,
                             model_cfg.fanout, seed)
        if epoch_rows and val is not None:
            epoch_rows[-1].val_auc = val
        result.history.extend(epoch_rows)
        if val is not None and val > result.best_val_auc:
            result.best_val_auc = val
            result.best_params = params.copy()
        logger.info("epoch %d: %d steps, last loss %.4f, val %s=%s",
                    epoch, len(epoch_rows),
                    epoch_rows[-1].loss if epoch_rows else float("nan"),
                    target.value, f"{val:.4f}" if val is not None else "n/a")
    if result.best_val_auc == -math.inf:
        result.best_params = params.copy()
    return result


def write_loss_log(history: list[LossLogRow], path, fingerprint: str | None = None) -> None:
    """Loss log CSV: step,epoch,loss,val_auc (val_auc filled on epoch-final steps)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if fingerprint:
            fh.write(f"# config_fingerprint={fingerprint}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["step", "epoch", "loss", "val_auc"])
        for row in history:
            val = f"{row.val_auc:.6f}" if row.val_auc is not None else ""
            writer.writerow([row.step, row.epoch, f"{row.loss:.10f}", val])
