"""Relational GraphSAGE encoder with a DistMult decoder.

Every node carries a learnable embedding row (no input features). Layer k
updates a node u as

    h_k(u) = act( W_self_k h_{k-1}(u)
                  + sum over (relation, direction) of
                    W_{rel,dir,k} mean{ h_{k-1}(v) : v sampled from N_{rel,dir}(u) } )

with ReLU on all layers except the last, and the mean term omitted for empty
neighbor sets. A triplet (u, rel, v) is scored bilinearly with a diagonal
relation matrix, sum_i h_u[i] r_rel[i] h_v[i], squashed through a logistic
sigmoid, and trained with mean binary cross-entropy against 0/1 labels.

Gradients are exact reverse-mode, computed from the ForwardTrace recorded
during the forward pass; everything runs in float64 numpy.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import CompatibilityError, InputError
from .graph import KnowledgeGraph
from .ontology import RELATIONS, Relation
from .sampling import DIRECTIONS, MiniBatchBlock, sample_block

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "supplykg.checkpoint"
CHECKPOINT_VERSION = 1
_NORM_FLOOR = 1e-30


class ModelParams:
    """All learnable tensors, addressable by name for optimization.

    embeddings: (n_entities, d); self_weights[k-1]: (d, d); per layer the
    neighbor weights map (relation, direction) -> (d, d); rel_vectors maps
    relation -> (d,), the diagonal of the bilinear scorer.
    """

    def __init__(self, embeddings, self_weights, neigh_weights, rel_vectors,
                 unit_norm: bool = False):
        self.embeddings = embeddings
        self.self_weights = self_weights
        self.neigh_weights = neigh_weights
        self.rel_vectors = rel_vectors
        self.unit_norm = unit_norm

    @property
    def d(self) -> int:
        return self.embeddings.shape[1]

    @property
    def depth(self) -> int:
        return len(self.self_weights)

    @property
    def n_entities(self) -> int:
        return self.embeddings.shape[0]

    def tensors(self) -> dict[str, np.ndarray]:
        """Live views of every tensor, in a stable order."""
        out = {"X": self.embeddings}
        for k, w in enumerate(self.self_weights, start=1):
            out[f"W_self.k{k}"] = w
        for k, layer in enumerate(self.neigh_weights, start=1):
            for rel in RELATIONS:
                for direction in DIRECTIONS:
                    out[f"W.{rel.value}.{direction}.k{k}"] = layer[(rel, direction)]
        for rel in RELATIONS:
            out[f"r.{rel.value}"] = self.rel_vectors[rel]
        return out

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.embeddings.copy(),
            [w.copy() for w in self.self_weights],
            [{k: v.copy() for k, v in layer.items()} for layer in self.neigh_weights],
            {r: v.copy() for r, v in self.rel_vectors.items()},
            self.unit_norm,
        )


def init_params(graph: KnowledgeGraph, d: int, depth: int, seed: int,
                unit_norm: bool = False) -> ModelParams:
    """Seeded initialization: embeddings uniform in +-sqrt(6/d), weight
    matrices uniform in +-sqrt(6/(fan_in+fan_out)), relation diagonals all-ones."""
    if d < 1 or depth < 1:
        raise InputError("d and depth must be >= 1")
    rng = np.random.default_rng(seed)
    bound_x = np.sqrt(6.0 / d)
    embeddings = rng.uniform(-bound_x, bound_x, size=(graph.num_entities, d))
    bound_w = np.sqrt(6.0 / (d + d))
    self_weights = []
    neigh_weights = []
    for _ in range(depth):
        self_weights.append(rng.uniform(-bound_w, bound_w, size=(d, d)))
        layer = {}
        for rel in RELATIONS:
            for direction in DIRECTIONS:
                layer[(rel, direction)] = rng.uniform(-bound_w, bound_w, size=(d, d))
        neigh_weights.append(layer)
    rel_vectors = {rel: np.ones(d) for rel in RELATIONS}
    return ModelParams(embeddings, self_weights, neigh_weights, rel_vectors, unit_norm)


def zero_grads(params: ModelParams) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(t) for name, t in params.tensors().items()}


# -- forward ---------------------------------------------------------------


@dataclass
class AggTrace:
    dst: np.ndarray      # edge index into the layer's node list
    src: np.ndarray      # edge index into the previous frontier
    counts: np.ndarray   # (n_k,) sampled in-neighborhood sizes
    means: np.ndarray    # (n_k, d) mean of neighbor inputs, zero rows when empty


@dataclass
class LayerTrace:
    nodes: tuple[int, ...]
    self_idx: np.ndarray
    h_prev: np.ndarray
    pre_act: np.ndarray
    aggs: dict[tuple[Relation, str], AggTrace]


@dataclass
class ForwardTrace:
    """Everything backward() needs: per-layer activations plus scoring state."""
    block: MiniBatchBlock
    layers: list[LayerTrace]
    h_final: np.ndarray
    norms: np.ndarray | None = None      # pre-normalization norms when unit_norm
    h_raw: np.ndarray | None = None
    u_idx: np.ndarray | None = None
    v_idx: np.ndarray | None = None
    rel_index: np.ndarray | None = None  # index into RELATIONS per scored triplet
    scores: np.ndarray | None = None
    probs: np.ndarray | None = None
    labels: np.ndarray | None = None


def encode(block: MiniBatchBlock, params: ModelParams) -> tuple[np.ndarray, ForwardTrace]:
    """Final-layer embeddings for the block's seed nodes, plus the trace."""
    if block.depth != params.depth:
        raise InputError(f"block depth {block.depth} != model depth {params.depth}")
    frontiers = block.frontiers
    pos = [{u: i for i, u in enumerate(fr)} for fr in frontiers]
    h = params.embeddings[np.asarray(frontiers[0], dtype=np.int64)]
    layers: list[LayerTrace] = []
    for k in range(1, block.depth + 1):
        nodes = frontiers[k]
        prev_pos = pos[k - 1]
        self_idx = np.asarray([prev_pos[u] for u in nodes], dtype=np.int64)
        pre = h[self_idx] @ params.self_weights[k - 1].T
        aggs: dict[tuple[Relation, str], AggTrace] = {}
        pos_k = pos[k]
        for key, per_node in block.samples[k - 1].items():
            m = sum(len(v) for v in per_node.values())
            dst = np.empty(m, dtype=np.int64)
            src = np.empty(m, dtype=np.int64)
            counts = np.zeros(len(nodes))
            i = 0
            for u, neighbors in per_node.items():
                a = pos_k[u]
                counts[a] = len(neighbors)
                for v in neighbors:
                    dst[i] = a
                    src[i] = prev_pos[v]
                    i += 1
            means = np.zeros((len(nodes), params.d))
            np.add.at(means, dst, h[src])
            nz = counts > 0
            means[nz] /= counts[nz, None]
            pre += means @ params.neigh_weights[k - 1][key].T
            aggs[key] = AggTrace(dst, src, counts, means)
        layers.append(LayerTrace(nodes, self_idx, h, pre, aggs))
        h = np.maximum(pre, 0.0) if k < block.depth else pre
    trace = ForwardTrace(block=block, layers=layers, h_final=h)
    if params.unit_norm:
        norms = np.maximum(np.linalg.norm(h, axis=1), _NORM_FLOOR)
        trace.h_raw = h
        trace.norms = norms
        trace.h_final = h / norms[:, None]
    return trace.h_final, trace


def score(h_u: np.ndarray, r_vec: np.ndarray, h_v: np.ndarray) -> float:
    """Bilinear diagonal score sum_i h_u[i] * r[i] * h_v[i].

    Computed as (h_u ⊙ h_v) · r so swapping u and v is bit-exact symmetric.
    """
    if not (h_u.shape == r_vec.shape == h_v.shape):
        raise InputError(f"dimension mismatch: {h_u.shape}, {r_vec.shape}, {h_v.shape}")
    return float(np.dot(h_u * h_v, r_vec))


def predict_prob(raw_score):
    """Numerically stable logistic sigmoid; safe for |score| up to 1e3 and beyond."""
    s = np.asarray(raw_score, dtype=float)
    out = np.empty_like(s)
    pos = s >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-s[pos]))
    es = np.exp(s[~pos])
    out[~pos] = es / (1.0 + es)
    return float(out) if out.ndim == 0 else out


def loss(probs, labels, clamp: float = 1e-12) -> float:
    """Mean binary cross-entropy with probabilities clamped to [clamp, 1-clamp]."""
    p = np.clip(np.asarray(probs, dtype=float), clamp, 1.0 - clamp)
    y = np.asarray(labels, dtype=float)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


def forward_batch(block: MiniBatchBlock, params: ModelParams,
                  labels: np.ndarray | None = None) -> tuple[float, ForwardTrace]:
    """Encode the block, score its positives+negatives, return (loss, trace)."""
    triplets = block.scored_triplets()
    if not triplets:
        raise InputError("block carries no triplets to score")
    y = block.labels() if labels is None else np.asarray(labels, dtype=float)
    h, trace = encode(block, params)
    seed_pos = {u: i for i, u in enumerate(block.frontiers[block.depth])}
    u_idx = np.asarray([seed_pos[t.source] for t in triplets], dtype=np.int64)
    v_idx = np.asarray([seed_pos[t.dest] for t in triplets], dtype=np.int64)
    rel_index = np.asarray([RELATIONS.index(t.relation) for t in triplets], dtype=np.int64)
    r_mat = np.stack([params.rel_vectors[t.relation] for t in triplets])
    scores = ((h[u_idx] * h[v_idx]) * r_mat).sum(axis=1)
    probs = predict_prob(scores)
    trace.u_idx, trace.v_idx, trace.rel_index = u_idx, v_idx, rel_index
    trace.scores, trace.probs, trace.labels = scores, probs, y
    return loss(probs, y), trace


def backward(trace: ForwardTrace, params: ModelParams,
             labels: np.ndarray | None = None) -> dict[str, np.ndarray]:
    """Exact gradients of the mean BCE loss for every parameter tensor.

    Tensors unreachable from the block receive zero gradient (including
    untouched embedding rows).
    """
    if trace.scores is None:
        raise InputError("trace has no scoring state; use forward_batch")
    y = trace.labels if labels is None else np.asarray(labels, dtype=float)
    grads = zero_grads(params)
    n = len(trace.scores)
    dscore = (trace.probs - y) / n

    h = trace.h_final
    d_h = np.zeros_like(h)
    for rel_i in np.unique(trace.rel_index):
        rel = RELATIONS[rel_i]
        m = trace.rel_index == rel_i
        hu, hv = h[trace.u_idx[m]], h[trace.v_idx[m]]
        dsc = dscore[m][:, None]
        grads[f"r.{rel.value}"] += (dsc * hu * hv).sum(axis=0)
        r_vec = params.rel_vectors[rel][None, :]
        np.add.at(d_h, trace.u_idx[m], dsc * r_vec * hv)
        np.add.at(d_h, trace.v_idx[m], dsc * r_vec * hu)

    if params.unit_norm:
        # h_final = h_raw / ||h_raw||; project out the radial component
        inner = (trace.h_final * d_h).sum(axis=1, keepdims=True)
        d_h = (d_h - trace.h_final * inner) / trace.norms[:, None]

    for k in range(params.depth, 0, -1):
        tr = trace.layers[k - 1]
        d_pre = d_h if k == params.depth else d_h * (tr.pre_act > 0)
        grads[f"W_self.k{k}"] += d_pre.T @ tr.h_prev[tr.self_idx]
        d_prev = np.zeros_like(tr.h_prev)
        np.add.at(d_prev, tr.self_idx, d_pre @ params.self_weights[k - 1])
        for (rel, direction), agg in tr.aggs.items():
            w = params.neigh_weights[k - 1][(rel, direction)]
            grads[f"W.{rel.value}.{direction}.k{k}"] += d_pre.T @ agg.means
            d_mean = d_pre @ w
            np.add.at(d_prev, agg.src, d_mean[agg.dst] / agg.counts[agg.dst][:, None])
        d_h = d_prev

    np.add.at(grads["X"], np.asarray(trace.block.frontiers[0], dtype=np.int64), d_h)
    return grads


# -- optimizer ---------------------------------------------------------------


@dataclass
class OptimizerState:
    """Adaptive-moment state; accumulator shapes mirror the parameter tensors."""
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)


def init_optimizer(params: ModelParams, learning_rate: float = 1e-3,
                   beta1: float = 0.9, beta2: float = 0.999,
                   epsilon: float = 1e-8) -> OptimizerState:
    state = OptimizerState(learning_rate, beta1, beta2, epsilon)
    for name, t in params.tensors().items():
        state.first_moment[name] = np.zeros_like(t)
        state.second_moment[name] = np.zeros_like(t)
    return state


def optimizer_step(params: ModelParams, grads: dict[str, np.ndarray],
                   state: OptimizerState) -> bool:
    """One bias-corrected adaptive-moment update, in place.

    A non-finite gradient skips the whole step (returns False) with a warning.
    """
    tensors = params.tensors()
    for name in tensors:
        if not np.all(np.isfinite(grads[name])):
            logger.warning("non-finite gradient in %s; skipping optimizer step", name)
            return False
    state.step += 1
    c1 = 1.0 - state.beta1 ** state.step
    c2 = 1.0 - state.beta2 ** state.step
    for name, t in tensors.items():
        g = grads[name]
        m = state.first_moment[name]
        v = state.second_moment[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        t -= state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.epsilon)
    return True


# -- inference helpers -------------------------------------------------------


def node_embeddings(graph: KnowledgeGraph, params: ModelParams, fanout: int,
                    rng: np.random.Generator, chunk_size: int = 1024) -> np.ndarray:
    """Final-layer embeddings for every entity, computed in seeded chunks."""
    if graph.num_entities != params.n_entities:
        raise CompatibilityError(
            f"graph has {graph.num_entities} entities, params expect {params.n_entities}")
    out = np.zeros((graph.num_entities, params.d))
    ids = list(range(graph.num_entities))
    for start in range(0, len(ids), chunk_size):
        seeds = ids[start:start + chunk_size]
        block = sample_block(graph, seeds, fanout, params.depth, rng)
        h, _ = encode(block, params)
        out[seeds] = h
    return out


def score_pairs(embeddings: np.ndarray, r_vec: np.ndarray,
                pairs: np.ndarray) -> np.ndarray:
    """DistMult scores for an (n, 2) array of (source id, dest id) rows."""
    hu = embeddings[pairs[:, 0]]
    hv = embeddings[pairs[:, 1]]
    return (hu * hv) @ r_vec


# -- persistence --------------------------------------------------------------


def save_checkpoint(params: ModelParams, state: OptimizerState | None, path) -> None:
    """Versioned binary container: JSON header line + little-endian float64 blobs."""
    tensors = params.tensors()
    names = list(tensors)
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "d": params.d,
        "K": params.depth,
        "n_entities": params.n_entities,
        "relations": [r.value for r in RELATIONS],
        "unit_norm": params.unit_norm,
        "tensors": [{"name": n, "shape": list(tensors[n].shape)} for n in names],
        "optimizer": None if state is None else {
            "learning_rate": state.learning_rate,
            "beta1": state.beta1,
            "beta2": state.beta2,
            "epsilon": state.epsilon,
            "step": state.step,
        },
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for n in names:
            fh.write(np.ascontiguousarray(tensors[n], dtype="<f8").tobytes())
        if state is not None:
            for n in names:
                fh.write(np.ascontiguousarray(state.first_moment[n], dtype="<f8").tobytes())
            for n in names:
                fh.write(np.ascontiguousarray(state.second_moment[n], dtype="<f8").tobytes())


def load_checkpoint(path, graph: KnowledgeGraph | None = None,
                    expect_d: int | None = None,
                    expect_depth: int | None = None) -> tuple[ModelParams, OptimizerState | None]:
    """Load and validate a checkpoint; mismatches raise CompatibilityError
    before any scoring can happen."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        blob = fh.read()
    try:
        header = json.loads(header_line)
    except ValueError:
        raise CompatibilityError(f"{path}: not a checkpoint (bad header)") from None
    if header.get("format") != CHECKPOINT_FORMAT:
        raise CompatibilityError(f"{path}: unknown format {header.get('format')!r}")
    if header.get("version") != CHECKPOINT_VERSION:
        raise CompatibilityError(f"{path}: unsupported version {header.get('version')}")
    if header["relations"] != [r.value for r in RELATIONS]:
        raise CompatibilityError(f"{path}: relation set does not match the ontology")
    if graph is not None and header["n_entities"] != graph.num_entities:
        raise CompatibilityError(
            f"{path}: checkpoint built for {header['n_entities']} entities, "
            f"graph has {graph.num_entities}")
    if expect_d is not None and header["d"] != expect_d:
        raise CompatibilityError(f"{path}: checkpoint d={header['d']}, config wants d={expect_d}")
    if expect_depth is not None and header["K"] != expect_depth:
        raise CompatibilityError(f"{path}: checkpoint K={header['K']}, config wants K={expect_depth}")

    offset = 0
    loaded: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape)) * 8
        if offset + size > len(blob):
            raise CompatibilityError(f"{path}: truncated tensor data at {entry['name']}")
        loaded[entry["name"]] = np.frombuffer(
            blob, dtype="<f8", count=int(np.prod(shape)), offset=offset
        ).astype(np.float64).reshape(shape)
        offset += size

    d, depth = header["d"], header["K"]
    try:
        embeddings = loaded["X"]
        self_weights = [loaded[f"W_self.k{k}"] for k in range(1, depth + 1)]
        neigh_weights = []
        for k in range(1, depth + 1):
            layer = {}
            for rel in RELATIONS:
                for direction in DIRECTIONS:
                    layer[(rel, direction)] = loaded[f"W.{rel.value}.{direction}.k{k}"]
            neigh_weights.append(layer)
        rel_vectors = {rel: loaded[f"r.{rel.value}"] for rel in RELATIONS}
    except KeyError as exc:
        raise CompatibilityError(f"{path}: missing tensor {exc}") from None
    params = ModelParams(embeddings, self_weights, neigh_weights, rel_vectors,
                         header.get("unit_norm", False))
    if params.d != d:
        raise CompatibilityError(f"{path}: tensor width {params.d} != header d={d}")

    state = None
    if header["optimizer"] is not None:
        opt = header["optimizer"]
        state = OptimizerState(opt["learning_rate"], opt["beta1"], opt["beta2"],
                               opt["epsilon"], opt["step"])
        names = [e["name"] for e in header["tensors"]]
        shapes = {e["name"]: tuple(e["shape"]) for e in header["tensors"]}
        for moment in (state.first_moment, state.second_moment):
            for n in names:
                size = int(np.prod(shapes[n])) * 8
                if offset + size > len(blob):
                    raise CompatibilityError(f"{path}: truncated optimizer data")
                moment[n] = np.frombuffer(
                    blob, dtype="<f8", count=int(np.prod(shapes[n])), offset=offset
                ).astype(np.float64).reshape(shapes[n])
                offset += size
    return params, state
