"""supplykg: heterogeneous supply-chain knowledge graphs and link prediction.

Builds a typed graph from tabular company data, derives missing relation
types via co-occurrence counting and bipartite projection, trains a
relational neighbor-sampling encoder with a bilinear diagonal decoder, and
reports per-relation AUC against classical heuristic baselines.
"""

from .derive import (DeriveConfig, WeightedPair, bipartite_projection,
                     cooccurrence_weights, derive_relations, threshold_edges,
                     weight_histogram)
from .errors import (CompatibilityError, InputError, NumericalError, SupplyKGError)
from .evaluate import EvalReport, auc, emit_report, evaluate
from .graph import (Entity, KnowledgeGraph, Triplet, load_graph, save_graph)
from .heuristics import HEURISTICS, heuristic_scores
from .ingest import CompanyRecord, emit_base_triplets, parse_company_table
from .model import (ModelParams, OptimizerState, backward, encode, forward_batch,
                    init_optimizer, init_params, load_checkpoint, loss,
                    node_embeddings, optimizer_step, predict_prob, save_checkpoint,
                    score)
from .ontology import (ENTITY_TYPES, RELATIONS, SCHEMA, EntityType, OntologyError,
                       Relation, check_conformance, conforms)
from .sampling import (MiniBatchBlock, NegativeSample, SplitSpec, TripletSplit,
                       batch_iterator, corrupt, sample_block, split_triplets)
from .synth import SynthConfig, SynthGraph, generate, holdout
from .train import TrainResult, train_model

__version__ = "0.1.0"

__all__ = [
    "CompanyRecord", "CompatibilityError", "DeriveConfig", "ENTITY_TYPES",
    "Entity", "EntityType", "EvalReport", "HEURISTICS", "InputError",
    "KnowledgeGraph", "MiniBatchBlock", "ModelParams", "NegativeSample",
    "NumericalError", "OntologyError", "OptimizerState", "RELATIONS",
    "Relation", "SCHEMA", "SplitSpec", "SupplyKGError", "SynthConfig",
    "SynthGraph", "TrainResult", "Triplet", "TripletSplit", "WeightedPair",
    "auc", "backward", "batch_iterator", "bipartite_projection",
    "check_conformance", "conforms", "cooccurrence_weights", "corrupt",
    "derive_relations", "emit_base_triplets", "emit_report", "encode",
    "evaluate", "forward_batch", "generate", "heuristic_scores", "holdout",
    "init_optimizer", "init_params", "load_checkpoint", "load_graph", "loss",
    "node_embeddings", "optimizer_step", "parse_company_table", "predict_prob",
    "sample_block", "save_checkpoint", "save_graph", "score", "split_triplets",
    "threshold_edges", "train_model", "weight_histogram",
]
