"""Evidential graph autoencoder for unsupervised node anomaly detection.

The model encodes an attributed graph with a GCN, reconstructs node
features as Normal-Inverse-Gamma distributions and node pairs as Beta
distributions, and scores anomalies by combining reconstruction errors
with the uncertainties those distributions expose.

Typical use::

    from gel import synthesize_graph, train, TrainConfig, anomaly_scores, auc

    graph, _ = synthesize_graph(200, 8, 5, 2, 10, seed=0)
    state, history = train(graph, TrainConfig(epochs=200, seed=0))
    report = anomaly_scores(state, graph)
    print(auc(report.scores, graph.labels))
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .errors import (
    ContractError,
    DimensionError,
    DomainError,
    GelError,
    MetricError,
    NumericalAbort,
    ParseError,
)
from .graphdata import (
    AttributedGraph,
    PerturbationConfig,
    load_graph,
    normalize_adjacency,
    normalized_adjacency,
    perturb,
    save_graph,
    synthesize_graph,
)
from .losses import LossWeights
from .modelio import load_checkpoint, save_checkpoint
from .scoring import (
    AnomalyReport,
    ScoreWeights,
    anomaly_scores,
    auc,
    default_k,
    recall_at_k,
)
from .training import ModelState, TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "AnomalyReport",
    "AttributedGraph",
    "ContractError",
    "DimensionError",
    "DomainError",
    "GelError",
    "KERNEL_BACKEND",
    "LossWeights",
    "MetricError",
    "ModelState",
    "NumericalAbort",
    "ParseError",
    "PerturbationConfig",
    "ScoreWeights",
    "TrainConfig",
    "anomaly_scores",
    "auc",
    "default_k",
    "load_checkpoint",
    "load_graph",
    "normalize_adjacency",
    "normalized_adjacency",
    "perturb",
    "recall_at_k",
    "save_checkpoint",
    "save_graph",
    "synthesize_graph",
    "train",
    "__version__",
]
