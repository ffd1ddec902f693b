"""Uncertainty extraction, anomaly-score assembly, and evaluation metrics.

Per-entry uncertainty formulas (see the heads module for parameter
meanings):

* features: graph (data-side) uncertainty beta / (alpha - 1);
  reconstruction (model-side) uncertainty beta / (nu (alpha - 1));
  averaged over the d dimensions to one value per node.
* topology: reconstruction uncertainty 1 / S with Beta strength
  S = eps + eps_bar; graph uncertainty from the belief masses
  b = (eps - 1)/S, b_bar = (eps_bar - 1)/S as
  (b + b_bar) (1 - |b - b_bar| / (b + b_bar)), i.e. 2 min(b, b_bar),
  taken as 0 when both masses vanish; averaged over the evaluated pairs
  incident to each node.

The final score per node is

    y = l_f (l_g U_graph_f + l_r U_reconst_f)
      + l_t (l_g U_graph_t + l_r U_reconst_t)
      + err_f + err_t

where err_f is the L1 feature reconstruction error and err_t sums
|1 - p_hat| over the node's actual neighbors; each of the six
components is min-max normalized across nodes before the weighted sum.
The unweighted variant err_f + err_t (all lambdas zero) is the pure
reconstruction-error baseline and is always reported alongside.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ContractError, MetricError
from .graphdata import AttributedGraph, normalized_adjacency
from .heads import BetaEvidence, NIGParams
from .losses import full_pairs
from .training import ModelState, model_forward

_STREAM_SCORE = 990001


@dataclass(frozen=True)
class ScoreWeights:
    """Mixing weights of the anomaly score.

    ``feature``/``topology`` split the uncertainty mass between the two
    views; ``graph``/``reconst`` split it between the two uncertainty
    kinds.  All zero is the explicit reconstruction-error baseline.
    """

    feature: float = 0.8
    topology: float = 0.2
    graph: float = 0.3
    reconst: float = 0.7

    def __post_init__(self):
        vals = (self.feature, self.topology, self.graph, self.reconst)
        if any(not v >= 0.0 for v in vals):
            raise ContractError(f"score weights must be nonnegative, got {vals}")

    @classmethod
    def baseline(cls) -> "ScoreWeights":
        return cls(feature=0.0, topology=0.0, graph=0.0, reconst=0.0)


@dataclass(frozen=True)
class AnomalyReport:
    """Raw per-node components, the assembled scores, and bookkeeping.

    Component arrays hold the pre-normalization values; ``normalization``
    maps each component name to the (min, max) used.  ``baseline_scores``
    is the all-weights-zero score.  Nodes listed in
    ``nodes_without_evidence`` had no evaluated incident pair and carry
    zero topology uncertainties.
    """

    scores: np.ndarray
    baseline_scores: np.ndarray
    u_graph_f: np.ndarray
    u_reconst_f: np.ndarray
    u_graph_t: np.ndarray
    u_reconst_t: np.ndarray
    err_f: np.ndarray
    err_t: np.ndarray
    normalization: dict
    nodes_without_evidence: np.ndarray
    weights: ScoreWeights

    COMPONENTS = (
        "u_graph_f",
        "u_reconst_f",
        "u_graph_t",
        "u_reconst_t",
        "err_f",
        "err_t",
    )


def _values(t) -> np.ndarray:
    return t.value if isinstance(t, ad.Tensor) else np.asarray(t, dtype=np.float64)


def feature_uncertainties(p: NIGParams) -> tuple[np.ndarray, np.ndarray]:
    """Per-node (graph, reconstruction) uncertainty of the feature view."""
    nu, alpha, beta = _values(p.nu), _values(p.alpha), _values(p.beta)
    u_graph = beta / (alpha - 1.0)
    u_reconst = u_graph / nu
    return u_graph.mean(axis=1), u_reconst.mean(axis=1)


def topology_uncertainties(
    e: BetaEvidence, g
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-node (graph, reconstruction) uncertainty of the topology view.

    ``g`` may be an AttributedGraph or a node count.  Also returns the
    boolean has-evidence mask; nodes without any evaluated incident pair
    get zeros there.
    """
    n = g.n if isinstance(g, AttributedGraph) else int(g)
    eps = _values(e.eps).reshape(-1)
    eps_bar = _values(e.eps_bar).reshape(-1)
    s = eps + eps_bar
    b = (eps - 1.0) / s
    b_bar = (eps_bar - 1.0) / s
    mass = b + b_bar
    # (b + b_bar)(1 - |b - b_bar|/(b + b_bar)) = 2 min(b, b_bar); zero
    # total mass (the vacuous Beta(1,1)) contributes zero conflict.
    u_graph_pair = np.where(mass > 0.0, mass - np.abs(b - b_bar), 0.0)
    u_reconst_pair = 1.0 / s

    u_graph = np.zeros(n)
    u_reconst = np.zeros(n)
    counts = np.zeros(n)
    for col in (0, 1):
        idx = e.pairs[:, col]
        np.add.at(u_graph, idx, u_graph_pair)
        np.add.at(u_reconst, idx, u_reconst_pair)
        np.add.at(counts, idx, 1.0)
    has_evidence = counts > 0
    u_graph[has_evidence] /= counts[has_evidence]
    u_reconst[has_evidence] /= counts[has_evidence]
    return u_graph, u_reconst, has_evidence


def minmax_normalize(v: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Map to [0, 1] by (v - min)/(max - min); constant input maps to 0."""
    lo = float(v.min())
    hi = float(v.max())
    if hi == lo:
        return np.zeros_like(v), lo, hi
    return (v - lo) / (hi - lo), lo, hi


def _scoring_pairs(
    g: AttributedGraph, policy: str, neg_per_node: int, seed
) -> np.ndarray:
    if policy not in ("auto", "full", "sampled"):
        raise ContractError(f"unknown pair policy {policy!r}")
    if policy == "full" or (policy == "auto" and g.n <= 2000):
        return full_pairs(g.n)
    # Edges plus neg_per_node sampled non-edges per node.
    adj = g.adjacency_matrix().astype(bool)
    rng = np.random.default_rng(seed)
    extra = []
    for i in range(g.n):
        candidates = np.flatnonzero(~adj[i])
        candidates = candidates[candidates != i]
        if candidates.size == 0:
            continue
        take = min(neg_per_node, candidates.size)
        for j in rng.choice(candidates, size=take, replace=False):
            extra.append((min(i, int(j)), max(i, int(j))))
    combined = {(int(i), int(j)) for i, j in g.edges} | set(extra)
    return np.asarray(sorted(combined), dtype=np.int64).reshape(-1, 2)


def anomaly_scores(
    model: ModelState,
    g: AttributedGraph,
    weights: ScoreWeights = ScoreWeights(),
    pair_policy: str = "auto",
    neg_per_node: int = 5,
) -> AnomalyReport:
    """Score every node of the clean graph under a trained model."""
    if model.meta["feature_dim"] != g.d:
        raise ContractError(
            f"model expects {model.meta['feature_dim']} feature dimensions, "
            f"graph has {g.d}"
        )
    pairs = _scoring_pairs(
        g, pair_policy, neg_per_node, (model.meta["seed"], _STREAM_SCORE)
    )
    adj = g.adjacency_matrix()
    flags = adj[pairs[:, 0], pairs[:, 1]]
    tape = ad.Tape()
    _, _, nig, evidence = model_forward(
        tape, model, g.features, normalized_adjacency(g), pairs, flags
    )

    u_graph_f, u_reconst_f = feature_uncertainties(nig)
    u_graph_t, u_reconst_t, has_evidence = topology_uncertainties(evidence, g)
    err_f = np.abs(g.features - _values(nig.gamma)).sum(axis=1)

    p_hat = _values(evidence.eps).reshape(-1) / (
        _values(evidence.eps).reshape(-1) + _values(evidence.eps_bar).reshape(-1)
    )
    err_t = np.zeros(g.n)
    edge_mask = evidence.flags == 1.0
    edge_residual = np.abs(1.0 - p_hat[edge_mask])
    for col in (0, 1):
        np.add.at(err_t, evidence.pairs[edge_mask, col], edge_residual)

    raw = {
        "u_graph_f": u_graph_f,
        "u_reconst_f": u_reconst_f,
        "u_graph_t": u_graph_t,
        "u_reconst_t": u_reconst_t,
        "err_f": err_f,
        "err_t": err_t,
    }
    normalized = {}
    normalization = {}
    for name, values in raw.items():
        if not np.all(np.isfinite(values)):
            raise ContractError(f"score component {name} is non-finite")
        normalized[name], lo, hi = minmax_normalize(values)
        normalization[name] = (lo, hi)

    scores = (
        weights.feature
        * (
            weights.graph * normalized["u_graph_f"]
            + weights.reconst * normalized["u_reconst_f"]
        )
        + weights.topology
        * (
            weights.graph * normalized["u_graph_t"]
            + weights.reconst * normalized["u_reconst_t"]
        )
        + normalized["err_f"]
        + normalized["err_t"]
    )
    baseline = normalized["err_f"] + normalized["err_t"]
    return AnomalyReport(
        scores=scores,
        baseline_scores=baseline,
        normalization=normalization,
        nodes_without_evidence=np.flatnonzero(~has_evidence),
        weights=weights,
        **raw,
    )


# ---------------------------------------------------------------------------
# metrics


def _check_labels(labels) -> np.ndarray:
    arr = np.asarray(labels).reshape(-1)
    if not np.all((arr == 0) | (arr == 1)):
        raise MetricError("labels must be 0 or 1")
    return arr.astype(np.int64)


def _average_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.size)
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auc(scores, labels) -> float:
    """Probability a random anomaly outscores a random normal node.

    Computed from the rank-sum statistic; tied scores count one half.
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = _check_labels(labels)
    if scores.shape != labels.shape:
        raise MetricError(
            f"{scores.size} scores for {labels.size} labels"
        )
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError("AUC needs both classes present")
    ranks = _average_ranks(scores)
    pos_rank_sum = ranks[labels == 1].sum()
    return float((pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def recall_at_k(scores, labels, k: int) -> float:
    """Fraction of true anomalies among the k highest scores.

    Ties are broken by ascending node index, so the result is
    deterministic.
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = _check_labels(labels)
    if scores.shape != labels.shape:
        raise MetricError(f"{scores.size} scores for {labels.size} labels")
    if not 1 <= k <= scores.size:
        raise ContractError(f"k must lie in [1, {scores.size}], got {k}")
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise MetricError("Recall@K needs at least one positive label")
    order = np.lexsort((np.arange(scores.size), -scores))
    return float(labels[order[:k]].sum() / n_pos)


def default_k(n: int) -> int:
    """Default K for Recall@K: max(10, n/10) rounded, clamped to n."""
    return min(n, max(10, int(round(n / 10))))
