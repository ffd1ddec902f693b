"""Attributed-graph data model, file I/O, adjacency normalization,
per-epoch perturbation, and a synthetic anomaly-injected benchmark
generator for desk-scale experiments.

File formats (no headers):

* features: CSV, one row per node, d numeric columns.
* edges: CSV, two integer columns ``src,dst`` per line; lines starting
  with ``#`` are ignored; direction is collapsed (``i,j`` == ``j,i``).
* labels: CSV, one integer (0/1) per line, length n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import ContractError, ParseError

PathLike = Union[str, Path]


@dataclass(frozen=True)
class AttributedGraph:
    """Undirected attributed graph, immutable after construction.

    ``edges`` is an (E, 2) int64 array of unordered pairs stored with
    i < j, sorted lexicographically, without duplicates or self-loops.
    """

    features: np.ndarray
    edges: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        feats = np.array(self.features, dtype=np.float64, order="C", copy=True)
        if feats.ndim != 2 or feats.shape[0] < 1 or feats.shape[1] < 1:
            raise ContractError(f"features must be a nonempty 2-D matrix, got shape {feats.shape}")
        if not np.all(np.isfinite(feats)):
            raise ContractError("features contain non-finite entries")
        n = feats.shape[0]

        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if edges.size:
            if edges.min() < 0 or edges.max() >= n:
                raise ContractError(f"edge index out of range for {n} nodes")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise ContractError("self-loops are not allowed")
            edges = np.sort(edges, axis=1)
            edges = np.unique(edges, axis=0)
        else:
            edges = edges.reshape(0, 2)

        labels = self.labels
        if labels is not None:
            labels = np.asarray(labels, dtype=np.int64).reshape(-1)
            if labels.shape[0] != n:
                raise ContractError(f"labels length {labels.shape[0]} != node count {n}")
            if not np.all((labels == 0) | (labels == 1)):
                raise ContractError("labels must be 0 or 1")
            labels.flags.writeable = False

        feats.flags.writeable = False
        edges.flags.writeable = False
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def edge_count(self) -> int:
        return self.edges.shape[0]

    def adjacency_matrix(self) -> np.ndarray:
        """Dense symmetric 0/1 adjacency, float64, zero diagonal."""
        a = np.zeros((self.n, self.n))
        if self.edges.size:
            a[self.edges[:, 0], self.edges[:, 1]] = 1.0
            a[self.edges[:, 1], self.edges[:, 0]] = 1.0
        return a


@dataclass(frozen=True)
class PerturbationConfig:
    """Parameters of the per-epoch graph perturbation.

    ``noise_sigma=None`` selects the default: 0.1 times the per-column
    feature standard deviation.  A float is an absolute, isotropic sigma.
    ``seed=None`` defers to the training seed (standalone perturb treats
    it as 0).
    """

    noise_sigma: Optional[float] = None
    edge_dropout_p: float = 0.1
    seed: Optional[object] = None  # int or sequence of ints (seed material)

    def __post_init__(self):
        if self.noise_sigma is not None and not self.noise_sigma >= 0.0:
            raise ContractError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not 0.0 <= self.edge_dropout_p < 1.0:
            raise ContractError(
                f"edge_dropout_p must lie in [0, 1), got {self.edge_dropout_p}"
            )


# ---------------------------------------------------------------------------
# file I/O


def _data_lines(path: Path, allow_comments: bool):
    """Yield (line_number, stripped_text) for content lines."""
    try:
        text = path.read_text()
    except OSError:
        raise
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if allow_comments and line.startswith("#"):
            continue
        yield lineno, line


def _load_features(path: Path) -> np.ndarray:
    rows = []
    width = None
    for lineno, line in _data_lines(path, allow_comments=False):
        parts = line.split(",")
        if width is None:
            width = len(parts)
        elif len(parts) != width:
            raise ParseError(
                f"{path}:{lineno}: expected {width} columns, found {len(parts)}"
            )
        try:
            row = [float(p) for p in parts]
        except ValueError:
            raise ParseError(f"{path}:{lineno}: non-numeric field") from None
        if not all(math.isfinite(v) for v in row):
            raise ParseError(f"{path}:{lineno}: non-finite feature value")
        rows.append(row)
    if not rows:
        raise ParseError(f"{path}: no feature rows found")
    return np.asarray(rows, dtype=np.float64)


def _load_edges(path: Path, n: int) -> np.ndarray:
    pairs = []
    for lineno, line in _data_lines(path, allow_comments=True):
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(f"{path}:{lineno}: expected 'src,dst', got {line!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"{path}:{lineno}: non-numeric node index") from None
        if not (0 <= i < n and 0 <= j < n):
            raise ParseError(
                f"{path}:{lineno}: edge ({i},{j}) out of range for {n} nodes"
            )
        if i == j:
            raise ParseError(f"{path}:{lineno}: self-loop ({i},{j}) not allowed")
        pairs.append((min(i, j), max(i, j)))
    return np.asarray(sorted(set(pairs)), dtype=np.int64).reshape(-1, 2)


def _load_labels(path: Path, n: int) -> np.ndarray:
    values = []
    for lineno, line in _data_lines(path, allow_comments=True):
        try:
            v = int(line)
        except ValueError:
            raise ParseError(f"{path}:{lineno}: non-integer label") from None
        if v not in (0, 1):
            raise ParseError(f"{path}:{lineno}: label must be 0 or 1, got {v}")
        values.append(v)
    if len(values) != n:
        raise ParseError(
            f"{path}: {len(values)} labels for {n} nodes"
        )
    return np.asarray(values, dtype=np.int64)


def load_graph(
    feature_path: PathLike,
    edge_path: PathLike,
    label_path: Optional[PathLike] = None,
) -> AttributedGraph:
    """Read a graph from its feature/edge(/label) files.

    Directed edge lists are symmetrized: ``i,j`` and ``j,i`` collapse to
    one undirected edge.  Malformed content raises :class:`ParseError`
    naming the file and line.
    """
    features = _load_features(Path(feature_path))
    edges = _load_edges(Path(edge_path), features.shape[0])
    labels = None
    if label_path is not None:
        labels = _load_labels(Path(label_path), features.shape[0])
    return AttributedGraph(features=features, edges=edges, labels=labels)


def save_graph(
    g: AttributedGraph,
    feature_path: PathLike,
    edge_path: PathLike,
    label_path: Optional[PathLike] = None,
) -> None:
    """Write a graph in the same formats load_graph reads.

    Floats are written with shortest round-trip repr, so a save/load
    cycle reproduces features bit-identically.
    """
    lines = [",".join(repr(float(v)) for v in row) for row in g.features]
    Path(feature_path).write_text("\n".join(lines) + "\n")
    Path(edge_path).write_text(
        "".join(f"{i},{j}\n" for i, j in g.edges)
    )
    if label_path is not None:
        if g.labels is None:
            raise ContractError("graph has no labels to save")
        Path(label_path).write_text("".join(f"{v}\n" for v in g.labels))


# ---------------------------------------------------------------------------
# adjacency normalization


def normalize_adjacency(a: np.ndarray) -> np.ndarray:
    """Symmetric degree normalization with self-loops.

    Adds the identity, computes degrees on the result, and rescales both
    sides by degree^{-1/2}.  Isolated nodes are safe (degree 1).
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractError(f"adjacency must be square, got shape {a.shape}")
    a_hat = a + np.eye(a.shape[0])
    d_inv_sqrt = 1.0 / np.sqrt(a_hat.sum(axis=1))
    return a_hat * d_inv_sqrt[:, None] * d_inv_sqrt[None, :]


def normalized_adjacency(g: AttributedGraph) -> np.ndarray:
    """Normalized adjacency of the graph's own (clean) edge set."""
    return normalize_adjacency(g.adjacency_matrix())


# ---------------------------------------------------------------------------
# perturbation


def _resolve_sigma(cfg: PerturbationConfig, features: np.ndarray):
    if cfg.noise_sigma is not None:
        return float(cfg.noise_sigma)
    # Default: mild noise scaled to each column's spread.
    return 0.1 * features.std(axis=0)


def perturb(
    g: AttributedGraph, cfg: PerturbationConfig, epoch_seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """One perturbation draw: noisy features and an edge-dropped adjacency.

    Gaussian noise is added to every feature entry; each undirected edge
    is independently kept with probability 1 - p via a single Bernoulli
    draw, so the returned adjacency stays exactly symmetric.  The draw is
    fully determined by (cfg.seed, epoch_seed); features are drawn before
    the edge mask.
    """
    seed = 0 if cfg.seed is None else cfg.seed
    material = list(seed) if isinstance(seed, (tuple, list)) else [int(seed)]
    rng = np.random.default_rng((*material, int(epoch_seed)))
    sigma = _resolve_sigma(cfg, g.features)
    noise = rng.standard_normal((g.n, g.d))
    x_tilde = g.features + sigma * noise
    keep = rng.random(g.edge_count) >= cfg.edge_dropout_p
    kept = g.edges[keep]
    a_tilde = np.zeros((g.n, g.n))
    if kept.size:
        a_tilde[kept[:, 0], kept[:, 1]] = 1.0
        a_tilde[kept[:, 1], kept[:, 0]] = 1.0
    return x_tilde, a_tilde


def edges_from_adjacency(a: np.ndarray) -> np.ndarray:
    """Unordered edge list (i < j) of a symmetric 0/1 adjacency."""
    iu, ju = np.nonzero(np.triu(np.asarray(a), k=1))
    return np.stack([iu, ju], axis=1).astype(np.int64)


# ---------------------------------------------------------------------------
# synthetic benchmark generator


def synthesize_graph(
    n: int,
    d: int,
    clique_size: int,
    clique_count: int,
    outlier_count: int,
    seed: int,
    *,
    clusters: int = 4,
    neighbors: int = 5,
    cluster_std: float = 1.0,
    center_spread: float = 4.0,
) -> tuple[AttributedGraph, dict]:
    """Generate a labeled benchmark graph with injected anomalies.

    Base graph: features from ``clusters`` Gaussian blobs (std
    ``cluster_std``, centers ~ N(0, center_spread^2 I)), wired by
    mutual-ish kNN in feature space (``neighbors`` per node).

    Injections, on disjoint node sets:

    * structural: ``clique_count`` cliques of ``clique_size`` nodes each,
      densely wired on top of the base graph;
    * contextual: ``outlier_count`` nodes whose features are resampled at
      radial distance in [3, 4.5] x cluster_std from their own cluster
      center: at least 3 cluster-stds out, yet close enough to overlap
      the fringe of the cluster, so plain reconstruction error does not
      trivially saturate on them.

    Returns the graph plus a JSON-serializable dict recording every
    generation parameter, the cluster structure, and the injected node
    ids (useful for diagnostics and tests).
    """
    if n < 1 or d < 1:
        raise ContractError("n and d must be at least 1")
    if clique_size < 0 or clique_count < 0 or outlier_count < 0:
        raise ContractError("anomaly counts must be nonnegative")
    n_structural = clique_size * clique_count
    if n_structural + outlier_count > n:
        raise ContractError(
            f"cannot inject {n_structural}+{outlier_count} anomalies into {n} nodes"
        )
    if clusters < 1:
        raise ContractError("clusters must be at least 1")

    rng = np.random.default_rng(seed)

    # Balanced cluster assignment, then shuffled.
    assignment = np.repeat(np.arange(clusters), -(-n // clusters))[:n]
    assignment = rng.permutation(assignment)
    centers = center_spread * rng.standard_normal((clusters, d))
    features = centers[assignment] + cluster_std * rng.standard_normal((n, d))

    # kNN edges in feature space (undirected union of directed kNN).
    k = min(neighbors, n - 1)
    pairs = set()
    if k > 0:
        sq = np.einsum("ij,ij->i", features, features)
        dist2 = sq[:, None] + sq[None, :] - 2.0 * features @ features.T
        np.fill_diagonal(dist2, np.inf)
        nearest = np.argsort(dist2, axis=1, kind="stable")[:, :k]
        for i in range(n):
            for j in nearest[i]:
                j = int(j)
                pairs.add((min(i, j), max(i, j)))

    # Disjoint pools for the two anomaly types.
    pool = rng.permutation(n)
    structural_nodes = pool[:n_structural]
    contextual_nodes = pool[n_structural : n_structural + outlier_count]

    for c in range(clique_count):
        members = structural_nodes[c * clique_size : (c + 1) * clique_size]
        for a_idx in range(len(members)):
            for b_idx in range(a_idx + 1, len(members)):
                i, j = int(members[a_idx]), int(members[b_idx])
                pairs.add((min(i, j), max(i, j)))

    for node in contextual_nodes:
        direction = rng.standard_normal(d)
        direction /= np.linalg.norm(direction)
        radius = (3.0 + 1.5 * rng.random()) * cluster_std
        features[node] = centers[assignment[node]] + radius * direction

    labels = np.zeros(n, dtype=np.int64)
    labels[structural_nodes] = 1
    labels[contextual_nodes] = 1

    edges = np.asarray(sorted(pairs), dtype=np.int64).reshape(-1, 2)
    graph = AttributedGraph(features=features, edges=edges, labels=labels)
    meta = {
        "n": n,
        "d": d,
        "clique_size": clique_size,
        "clique_count": clique_count,
        "outlier_count": outlier_count,
        "seed": int(seed),
        "clusters": clusters,
        "neighbors": neighbors,
        "cluster_std": cluster_std,
        "center_spread": center_spread,
        "cluster_assignment": assignment.tolist(),
        "cluster_centers": centers.tolist(),
        "structural_nodes": sorted(int(v) for v in structural_nodes),
        "contextual_nodes": sorted(int(v) for v in contextual_nodes),
    }
    return graph, meta
