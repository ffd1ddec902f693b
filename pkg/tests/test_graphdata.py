"""Graph container, file formats, normalization, perturbation, synthesis."""

import math

import numpy as np
import pytest

from gel.errors import ContractError, ParseError
from gel.graphdata import (
    AttributedGraph,
    PerturbationConfig,
    edges_from_adjacency,
    load_graph,
    normalize_adjacency,
    normalized_adjacency,
    perturb,
    save_graph,
    synthesize_graph,
)


def tiny_graph(labels=None):
    feats = np.array([[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]])
    return AttributedGraph(features=feats, edges=[[0, 1], [1, 2]], labels=labels)


# ---------------------------------------------------------------------------
# container


def test_edges_canonicalized():
    g = AttributedGraph(
        features=np.zeros((3, 1)), edges=[[2, 1], [1, 2], [1, 0]]
    )
    assert np.array_equal(g.edges, [[0, 1], [1, 2]])
    assert g.edge_count == 2


def test_properties_and_adjacency():
    g = tiny_graph()
    assert (g.n, g.d) == (3, 2)
    a = g.adjacency_matrix()
    assert np.array_equal(a, a.T)
    assert np.all(np.diag(a) == 0.0)
    assert a[0, 1] == 1.0 and a[1, 2] == 1.0 and a[0, 2] == 0.0


def test_empty_edge_list_allowed():
    g = AttributedGraph(features=np.ones((2, 2)), edges=np.zeros((0, 2)))
    assert g.edge_count == 0
    assert np.array_equal(g.adjacency_matrix(), np.zeros((2, 2)))


def test_container_validation():
    with pytest.raises(ContractError):
        AttributedGraph(features=np.ones((2, 2)), edges=[[0, 0]])
    with pytest.raises(ContractError):
        AttributedGraph(features=np.ones((2, 2)), edges=[[0, 2]])
    with pytest.raises(ContractError):
        AttributedGraph(features=np.array([[np.nan]]), edges=np.zeros((0, 2)))
    with pytest.raises(ContractError):
        tiny_graph(labels=[0, 1])
    with pytest.raises(ContractError):
        tiny_graph(labels=[0, 1, 2])


def test_arrays_are_frozen():
    g = tiny_graph(labels=[0, 1, 0])
    for arr in (g.features, g.edges, g.labels):
        with pytest.raises(ValueError):
            arr[0] = 0


# ---------------------------------------------------------------------------
# file I/O


def write(path, text):
    path.write_text(text)
    return path


def test_round_trip_is_bit_identical(tmp_path):
    rng = np.random.default_rng(5)
    feats = rng.standard_normal((6, 3)) * np.array([1e-9, 1.0, 1e12])
    feats[0, 0] = 0.1  # not exactly representable; repr must round-trip
    g = AttributedGraph(
        features=feats, edges=[[0, 3], [2, 5], [1, 4]], labels=[0, 1, 0, 0, 1, 0]
    )
    f, e, l = tmp_path / "x.csv", tmp_path / "e.csv", tmp_path / "y.csv"
    save_graph(g, f, e, l)
    back = load_graph(f, e, l)
    assert back.features.tobytes() == g.features.tobytes()
    assert np.array_equal(back.edges, g.edges)
    assert np.array_equal(back.labels, g.labels)


def test_directed_input_symmetrized(tmp_path):
    f = write(tmp_path / "x.csv", "0\n1\n")
    e = write(tmp_path / "e.csv", "0,1\n1,0\n")
    g = load_graph(f, e)
    assert np.array_equal(g.edges, [[0, 1]])


def test_comments_and_blank_lines_skipped(tmp_path):
    f = write(tmp_path / "x.csv", "0,0\n1,1\n")
    e = write(tmp_path / "e.csv", "# header\n\n0,1\n")
    l = write(tmp_path / "y.csv", "# labels\n0\n\n1\n")
    g = load_graph(f, e, l)
    assert g.edge_count == 1
    assert np.array_equal(g.labels, [0, 1])


@pytest.mark.parametrize(
    "name,text,needle",
    [
        ("x.csv", "1.0,2.0\n1.0,oops\n", "x.csv:2"),
        ("x.csv", "1.0,2.0\n1.0\n", "x.csv:2"),
        ("x.csv", "1.0\ninf\n", "x.csv:2"),
        ("x.csv", "", "no feature rows"),
    ],
)
def test_feature_parse_errors(tmp_path, name, text, needle):
    f = write(tmp_path / name, text)
    with pytest.raises(ParseError, match=needle):
        load_graph(f, write(tmp_path / "e.csv", ""))


@pytest.mark.parametrize(
    "text,needle",
    [
        ("0,1\n0\n", "e.csv:2"),
        ("0,a\n", "e.csv:1"),
        ("0,9\n", "out of range"),
        ("0,1\n1,1\n", "self-loop"),
    ],
)
def test_edge_parse_errors(tmp_path, text, needle):
    f = write(tmp_path / "x.csv", "0\n1\n2\n")
    e = write(tmp_path / "e.csv", text)
    with pytest.raises(ParseError, match=needle):
        load_graph(f, e)


@pytest.mark.parametrize(
    "text,needle",
    [("0\n2\n", "y.csv:2"), ("0\n1\n1\n", "3 labels for 2 nodes"), ("x\n0\n", "y.csv:1")],
)
def test_label_parse_errors(tmp_path, text, needle):
    f = write(tmp_path / "x.csv", "0\n1\n")
    e = write(tmp_path / "e.csv", "0,1\n")
    l = write(tmp_path / "y.csv", text)
    with pytest.raises(ParseError, match=needle):
        load_graph(f, e, l)


def test_save_without_labels_rejected(tmp_path):
    g = tiny_graph()
    with pytest.raises(ContractError):
        save_graph(g, tmp_path / "x.csv", tmp_path / "e.csv", tmp_path / "y.csv")


# ---------------------------------------------------------------------------
# normalization


def test_normalized_two_node_path():
    # Self-loops give both nodes degree 2: every entry is 1/2.
    a = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert np.allclose(normalize_adjacency(a), np.full((2, 2), 0.5))


def test_normalized_three_node_path():
    g = AttributedGraph(features=np.zeros((3, 1)), edges=[[0, 1], [1, 2]])
    m = normalized_adjacency(g)
    # Degrees with self-loops: 2, 3, 2.
    assert m[0, 0] == pytest.approx(0.5)
    assert m[1, 1] == pytest.approx(1.0 / 3.0)
    assert m[0, 1] == pytest.approx(1.0 / math.sqrt(6.0))
    assert m[0, 2] == 0.0
    assert np.allclose(m, m.T)


def test_normalized_isolated_node_safe():
    m = normalize_adjacency(np.zeros((3, 3)))
    assert np.array_equal(m, np.eye(3))


def test_normalized_rejects_non_square():
    with pytest.raises(ContractError):
        normalize_adjacency(np.zeros((2, 3)))


def test_normalized_spectrum_bounded():
    # Symmetric normalization keeps eigenvalues in [-1, 1].
    g, _ = synthesize_graph(40, 4, 3, 1, 2, seed=2)
    eig = np.linalg.eigvalsh(normalized_adjacency(g))
    assert eig.min() >= -1.0 - 1e-12
    assert eig.max() <= 1.0 + 1e-12


# ---------------------------------------------------------------------------
# perturbation


def test_perturb_deterministic():
    g, _ = synthesize_graph(30, 3, 0, 0, 0, seed=1)
    cfg = PerturbationConfig(noise_sigma=0.2, edge_dropout_p=0.3, seed=42)
    x1, a1 = perturb(g, cfg, epoch_seed=7)
    x2, a2 = perturb(g, cfg, epoch_seed=7)
    assert np.array_equal(x1, x2) and np.array_equal(a1, a2)
    x3, _ = perturb(g, cfg, epoch_seed=8)
    assert not np.array_equal(x1, x3)


def test_perturb_seed_material_sequence():
    g, _ = synthesize_graph(10, 2, 0, 0, 0, seed=1)
    cfg = PerturbationConfig(noise_sigma=0.1, seed=(3, 550007))
    x1, _ = perturb(g, cfg, epoch_seed=0)
    x2, _ = perturb(g, cfg, epoch_seed=0)
    assert np.array_equal(x1, x2)


def test_perturb_adjacency_is_sub_symmetric():
    g, _ = synthesize_graph(40, 3, 0, 0, 0, seed=3)
    _, a = perturb(g, PerturbationConfig(edge_dropout_p=0.5, seed=0), epoch_seed=1)
    assert np.array_equal(a, a.T)
    assert np.all(np.diag(a) == 0.0)
    # Only original edges may survive.
    clean = g.adjacency_matrix()
    assert np.all(a <= clean)


def test_perturb_identity_limits():
    g = tiny_graph()
    x, a = perturb(g, PerturbationConfig(noise_sigma=0.0, edge_dropout_p=0.0), 0)
    assert np.array_equal(x, g.features)
    assert np.array_equal(a, g.adjacency_matrix())


def test_perturb_default_sigma_scales_per_column():
    # Constant column stays exact under the relative default sigma.
    feats = np.column_stack([np.full(50, 2.0), np.linspace(0, 100, 50)])
    g = AttributedGraph(features=feats, edges=np.zeros((0, 2)))
    x, _ = perturb(g, PerturbationConfig(edge_dropout_p=0.0), 0)
    assert np.array_equal(x[:, 0], feats[:, 0])
    assert not np.array_equal(x[:, 1], feats[:, 1])


def test_perturb_dropout_rate_concentrates():
    rng = np.random.default_rng(0)
    feats = rng.standard_normal((300, 2))
    full = np.array([(i, j) for i in range(300) for j in range(i + 1, i + 8) if j < 300])
    g = AttributedGraph(features=feats, edges=full)
    p = 0.3
    kept = []
    for epoch in range(5):
        _, a = perturb(g, PerturbationConfig(noise_sigma=0.0, edge_dropout_p=p, seed=9), epoch)
        kept.append(edges_from_adjacency(a).shape[0])
    mean_kept = np.mean(kept)
    expected = (1 - p) * g.edge_count
    sd = math.sqrt(g.edge_count * p * (1 - p) / len(kept))
    assert abs(mean_kept - expected) < 5 * sd


def test_perturb_config_validation():
    with pytest.raises(ContractError):
        PerturbationConfig(edge_dropout_p=1.0)
    with pytest.raises(ContractError):
        PerturbationConfig(noise_sigma=-0.1)


def test_edges_from_adjacency_inverts_adjacency_matrix():
    g, _ = synthesize_graph(25, 3, 2, 2, 3, seed=4)
    assert np.array_equal(edges_from_adjacency(g.adjacency_matrix()), g.edges)


# ---------------------------------------------------------------------------
# synthesis


def test_synthesize_shapes_and_labels():
    g, meta = synthesize_graph(60, 4, 5, 2, 6, seed=0)
    assert (g.n, g.d) == (60, 4)
    assert g.labels.sum() == 5 * 2 + 6
    assert len(meta["structural_nodes"]) == 10
    assert len(meta["contextual_nodes"]) == 6
    assert not set(meta["structural_nodes"]) & set(meta["contextual_nodes"])


def test_synthesize_cliques_fully_wired():
    g, meta = synthesize_graph(50, 3, 4, 2, 0, seed=1)
    a = g.adjacency_matrix()
    structural = meta["structural_nodes"]
    # Every clique member is adjacent to its clique_size - 1 peers, so each
    # structural node has at least that many neighbors inside the set.
    inside = a[np.ix_(structural, structural)]
    assert np.all(inside.sum(axis=1) >= 3)


def test_synthesize_contextual_nodes_are_far():
    g, meta = synthesize_graph(80, 6, 0, 0, 10, seed=2, cluster_std=1.0)
    centers = np.asarray(meta["cluster_centers"])
    assignment = np.asarray(meta["cluster_assignment"])
    for node in meta["contextual_nodes"]:
        center = centers[assignment[node]]
        dist = np.linalg.norm(g.features[node] - center)
        assert dist >= 3.0 * math.sqrt(6)  # at least 3 sigma x sqrt(d)


def test_synthesize_deterministic():
    g1, m1 = synthesize_graph(40, 3, 3, 1, 4, seed=7)
    g2, m2 = synthesize_graph(40, 3, 3, 1, 4, seed=7)
    assert np.array_equal(g1.features, g2.features)
    assert np.array_equal(g1.edges, g2.edges)
    assert m1 == m2
    g3, _ = synthesize_graph(40, 3, 3, 1, 4, seed=8)
    assert not np.array_equal(g1.features, g3.features)


def test_synthesize_infeasible_rejected():
    with pytest.raises(ContractError):
        synthesize_graph(10, 2, 5, 2, 5, seed=0)
    with pytest.raises(ContractError):
        synthesize_graph(0, 2, 0, 0, 0, seed=0)
