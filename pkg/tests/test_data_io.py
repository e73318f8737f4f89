"""Loaders, the SBM generator, and binary model checkpoints."""

import logging
import struct

import numpy as np
import pytest

from topoguard import (BadMagic, DimensionMismatch, GcnModel,
                       InconsistentFeatureWidth, MalformedLine,
                       NonSymmetricInput, TruncatedFile, VersionMismatch,
                       edge_set, generate_sbm, load_graph_dir, load_model,
                       load_planetoid, save_graph_dir, save_model)

# --------------------------------------------------------------------------
# graph directory format


def test_graph_dir_round_trip_is_exact(tmp_path):
    g = generate_sbm([5, 5], 0.4, 0.1, 6, 0.7, seed=3)
    save_graph_dir(g, tmp_path / "g")
    g2 = load_graph_dir(tmp_path / "g")
    np.testing.assert_array_equal(g2._adjacency, g._adjacency)
    np.testing.assert_array_equal(g2.features, g.features)
    np.testing.assert_array_equal(g2.labels, g.labels)
    np.testing.assert_array_equal(g2.train_mask, g.train_mask)


def _write_graph_dir(path, edges_lines, n=3):
    path.mkdir()
    (path / "edges.txt").write_text("".join(l + "\n" for l in edges_lines))
    (path / "features.csv").write_text("".join("0.1,0.2\n" for _ in range(n)))
    (path / "labels.txt").write_text("".join("0\n" for _ in range(n)))
    (path / "train_mask.txt").write_text("1\n" + "".join("0\n" for _ in range(n - 1)))


def test_graph_dir_rejects_reversed_edge(tmp_path):
    _write_graph_dir(tmp_path / "g", ["2 1"])
    with pytest.raises(NonSymmetricInput, match="i < j"):
        load_graph_dir(tmp_path / "g")


def test_graph_dir_rejects_bad_edge_line(tmp_path):
    _write_graph_dir(tmp_path / "g", ["0 1 2"])
    with pytest.raises(MalformedLine):
        load_graph_dir(tmp_path / "g")


def test_graph_dir_rejects_out_of_range_endpoint(tmp_path):
    _write_graph_dir(tmp_path / "g", ["0 7"])
    with pytest.raises(DimensionMismatch):
        load_graph_dir(tmp_path / "g")


def test_graph_dir_empty_edge_file_is_edgeless(tmp_path):
    _write_graph_dir(tmp_path / "g", [])
    g = load_graph_dir(tmp_path / "g")
    assert g.n_edges == 0
    assert g.n_nodes == 3


def test_graph_dir_rejects_ragged_features(tmp_path):
    d = tmp_path / "g"
    d.mkdir()
    (d / "edges.txt").write_text("")
    (d / "features.csv").write_text("0.1,0.2\n0.3\n")
    (d / "labels.txt").write_text("0\n0\n")
    (d / "train_mask.txt").write_text("1\n0\n")
    with pytest.raises(InconsistentFeatureWidth):
        load_graph_dir(d)


def test_graph_dir_rejects_count_mismatch(tmp_path):
    d = tmp_path / "g"
    d.mkdir()
    (d / "edges.txt").write_text("")
    (d / "features.csv").write_text("0.1,0.2\n0.3,0.4\n")
    (d / "labels.txt").write_text("0\n")
    (d / "train_mask.txt").write_text("1\n0\n")
    with pytest.raises(DimensionMismatch):
        load_graph_dir(d)


# --------------------------------------------------------------------------
# planetoid content/cites format


def _write_planetoid(tmp_path, content, cites):
    c = tmp_path / "toy.content"
    c.write_text("".join(l + "\n" for l in content))
    e = tmp_path / "toy.cites"
    e.write_text("".join(l + "\n" for l in cites))
    return c, e


def test_planetoid_toy_graph(tmp_path):
    content = ["n1 1 0 theory", "n2 0 1 systems", "n3 1 1 theory"]
    cites = ["n1 n2", "n2 n3"]
    g = load_planetoid(*_write_planetoid(tmp_path, content, cites), seed=0)
    assert g.n_nodes == 3
    assert g.n_classes == 2
    # ids and labels index in first-appearance order
    np.testing.assert_array_equal(g.labels, [0, 1, 0])
    np.testing.assert_array_equal(g.features, [[1, 0], [0, 1], [1, 1]])
    assert edge_set(g).pairs == frozenset({(0, 1), (1, 2)})
    assert g.train_mask.sum() >= 2  # at least one node per class


def test_planetoid_drops_unknown_and_self_cites(tmp_path, caplog):
    content = ["a 1 0 x", "b 0 1 y"]
    cites = ["a b", "a zzz", "b b"]
    with caplog.at_level(logging.WARNING):
        g = load_planetoid(*_write_planetoid(tmp_path, content, cites))
    assert g.n_edges == 1
    assert "dropped 2" in caplog.text


def test_planetoid_rejects_duplicate_id(tmp_path):
    content = ["a 1 0 x", "a 0 1 y"]
    with pytest.raises(MalformedLine) as exc:
        load_planetoid(*_write_planetoid(tmp_path, content, []))
    assert exc.value.line_no == 2


def test_planetoid_rejects_ragged_features(tmp_path):
    content = ["a 1 0 x", "b 1 y"]
    with pytest.raises(InconsistentFeatureWidth):
        load_planetoid(*_write_planetoid(tmp_path, content, []))


def test_planetoid_rejects_short_line(tmp_path):
    content = ["a x"]
    with pytest.raises(MalformedLine):
        load_planetoid(*_write_planetoid(tmp_path, content, []))


# --------------------------------------------------------------------------
# SBM generator


def test_sbm_extreme_probabilities_give_block_cliques():
    g = generate_sbm([3, 3], 1.0, 0.0, 4, 0.9, seed=0)
    a = g._adjacency
    np.testing.assert_array_equal(a[:3, :3], 1.0 - np.eye(3))
    np.testing.assert_array_equal(a[3:, 3:], 1.0 - np.eye(3))
    np.testing.assert_array_equal(a[:3, 3:], np.zeros((3, 3)))


def test_sbm_zero_probabilities_give_edgeless():
    g = generate_sbm([4, 4], 0.0, 0.0, 4, 0.5, seed=1)
    assert g.n_edges == 0


def test_sbm_edge_count_matches_expectation():
    # E = 2*C(50,2)*0.2 + 50*50*0.01 = 515, Var = 416.75, sigma ~ 20.4
    g = generate_sbm([50, 50], 0.2, 0.01, 8, 0.8, seed=5)
    assert abs(g.n_edges - 515) < 3 * 20.42


def test_sbm_labels_follow_blocks():
    g = generate_sbm([2, 3, 1], 0.5, 0.1, 4, 0.9, seed=2)
    np.testing.assert_array_equal(g.labels, [0, 0, 1, 1, 1, 2])
    assert g.n_classes == 3


def test_sbm_mask_covers_every_class():
    g = generate_sbm([10, 10, 10], 0.2, 0.01, 6, 0.8, seed=9)
    for cls in range(3):
        assert g.train_mask[g.labels == cls].sum() >= 1


def test_sbm_feature_signal_mixes_one_hot():
    g = generate_sbm([5, 5], 0.2, 0.1, 4, 1.0, seed=0)
    one_hot = np.zeros((10, 4))
    one_hot[np.arange(10), g.labels] = 1.0
    np.testing.assert_array_equal(g.features, one_hot)


def test_sbm_is_deterministic():
    g1 = generate_sbm([8, 8], 0.3, 0.05, 5, 0.7, seed=11)
    g2 = generate_sbm([8, 8], 0.3, 0.05, 5, 0.7, seed=11)
    np.testing.assert_array_equal(g1._adjacency, g2._adjacency)
    np.testing.assert_array_equal(g1.features, g2.features)
    np.testing.assert_array_equal(g1.train_mask, g2.train_mask)


def test_sbm_validation_errors():
    with pytest.raises(ValueError):
        generate_sbm([0, 3], 0.2, 0.1, 4, 0.5, seed=0)
    with pytest.raises(ValueError):
        generate_sbm([3, 3], 0.2, 0.1, 1, 0.5, seed=0)  # fdim < blocks
    with pytest.raises(ValueError):
        generate_sbm([3, 3], 1.5, 0.1, 4, 0.5, seed=0)
    with pytest.raises(ValueError):
        generate_sbm([3, 3], 0.2, 0.1, 4, 1.5, seed=0)


# --------------------------------------------------------------------------
# checkpoints


def test_checkpoint_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    model = GcnModel(weights=[rng.standard_normal((6, 4)),
                              rng.standard_normal((4, 3))])
    p = tmp_path / "m.bin"
    save_model(model, p)
    loaded = load_model(p)
    assert len(loaded.weights) == 2
    for w1, w2 in zip(model.weights, loaded.weights):
        np.testing.assert_array_equal(w1, w2)


def test_checkpoint_size_formula(tmp_path):
    model = GcnModel(weights=[np.zeros((1433, 32)), np.zeros((32, 7))])
    p = tmp_path / "m.bin"
    save_model(model, p)
    # magic+version+count = 12, two dim records = 16, payload = 8*46080
    assert p.stat().st_size == 12 + 16 + 8 * (1433 * 32 + 32 * 7) == 368668


def test_checkpoint_rejects_bad_magic(tmp_path):
    p = tmp_path / "m.bin"
    save_model(GcnModel(weights=[np.zeros((2, 2))]), p)
    raw = bytearray(p.read_bytes())
    raw[:4] = b"XXXX"
    p.write_bytes(bytes(raw))
    with pytest.raises(BadMagic):
        load_model(p)


def test_checkpoint_rejects_wrong_version(tmp_path):
    p = tmp_path / "m.bin"
    save_model(GcnModel(weights=[np.zeros((2, 2))]), p)
    raw = bytearray(p.read_bytes())
    raw[4:8] = struct.pack("<I", 99)
    p.write_bytes(bytes(raw))
    with pytest.raises(VersionMismatch):
        load_model(p)


def test_checkpoint_rejects_truncation(tmp_path):
    p = tmp_path / "m.bin"
    save_model(GcnModel(weights=[np.zeros((3, 3))]), p)
    p.write_bytes(p.read_bytes()[:-5])
    with pytest.raises(TruncatedFile):
        load_model(p)


def test_checkpoint_rejects_trailing_garbage(tmp_path):
    p = tmp_path / "m.bin"
    save_model(GcnModel(weights=[np.zeros((3, 3))]), p)
    p.write_bytes(p.read_bytes() + b"\x00")
    with pytest.raises(TruncatedFile):
        load_model(p)
