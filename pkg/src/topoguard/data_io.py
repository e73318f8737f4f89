"""Dataset loading, synthetic graph generation, and model persistence.

Three graph sources are supported: the citation content/cites text format,
a plain directory format (edges.txt / features.csv / labels.txt /
train_mask.txt), and a stochastic block model generator. Model checkpoints
use a small little-endian binary format with magic "PGRM" that round-trips
weights bit-exactly.
"""

from __future__ import annotations

import logging
import struct
from pathlib import Path

import numpy as np

from .gnn import GcnModel
from .graphs import Graph

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"PGRM"
CHECKPOINT_VERSION = 1


class MalformedLine(ValueError):
    """A text input line does not parse; carries the 1-based line number."""

    def __init__(self, path, line_no, detail):
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {detail}")


class InconsistentFeatureWidth(ValueError):
    """Feature rows disagree on length."""


class DimensionMismatch(ValueError):
    """Per-node files disagree on the node count, or an index is out of range."""


class NonSymmetricInput(ValueError):
    """An edge line violates the i < j convention."""


class BadMagic(ValueError):
    """Checkpoint file does not start with the expected magic."""


class VersionMismatch(ValueError):
    """Checkpoint version is not supported."""


class TruncatedFile(ValueError):
    """Checkpoint payload is shorter (or longer) than its header promises."""


def _stratified_mask(labels: np.ndarray, fraction: float, rng: np.random.Generator) -> np.ndarray:
    """Per-class sample of round(fraction * class size), at least 1 per class."""
    mask = np.zeros(labels.shape[0], dtype=bool)
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        take = max(1, int(round(fraction * members.size)))
        mask[rng.choice(members, size=take, replace=False)] = True
    return mask


def load_planetoid(content_path, cites_path, train_fraction: float = 0.1,
                   seed: int = 0) -> Graph:
    """Load a citation graph from content/cites files.

    Content lines are ``<id> <f_1> ... <f_F> <label>`` (whitespace
    separated); node ids and label strings both map to dense indices in
    first-appearance order. Cites lines are ``<cited> <citing>``; edges are
    symmetrized and deduplicated, and lines referencing unknown ids or a
    node's own id are dropped (counted in a warning). The files carry no
    train split, so a per-class stratified mask of ``train_fraction`` is
    drawn from ``seed``.
    """
    content_path, cites_path = Path(content_path), Path(cites_path)
    ids = {}
    label_ids = {}
    feature_rows = []
    labels = []
    width = None
    with content_path.open() as fh:
        for line_no, line in enumerate(fh, start=1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) < 3:
                raise MalformedLine(content_path, line_no,
                                    f"expected id, features, label; got {len(fields)} fields")
            node_id, label = fields[0], fields[-1]
            if node_id in ids:
                raise MalformedLine(content_path, line_no, f"duplicate node id {node_id!r}")
            feats = fields[1:-1]
            if width is None:
                width = len(feats)
            elif len(feats) != width:
                raise InconsistentFeatureWidth(
                    f"{content_path}:{line_no}: {len(feats)} features, expected {width}")
            ids[node_id] = len(ids)
            label_ids.setdefault(label, len(label_ids))
            labels.append(label_ids[label])
            feature_rows.append([float(v) for v in feats])

    n = len(ids)
    adjacency = np.zeros((n, n))
    dropped = 0
    with cites_path.open() as fh:
        for line_no, line in enumerate(fh, start=1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != 2:
                raise MalformedLine(cites_path, line_no,
                                    f"expected two ids, got {len(fields)} fields")
            a, b = fields
            if a not in ids or b not in ids or a == b:
                dropped += 1
                continue
            adjacency[ids[a], ids[b]] = adjacency[ids[b], ids[a]] = 1.0
    if dropped:
        logger.warning("%s: dropped %d cite lines (unknown ids or self-citations)",
                       cites_path, dropped)

    labels = np.asarray(labels, dtype=np.int64)
    rng = np.random.default_rng(seed)
    mask = _stratified_mask(labels, train_fraction, rng)
    return Graph(adjacency, np.asarray(feature_rows), labels, mask)


def save_graph_dir(g: Graph, path) -> None:
    """Write a graph as edges.txt / features.csv / labels.txt / train_mask.txt.

    Features print with repr precision so float64 values round-trip exactly.
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    rows, cols = np.nonzero(np.triu(g.adjacency, k=1))
    with (path / "edges.txt").open("w") as fh:
        for i, j in zip(rows, cols):
            fh.write(f"{i} {j}\n")
    with (path / "features.csv").open("w") as fh:
        for row in g.features:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")
    with (path / "labels.txt").open("w") as fh:
        for v in g.labels:
            fh.write(f"{v}\n")
    with (path / "train_mask.txt").open("w") as fh:
        for v in g.train_mask:
            fh.write(f"{int(v)}\n")


def load_graph_dir(path) -> Graph:
    """Load a graph saved by ``save_graph_dir``; validates the conventions."""
    path = Path(path)
    features = []
    feat_path = path / "features.csv"
    with feat_path.open() as fh:
        width = None
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            row = [float(v) for v in line.split(",")]
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise InconsistentFeatureWidth(
                    f"{feat_path}:{line_no}: {len(row)} features, expected {width}")
            features.append(row)
    features = np.asarray(features)
    n = features.shape[0]

    labels = np.loadtxt(path / "labels.txt", dtype=np.int64, ndmin=1)
    mask_raw = np.loadtxt(path / "train_mask.txt", dtype=np.int64, ndmin=1)
    if labels.shape[0] != n or mask_raw.shape[0] != n:
        raise DimensionMismatch(
            f"features have {n} rows, labels {labels.shape[0]}, mask {mask_raw.shape[0]}")

    adjacency = np.zeros((n, n))
    edges_path = path / "edges.txt"
    with edges_path.open() as fh:
        for line_no, line in enumerate(fh, start=1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != 2:
                raise MalformedLine(edges_path, line_no,
                                    f"expected two endpoints, got {len(fields)}")
            i, j = int(fields[0]), int(fields[1])
            if i >= j:
                raise NonSymmetricInput(
                    f"{edges_path}:{line_no}: edge ({i}, {j}) violates i < j")
            if j >= n or i < 0:
                raise DimensionMismatch(
                    f"{edges_path}:{line_no}: endpoint out of range for {n} nodes")
            adjacency[i, j] = adjacency[j, i] = 1.0
    return Graph(adjacency, features, labels, mask_raw.astype(bool))


def generate_sbm(blocks, p_in: float, p_out: float, feature_dim: int,
                 feature_signal: float, seed: int) -> Graph:
    """Stochastic block model with class-aligned features.

    One block per class. Pair (i, j), i < j, becomes an edge with
    probability ``p_in`` inside a block and ``p_out`` across blocks.
    Features are ``signal * one_hot(block) + (1 - signal) * uniform`` noise.
    10% of each class (at least one node) is marked for training. All draws
    come from one PRNG seeded with ``seed`` in the order: edges, features,
    train mask.
    """
    blocks = [int(b) for b in blocks]
    if any(b <= 0 for b in blocks):
        raise ValueError("every block must have at least one node")
    if feature_dim < len(blocks):
        raise ValueError("feature_dim must be at least the number of blocks")
    if not (0.0 <= p_in <= 1.0 and 0.0 <= p_out <= 1.0):
        raise ValueError("edge probabilities must lie in [0, 1]")
    if not 0.0 <= feature_signal <= 1.0:
        raise ValueError("feature_signal must lie in [0, 1]")

    n = sum(blocks)
    labels = np.repeat(np.arange(len(blocks), dtype=np.int64), blocks)
    rng = np.random.default_rng(seed)

    iu, ju = np.triu_indices(n, k=1)
    probs = np.where(labels[iu] == labels[ju], p_in, p_out)
    hits = rng.random(iu.size) < probs
    adjacency = np.zeros((n, n))
    adjacency[iu[hits], ju[hits]] = 1.0
    adjacency += adjacency.T

    noise = rng.random((n, feature_dim))
    one_hot = np.zeros((n, feature_dim))
    one_hot[np.arange(n), labels] = 1.0
    features = feature_signal * one_hot + (1.0 - feature_signal) * noise

    mask = _stratified_mask(labels, 0.1, rng)
    return Graph(adjacency, features, labels, mask, n_classes=len(blocks))


def save_model(model: GcnModel, path) -> None:
    """Binary checkpoint: magic, version, layer count, dims, float64 payload.

    Layout (little-endian): ``PGRM`` | u32 version | u32 n_layers |
    n_layers x (u32 rows, u32 cols) | row-major float64 weights, layer by
    layer.
    """
    path = Path(path)
    parts = [CHECKPOINT_MAGIC, struct.pack("<II", CHECKPOINT_VERSION, len(model.weights))]
    for w in model.weights:
        parts.append(struct.pack("<II", w.shape[0], w.shape[1]))
    for w in model.weights:
        parts.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
    path.write_bytes(b"".join(parts))


def load_model(path) -> GcnModel:
    """Read a checkpoint written by ``save_model``; bit-exact round trip."""
    raw = Path(path).read_bytes()
    if len(raw) < 12:
        raise TruncatedFile(f"{path}: {len(raw)} bytes is too short for a header")
    if raw[:4] != CHECKPOINT_MAGIC:
        raise BadMagic(f"{path}: expected magic {CHECKPOINT_MAGIC!r}, found {raw[:4]!r}")
    version, n_layers = struct.unpack("<II", raw[4:12])
    if version != CHECKPOINT_VERSION:
        raise VersionMismatch(f"{path}: version {version}, supported {CHECKPOINT_VERSION}")
    dims_end = 12 + 8 * n_layers
    if len(raw) < dims_end:
        raise TruncatedFile(f"{path}: header promises {n_layers} layers but ends early")
    dims = struct.unpack(f"<{2 * n_layers}I", raw[12:dims_end])
    shapes = [(dims[2 * k], dims[2 * k + 1]) for k in range(n_layers)]
    expected = dims_end + 8 * sum(r * c for r, c in shapes)
    if len(raw) != expected:
        raise TruncatedFile(f"{path}: expected {expected} bytes, found {len(raw)}")
    weights = []
    offset = dims_end
    for r, c in shapes:
        count = r * c
        w = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
        weights.append(w.reshape(r, c).astype(np.float64))
        offset += 8 * count
    return GcnModel(weights=weights)
