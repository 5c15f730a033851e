"""Discrete dynamic graphs: storage, edge-stream files, SBM generator, degree statistics."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, DataError, ParseError, RangeError

_HEADER = re.compile(r"#\s*(.*)")


@dataclass(frozen=True)
class Snapshot:
    """Adjacency of one step in CSR form.

    ``neighbors(v)`` is sorted and duplicate-free; a node with no edges at
    this step has an empty list.
    """

    step: int
    indptr: np.ndarray
    indices: np.ndarray

    @classmethod
    def from_edges(cls, step: int, n: int, src, dst, directed=False, self_loops=False) -> "Snapshot":
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if not directed:
            src, dst = np.concatenate([src, dst]), np.concatenate([dst, src])
        if not self_loops:
            keep = src != dst
            src, dst = src[keep], dst[keep]
        if len(src):
            pairs = np.unique(src * n + dst)
            src, dst = pairs // n, pairs % n
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        np.cumsum(indptr, out=indptr)
        return cls(step, indptr, dst.astype(np.int64))

    @property
    def num_nodes(self) -> int:
        return len(self.indptr) - 1

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def adjacency(self) -> sp.csr_matrix:
        n = self.num_nodes
        data = np.ones(len(self.indices))
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(n, n))

    def edges(self, directed=False):
        """Edge list as (src, dst) arrays; undirected graphs report each edge once with src <= dst."""
        src = np.repeat(np.arange(self.num_nodes), self.degrees())
        dst = self.indices
        if not directed:
            keep = src <= dst
            src, dst = src[keep], dst[keep]
        return src, dst


@dataclass
class DynamicGraph:
    num_nodes: int
    snapshots: list
    labels: np.ndarray | None = None
    num_classes: int = 0
    features: np.ndarray | None = None
    directed: bool = False

    def __post_init__(self):
        if not self.snapshots:
            raise ConfigError("a dynamic graph needs at least one snapshot")
        for i, s in enumerate(self.snapshots, start=1):
            if s.step != i or s.num_nodes != self.num_nodes:
                raise ConfigError(f"snapshot {i} is inconsistent with the node set")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if len(self.labels) != self.num_nodes:
                raise ConfigError(f"{len(self.labels)} labels for {self.num_nodes} nodes")
            if not self.num_classes:
                self.num_classes = int(self.labels.max()) + 1
            if self.labels.min() < 0 or self.labels.max() >= self.num_classes:
                raise ConfigError(f"class ids must lie in [0, {self.num_classes})")
        if self.features is not None:
            self.features = np.asarray(self.features, dtype=np.float64)
            if self.features.shape[0] != self.num_nodes:
                raise ConfigError("feature matrix must have one row per node")

    @property
    def num_steps(self) -> int:
        return len(self.snapshots)

    def snapshot(self, t: int) -> Snapshot:
        if not 1 <= t <= self.num_steps:
            raise RangeError(f"step {t} outside [1, {self.num_steps}]")
        return self.snapshots[t - 1]

    @classmethod
    def from_edge_lists(cls, n: int, edges_per_step, **kwargs) -> "DynamicGraph":
        """Build from a list (one entry per step) of ``(u, v)`` pair iterables."""
        directed = kwargs.get("directed", False)
        self_loops = kwargs.pop("self_loops", False)
        snaps = []
        for t, edges in enumerate(edges_per_step, start=1):
            arr = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
            snaps.append(Snapshot.from_edges(t, n, arr[:, 0], arr[:, 1], directed, self_loops))
        return cls(n, snaps, **kwargs)


def degree(g: DynamicGraph, t: int) -> np.ndarray:
    return g.snapshot(t).degrees()


def degree_increment_series(g: DynamicGraph) -> np.ndarray:
    """Per step t >= 2: positive degree gain summed over nodes, over total degree at t.

    Entry ``i`` of the result belongs to step ``i + 2``.
    """
    if g.num_steps < 2:
        raise ConfigError("degree increments need at least two steps")
    degs = np.stack([s.degrees() for s in g.snapshots]).astype(np.float64)
    gain = np.clip(degs[1:] - degs[:-1], 0, None).sum(axis=1)
    total = degs[1:].sum(axis=1)
    return np.divide(gain, total, out=np.zeros_like(gain), where=total > 0)


# edge-stream files

@dataclass
class EdgeStreamFormat:
    """Options for reading ``src dst t`` files.

    ``num_nodes`` and ``num_steps`` override the header and the values
    inferred from the data.
    """

    num_nodes: int | None = None
    num_steps: int | None = None
    num_classes: int | None = None
    labels_path: str | Path | None = None
    directed: bool = False
    self_loops: bool = False


def _parse_header(line: str) -> dict:
    meta = {}
    for tok in line.lstrip("#").split():
        key, sep, val = tok.partition("=")
        if sep and key in ("n", "T", "classes"):
            try:
                meta[key] = int(val)
            except ValueError:
                raise ParseError(f"bad header value {tok!r}", 1) from None
    return meta


def load_edge_stream(path, fmt: EdgeStreamFormat | None = None) -> DynamicGraph:
    fmt = fmt or EdgeStreamFormat()
    path = Path(path)
    if not path.exists():
        raise DataError(f"edge stream {path} not found")
    meta, rows = {}, []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            if text.startswith("#"):
                if lineno == 1:
                    meta = _parse_header(text)
                continue
            parts = text.split()
            if len(parts) != 3:
                raise ParseError(f"expected 'src dst t', got {text!r}", lineno)
            try:
                u, v, t = (int(p) for p in parts)
            except ValueError:
                raise ParseError(f"non-integer token in {text!r}", lineno) from None
            if u < 0 or v < 0:
                raise ParseError(f"negative node id in {text!r}", lineno)
            rows.append((u, v, t, lineno))

    n = fmt.num_nodes or meta.get("n")
    T = fmt.num_steps or meta.get("T")
    data = np.array([r[:3] for r in rows], dtype=np.int64).reshape(-1, 3)
    if n is None:
        if not len(data):
            raise DataError(f"{path}: cannot infer node count from an empty file")
        n = int(data[:, :2].max()) + 1
    if T is None:
        if not len(data):
            raise DataError(f"{path}: cannot infer step count from an empty file")
        T = int(data[:, 2].max())
    for u, v, t, lineno in rows:
        if t < 1 or t > T:
            raise RangeError(f"line {lineno}: step {t} outside [1, {T}]")
        if u >= n or v >= n:
            raise RangeError(f"line {lineno}: node id >= n={n}")

    snaps = []
    for t in range(1, T + 1):
        sel = data[data[:, 2] == t]
        snaps.append(Snapshot.from_edges(t, n, sel[:, 0], sel[:, 1], fmt.directed, fmt.self_loops))

    labels = None
    num_classes = fmt.num_classes or meta.get("classes") or 0
    if fmt.labels_path is not None:
        labels = load_labels(fmt.labels_path, n)
    return DynamicGraph(n, snaps, labels=labels, num_classes=num_classes, directed=fmt.directed)


def load_labels(path, n: int) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise DataError(f"labels file {path} not found")
    labels = np.full(n, -1, dtype=np.int64)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            try:
                node, cls = int(parts[0]), int(parts[1])
            except (ValueError, IndexError):
                raise ParseError(f"expected 'node_id class_id', got {text!r}", lineno) from None
            if not 0 <= node < n:
                raise RangeError(f"line {lineno}: node {node} outside [0, {n})")
            labels[node] = cls
    if (labels < 0).any():
        missing = np.flatnonzero(labels < 0)[:5].tolist()
        raise DataError(f"{path}: no label for nodes {missing}...")
    return labels


def write_edge_stream(g: DynamicGraph, path, header=True):
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"# n={g.num_nodes} T={g.num_steps} classes={g.num_classes}\n")
        for s in g.snapshots:
            src, dst = s.edges(g.directed)
            for u, v in zip(src.tolist(), dst.tolist()):
                fh.write(f"{u} {v} {s.step}\n")


def write_labels(g: DynamicGraph, path):
    if g.labels is None:
        raise DataError("graph has no labels to write")
    with open(path, "w", encoding="utf-8") as fh:
        for v, c in enumerate(g.labels.tolist()):
            fh.write(f"{v} {c}\n")


# synthetic data

@dataclass(frozen=True)
class SbmConfig:
    n: int = 300
    T: int = 10
    k_communities: int = 3
    p_in: float = 0.1
    p_out: float = 0.01
    drift_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.T < 1 or self.k_communities < 1:
            raise ConfigError("n, T and k_communities must be positive")
        if not 0 <= self.p_out < self.p_in <= 1:
            raise ConfigError(f"need 0 <= p_out < p_in <= 1, got p_in={self.p_in}, p_out={self.p_out}")
        if not 0 <= self.drift_fraction <= 1:
            raise ConfigError(f"drift_fraction must lie in [0, 1], got {self.drift_fraction}")


def generate_sbm(cfg: SbmConfig) -> DynamicGraph:
    """Stochastic block model snapshots with communities that drift over time.

    Communities start balanced (sizes differ by at most one).  Before every
    step after the first, ``round(drift_fraction * n)`` nodes chosen
    uniformly redraw their community uniformly from all ``k``.  Labels are
    the communities at the final step.
    """
    rng = np.random.default_rng(cfg.seed)
    n, k = cfg.n, cfg.k_communities
    comm = rng.permutation(np.arange(n) % k)
    iu, ju = np.triu_indices(n, k=1)
    n_drift = int(round(cfg.drift_fraction * n))
    snaps = []
    for t in range(1, cfg.T + 1):
        if t > 1 and n_drift:
            movers = rng.choice(n, size=n_drift, replace=False)
            comm[movers] = rng.integers(0, k, size=n_drift)
        prob = np.where(comm[iu] == comm[ju], cfg.p_in, cfg.p_out)
        hit = rng.random(len(iu)) < prob
        snaps.append(Snapshot.from_edges(t, n, iu[hit], ju[hit]))
    return DynamicGraph(n, snaps, labels=comm.copy(), num_classes=k)


def generate_burst(n=200, T=10, k_communities=3, p_in=0.03, p_out=0.003, burst_step=5, factor=3.0,
                   seed=0) -> DynamicGraph:
    """Static community graph whose edge set grows ``factor``-fold at ``burst_step`` and stays.

    The denser edge set is a superset of the sparse one, so the degree
    increment is zero everywhere except at the burst.
    """
    if not 1 < burst_step <= T:
        raise ConfigError(f"burst_step must lie in (1, T], got {burst_step}")
    if not 0 <= factor * p_in <= 1 or not 0 <= p_out < p_in:
        raise ConfigError("need 0 <= p_out < p_in and factor * p_in <= 1")
    rng = np.random.default_rng(seed)
    comm = rng.permutation(np.arange(n) % k_communities)
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(comm[iu] == comm[ju], p_in, p_out)
    u = rng.random(len(iu))
    sparse, dense = u < prob, u < factor * prob
    snaps = [Snapshot.from_edges(t, n, iu[m], ju[m])
             for t, m in ((t, sparse if t < burst_step else dense) for t in range(1, T + 1))]
    return DynamicGraph(n, snaps, labels=comm, num_classes=k_communities)
