"""Per-snapshot neighbor sampling and multi-granularity snapshot plans."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError
from .graph import DynamicGraph


def mtg_indices(T: int, delta: int) -> list[int]:
    """1-based steps ``1, 1+delta, 1+2*delta, ...`` not exceeding ``T``."""
    if T < 1:
        raise ConfigError(f"T must be >= 1, got {T}")
    if delta < 1:
        raise ConfigError(f"sampling interval must be >= 1, got {delta}")
    return list(range(1, T + 1, delta))


@dataclass(frozen=True)
class MtgPlan:
    intervals: tuple
    indices: tuple

    @property
    def num_channels(self) -> int:
        return len(self.intervals)

    @property
    def total_snapshots(self) -> int:
        return sum(len(ix) for ix in self.indices)


def build_plan(T: int, intervals) -> MtgPlan:
    intervals = tuple(int(i) for i in intervals)
    if not intervals or intervals[0] != 1:
        raise ConfigError(f"intervals must start with 1 (the reference granularity), got {list(intervals)}")
    if any(b <= a for a, b in zip(intervals, intervals[1:])):
        raise ConfigError(f"intervals must be strictly increasing, got {list(intervals)}")
    return MtgPlan(intervals, tuple(tuple(mtg_indices(T, d)) for d in intervals))


@dataclass(frozen=True)
class NeighborSample:
    node: int
    step: int
    neighbors: np.ndarray


def sample_neighbors(g: DynamicGraph, v: int, t: int, fanout: int, rng: np.random.Generator) -> NeighborSample:
    """Uniform sample of ``v``'s neighbors at step ``t``.

    Without replacement when the degree covers ``fanout``, with replacement
    up to ``fanout`` draws otherwise, and ``[v]`` for an isolated node.
    """
    nbrs = g.snapshot(t).neighbors(v)
    if len(nbrs) == 0:
        picked = np.array([v], dtype=np.int64)
    elif len(nbrs) >= fanout:
        picked = rng.choice(nbrs, size=fanout, replace=False)
    else:
        picked = rng.choice(nbrs, size=fanout, replace=True)
    return NeighborSample(v, t, picked)


def mean_matrix(samples, n: int) -> sp.csr_matrix:
    """Row-stochastic matrix whose row ``v`` averages ``v``'s sampled neighbors."""
    rows, cols, vals = [], [], []
    for s in samples:
        k = len(s.neighbors)
        rows.append(np.full(k, s.node))
        cols.append(np.asarray(s.neighbors))
        vals.append(np.full(k, 1.0 / k))
    if not rows:
        return sp.csr_matrix((n, n))
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))


def sample_aggregator(g: DynamicGraph, t: int, fanout: int, rng: np.random.Generator) -> sp.csr_matrix:
    """Mean-aggregation matrix for every node of snapshot ``t`` at once.

    Follows the same rule as :func:`sample_neighbors`, vectorised over
    nodes (the random stream differs, the distribution does not).
    """
    snap = g.snapshot(t)
    n = snap.num_nodes
    deg = snap.degrees()
    indptr, indices = snap.indptr, snap.indices
    owner = np.repeat(np.arange(n), deg)

    isolated = np.flatnonzero(deg == 0)
    rows, cols, vals = [isolated], [isolated], [np.ones(len(isolated))]

    # rank edges within each row by a random key; the fanout smallest form a
    # uniform subset without replacement
    full = deg[owner] >= fanout
    keys = rng.random(len(indices))
    order = np.argsort(owner + keys, kind="stable")
    rank = np.empty(len(indices), dtype=np.int64)
    rank[order] = np.arange(len(indices)) - indptr[owner[order]]
    keep = full & (rank < fanout)
    rows.append(owner[keep])
    cols.append(indices[keep])
    vals.append(np.full(int(keep.sum()), 1.0 / fanout))

    short = np.flatnonzero((deg > 0) & (deg < fanout))
    if len(short):
        draws = rng.integers(0, deg[short][:, None], size=(len(short), fanout))
        rows.append(np.repeat(short, fanout))
        cols.append(indices[(indptr[short][:, None] + draws).reshape(-1)])
        vals.append(np.full(len(short) * fanout, 1.0 / fanout))

    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )


def sample_plan(g: DynamicGraph, plan: MtgPlan, fanouts, rng: np.random.Generator) -> list:
    """Aggregation matrices indexed ``[channel][step position][layer]``."""
    return [
        [[sample_aggregator(g, t, f, rng) for f in fanouts] for t in steps]
        for steps in plan.indices
    ]
