"""Post-hoc analyses: spike activity against graph growth, and embedding export."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError
from .graph import DynamicGraph, degree_increment_series
from .neuron import SpikeTrace, firing_rate


@dataclass
class SpikeDegreeReport:
    steps: list
    rates: list
    increments: list
    correlation: float | None

    def as_dict(self) -> dict:
        return dict(steps=self.steps, rates=self.rates, increments=self.increments,
                    correlation=self.correlation)


def pearson(x, y) -> float | None:
    """Pearson correlation, or ``None`` when either series is constant."""
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    if len(x) < 2:
        return None
    dx, dy = x - x.mean(), y - y.mean()
    den = np.sqrt((dx * dx).sum() * (dy * dy).sum())
    if den == 0:
        return None
    return float((dx * dy).sum() / den)


def spike_vs_degree(trace: SpikeTrace, g: DynamicGraph) -> SpikeDegreeReport:
    """Align per-step firing rate with the degree increment from step 2 on.

    ``trace`` must hold one entry per snapshot (the unit-interval channel).
    """
    if len(trace) != g.num_steps:
        raise AlignmentError(f"trace has {len(trace)} steps but the graph has {g.num_steps}")
    rates = firing_rate(trace)[1:]
    inc = degree_increment_series(g)
    return SpikeDegreeReport(list(range(2, g.num_steps + 1)), rates.tolist(), inc.tolist(), pearson(rates, inc))


def write_spike_degree_csv(report: SpikeDegreeReport, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "rate", "increment"])
        for t, r, i in zip(report.steps, report.rates, report.increments):
            w.writerow([t, f"{r:.17g}", f"{i:.17g}"])


def export_embeddings(z: np.ndarray, spikes: np.ndarray | None, labels, emb_path, spike_path=None):
    """Write final embeddings (``node, z_0..z_{d-1}, label``) and flattened spike stacks.

    ``spikes`` is the n x d x T binary final-layer stack of one channel; each
    row of the spike file is that node's stack flattened step-major.
    """
    z = np.asarray(z, dtype=np.float64)
    n, d = z.shape
    labels = np.full(n, -1) if labels is None else np.asarray(labels)
    with open(emb_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["node", *(f"z{i}" for i in range(d)), "label"])
        for v in range(n):
            w.writerow([v, *(f"{x:.17g}" for x in z[v]), int(labels[v])])
    if spike_path is None or spikes is None:
        return
    flat = np.asarray(spikes).transpose(0, 2, 1).reshape(n, -1)
    steps, width = spikes.shape[2], spikes.shape[1]
    with open(spike_path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(f"s{t + 1}_{i}" for t in range(steps) for i in range(width)) + "\n")
        for row in flat:
            fh.write(",".join("1" if x else "0" for x in row) + "\n")


def read_embeddings(path):
    """Inverse of :func:`export_embeddings` for the embedding file: ``(z, labels)``."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 1:-1], data[:, -1].astype(np.int64)
