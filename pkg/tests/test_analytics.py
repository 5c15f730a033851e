import numpy as np
import pytest

from signn.analytics import export_embeddings, pearson, read_embeddings, spike_vs_degree, write_spike_degree_csv
from signn.errors import AlignmentError, ConfigError
from signn.graph import DynamicGraph, degree_increment_series, generate_burst
from signn.neuron import SpikeTrace


def test_constant_graph_gives_null_correlation():
    g = DynamicGraph.from_edge_lists(3, [[(0, 1)]] * 4)
    rep = spike_vs_degree(SpikeTrace([1.0, 2.0, 0.0, 3.0], [3] * 4), g)
    assert rep.increments == [0.0, 0.0, 0.0] and rep.correlation is None
    assert rep.steps == [2, 3, 4]


def test_identical_series_correlate_perfectly():
    g = DynamicGraph.from_edge_lists(4, [[], [(0, 1)], [(0, 1), (1, 2)], [(0, 1), (1, 2), (2, 3)]])
    inc = degree_increment_series(g)
    units = 1000
    trace = SpikeTrace([0.0] + list(inc * units), [units] * 4)
    assert spike_vs_degree(trace, g).correlation == pytest.approx(1.0, abs=1e-12)


def test_alignment_error():
    g = DynamicGraph.from_edge_lists(3, [[(0, 1)]] * 4)
    with pytest.raises(AlignmentError):
        spike_vs_degree(SpikeTrace([1.0], [3]), g)


def test_pearson_against_numpy():
    rng = np.random.default_rng(0)
    for _ in range(50):
        x, y = rng.normal(size=9), rng.normal(size=9)
        assert pearson(x, y) == pytest.approx(np.corrcoef(x, y)[0, 1], abs=1e-12)


def test_burst_graph_shape():
    g = generate_burst(n=90, T=8, burst_step=5, seed=1)
    inc = degree_increment_series(g)
    assert inc[3] > 0 and np.all(np.delete(inc, 3) == 0)
    edges = [s.degrees().sum() for s in g.snapshots]
    assert edges[4] > 2 * edges[3]
    with pytest.raises(ConfigError):
        generate_burst(burst_step=1)


def test_spike_degree_csv(tmp_path):
    g = generate_burst(n=30, T=6, p_in=0.1, p_out=0.01, seed=0)
    rep = spike_vs_degree(SpikeTrace([1.0, 2.0, 3.0, 4.0, 9.0, 4.0], [10] * 6), g)
    write_spike_degree_csv(rep, tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "step,rate,increment" and len(lines) == 6


def test_export_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    n, d, T = 7, 64, 3
    z = rng.normal(size=(n, d)) / 3
    spikes = (rng.random((n, d, T)) < 0.4).astype(float)
    labels = rng.integers(0, 3, size=n)
    export_embeddings(z, spikes, labels, tmp_path / "e.csv", tmp_path / "s.csv")
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert len(lines) == n + 1 and all(len(line.split(",")) == d + 2 for line in lines)
    z2, l2 = read_embeddings(tmp_path / "e.csv")
    assert np.array_equal(z, z2) and np.array_equal(labels, l2)
    body = (tmp_path / "s.csv").read_text().split("\n", 1)[1]
    assert set(body) <= set("01,\n")
    flat = np.loadtxt(tmp_path / "s.csv", delimiter=",", skiprows=1)
    assert np.array_equal(flat.reshape(n, T, d).transpose(0, 2, 1), spikes)
