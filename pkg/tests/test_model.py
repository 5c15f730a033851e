import numpy as np
import pytest
import scipy.sparse as sp

from signn import tensor as tn
from signn.errors import ConfigError, DimensionError
from signn.graph import DynamicGraph, SbmConfig, generate_sbm
from signn.model import (ClassifierHead, MtgAggregator, SignnModel, TaLayer, aggregate_neighbors, mtg_aggregate,
                         predict, ta_update, temporal_pool)
from signn.neuron import BlifState, blif_step, firing_rate
from signn.sampling import NeighborSample, sample_plan
from signn.tensor import Param, Smooth, Surrogate, Tensor


def test_aggregate_examples():
    h = np.array([[1.0, 0.0], [0.0, 1.0], [3.0, 4.0]])
    out = aggregate_neighbors(h, [NeighborSample(2, 1, np.array([1]))]).data
    np.testing.assert_array_equal(out[2], [0.0, 1.0])
    out = aggregate_neighbors(h, [NeighborSample(2, 1, np.array([0, 1]))]).data
    np.testing.assert_array_equal(out[2], [0.5, 0.5])
    a = aggregate_neighbors(h, [NeighborSample(0, 1, np.array([2, 1, 1]))]).data
    b = aggregate_neighbors(h, [NeighborSample(0, 1, np.array([1, 2, 1]))]).data
    np.testing.assert_array_equal(a, b)


def _layer(d_in=3, d_out=4, seed=0, **kw):
    return TaLayer(d_in, d_out, np.random.default_rng(seed), **kw)


def test_ta_gating_extremes():
    layer = _layer()
    x = np.random.default_rng(1).normal(size=(5, 3))
    # zero drive from rest never spikes; a large positive drive always does
    layer.w_s.data[...] = 0.0
    layer.b_s.data[...] = 0.0
    layer.neurons.reset_state()
    np.testing.assert_array_equal(ta_update(layer, x, x).data, 0.0)
    layer.b_s.data[...] = 100.0
    layer.neurons.reset_state()
    big = np.abs(x) + 1.0
    out = ta_update(layer, big, big).data
    h_big = tn.sigmoid(Tensor(big) @ layer.w_h + Tensor(big) @ layer.b_h).data
    np.testing.assert_array_equal(out, h_big)


def test_ta_zero_weights_example():
    layer = _layer()
    for p in (layer.w_h, layer.b_h, layer.w_s, layer.b_s):
        p.data[...] = 0.0
    x = np.zeros((2, 3))
    layer.neurons.reset_state()
    np.testing.assert_array_equal(ta_update(layer, x, x).data, 0.0)
    np.testing.assert_array_equal(tn.sigmoid(Tensor(x) @ layer.w_h).data, 0.5)


def test_ta_nonzero_entries_in_open_unit_interval():
    layer = _layer(seed=3)
    rng = np.random.default_rng(0)
    for _ in range(10):
        out = ta_update(layer, rng.normal(size=(20, 3)) * 3, rng.normal(size=(20, 3)) * 3).data
        nz = out[out != 0]
        assert np.all((nz > 0) & (nz < 1))


def test_ta_disabled_bypasses_neurons():
    layer = _layer(ta_enabled=False)
    x = np.ones((2, 3))
    out = ta_update(layer, x, x).data
    np.testing.assert_allclose(out, tn.sigmoid(Tensor(x) @ layer.w_h + Tensor(x) @ layer.b_h).data)
    assert len(layer.neurons.trace) == 0


def test_ta_shape_error():
    with pytest.raises(DimensionError):
        ta_update(_layer(), np.ones((2, 5)), np.ones((2, 5)))


def test_temporal_pool_examples():
    z = [[1.0, 2.0], [3.0, 4.0]]
    np.testing.assert_array_equal(temporal_pool(z, [[0.5, 1.0], [1.0, 0.5]]).data, [2.5, 5.0])
    np.testing.assert_array_equal(temporal_pool(z, np.ones((2, 2))).data, [3.0, 7.0])
    np.testing.assert_array_equal(temporal_pool(z, np.zeros((2, 2))).data, [0.0, 0.0])
    with pytest.raises(DimensionError):
        temporal_pool(z, np.ones((2, 3)))


def test_mtg_aggregate_examples():
    rng = np.random.default_rng(0)
    z1, z2 = np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]])
    np.testing.assert_array_equal(mtg_aggregate(MtgAggregator("average", 2, 2, rng), [z1, z2]).data, [[0.5, 0.5]])
    np.testing.assert_array_equal(mtg_aggregate(MtgAggregator("max", 2, 2, rng), [z1, z2]).data, [[1.0, 1.0]])
    z = rng.normal(size=(4, 2))
    for s in ("average", "max", "attention"):
        np.testing.assert_allclose(mtg_aggregate(MtgAggregator(s, 2, 1, rng), [z]).data, z, rtol=0, atol=1e-15)
    zs = [rng.normal(size=(4, 2)) for _ in range(3)]
    att = mtg_aggregate(MtgAggregator("attention", 2, 3, rng), zs).data
    avg = mtg_aggregate(MtgAggregator("average", 2, 3, rng), zs).data
    np.testing.assert_allclose(att, avg, atol=1e-15)
    out = mtg_aggregate(MtgAggregator("concat", 2, 3, rng), zs)
    assert out.shape == (4, 2)
    for s in ("average", "max"):
        agg = MtgAggregator(s, 2, 3, rng)
        np.testing.assert_allclose(mtg_aggregate(agg, zs).data, mtg_aggregate(agg, zs[::-1]).data, atol=1e-15)
    with pytest.raises(ConfigError):
        mtg_aggregate(MtgAggregator("average", 2, 1, rng), [])


def test_predict_examples():
    head = ClassifierHead(Param(np.zeros((3, 3)), "w"), Param([[0.0, 1.0, 0.0]], "b"))
    z = np.random.default_rng(0).normal(size=(6, 3))
    assert predict(head, z).data.argmax(axis=1).tolist() == [1] * 6
    head = ClassifierHead(Param(np.eye(3), "w"), Param(np.zeros((1, 3)), "b"))
    assert predict(head, np.eye(3)).data.argmax(axis=1).tolist() == [0, 1, 2]
    shifted = ClassifierHead(head.weights, Param(np.full((1, 3), 7.5), "b"))
    assert np.array_equal(predict(shifted, z).data.argmax(1), predict(head, z).data.argmax(1))


def _full_mean(g, t):
    a = g.snapshot(t).adjacency().astype(float).tolil()
    for v in range(g.num_nodes):
        if a.rows[v] == []:
            a[v, v] = 1.0
    a = a.tocsr()
    return sp.diags(1.0 / np.asarray(a.sum(axis=1)).ravel()) @ a


def _full_aggs(g, model):
    return [[[_full_mean(g, t)] * model.config["K"] for t in steps] for steps in model.plan.indices]


def test_single_step_channel():
    g = DynamicGraph.from_edge_lists(4, [[(0, 1), (2, 3)]], num_classes=2, labels=[0, 0, 1, 1])
    m = SignnModel(4, 2, 1, d_in=3, d=5, K=1, intervals=(1,), seed=0)
    out = m.forward(_full_aggs(g, m))
    assert out.embeddings[0].shape == (4, 5, 1)
    layer = m.channels[0][0]
    layer.neurons.reset_state()
    h = m.features
    col = ta_update(layer, h, aggregate_neighbors(h, _full_mean(g, 1)))
    np.testing.assert_array_equal(out.embeddings[0].data[..., 0], col.data)


def test_edgeless_columns_differ_only_through_neuron_state():
    g = DynamicGraph.from_edge_lists(3, [[], []])
    m = SignnModel(3, 2, 2, d_in=4, d=6, K=1, intervals=(1,), seed=2, embed_scale=1.5)
    out = m.forward(_full_aggs(g, m))
    layer = m.channels[0][0]
    x = m.features.data
    h_tilde = tn.sigmoid(Tensor(x) @ layer.w_h + Tensor(x) @ layer.b_h).data
    drive = x @ layer.w_s.data + x @ layer.b_s.data
    st = BlifState.rest(drive.shape, layer.neurons.params)
    s1, st = blif_step(drive, st, layer.neurons.params)
    s2, _ = blif_step(drive, st, layer.neurons.params)
    np.testing.assert_array_equal(out.embeddings[0].data[..., 0], s1.data * h_tilde)
    np.testing.assert_array_equal(out.embeddings[0].data[..., 1], s2.data * h_tilde)


def test_causality():
    g = generate_sbm(SbmConfig(n=30, T=5, p_in=0.3, p_out=0.05, seed=0))
    later = [list(zip(*np.nonzero(np.triu(s.adjacency().toarray(), 1)))) for s in g.snapshots]
    later[3] = [(0, v) for v in range(1, 30)]
    g2 = DynamicGraph.from_edge_lists(30, later)
    m = SignnModel(30, 3, 5, d_in=4, d=6, K=2, intervals=(1, 2), seed=1, embed_scale=1.0)
    a = m.forward(_full_aggs(g, m)).embeddings
    b = m.forward(_full_aggs(g2, m)).embeddings
    np.testing.assert_array_equal(a[0].data[..., :3], b[0].data[..., :3])
    assert not np.array_equal(a[0].data[..., 3], b[0].data[..., 3])
    # channel 2 visits steps 1, 3, 5
    np.testing.assert_array_equal(a[1].data[..., :2], b[1].data[..., :2])


def test_no_ta_independent_of_neuron_params():
    g = generate_sbm(SbmConfig(n=30, T=4, p_in=0.3, p_out=0.05, seed=0))
    m = SignnModel(30, 3, 4, d_in=4, d=6, intervals=(1, 2), ta_enabled=False, seed=0)
    aggs = sample_plan(g, m.plan, (3, 3), np.random.default_rng(0))
    before = m.forward(aggs).scores.data.copy()
    for p in m.parameters():
        if "neuron" in p.name:
            p.data += 0.8
    np.testing.assert_array_equal(m.forward(aggs).scores.data, before)


def test_gating_sparsity_identity():
    g = generate_sbm(SbmConfig(n=40, T=6, p_in=0.3, p_out=0.05, drift_fraction=0.1, seed=0))
    m = SignnModel(40, 3, 6, d_in=4, d=8, seed=0)
    out = m.forward(sample_plan(g, m.plan, (5, 5), np.random.default_rng(0)))
    for c in range(m.plan.num_channels):
        zero_frac = float((out.embeddings[c].data == 0).mean())
        rate = float(firing_rate(out.final_traces[c]).mean())
        assert zero_frac == pytest.approx(1 - rate, abs=1e-15)
        np.testing.assert_array_equal(out.final_spikes[c] == 0, out.embeddings[c].data == 0)


def test_seed_independence_when_sampling_is_exhaustive():
    # cycle: every node has degree 2, so fanout 2 draws the full neighborhood
    edges = [(v, (v + 1) % 12) for v in range(12)]
    g = DynamicGraph.from_edge_lists(12, [edges] * 3)
    m = SignnModel(12, 2, 3, d_in=4, d=5, K=1, intervals=(1, 2), seed=0)
    a = m.forward(sample_plan(g, m.plan, (2,), np.random.default_rng(1))).scores.data
    b = m.forward(sample_plan(g, m.plan, (2,), np.random.default_rng(99))).scores.data
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-15)


def test_checkpoint_round_trip(tmp_path):
    g = generate_sbm(SbmConfig(n=20, T=3, p_in=0.3, p_out=0.05, seed=0))
    for strategy in ("concat", "attention"):
        m = SignnModel(20, 3, 3, d_in=4, d=5, strategy=strategy, seed=4)
        for p in m.parameters():
            p.data += np.random.default_rng(0).normal(size=p.data.shape)
        m.save(tmp_path / "m.ckpt")
        m2 = SignnModel.load(tmp_path / "m.ckpt")
        assert m2.config == m.config
        for name, p in m.named_parameters().items():
            assert np.array_equal(p.data, m2.named_parameters()[name].data)
        aggs = sample_plan(g, m.plan, (3, 3), np.random.default_rng(0))
        np.testing.assert_array_equal(m.forward(aggs).scores.data, m2.forward(aggs).scores.data)


def test_checkpoint_with_fixed_features(tmp_path):
    feats = np.random.default_rng(0).normal(size=(6, 3))
    m = SignnModel(6, 2, 2, d=4, features=feats)
    assert m.embedding is None and m.config["d_in"] == 3
    m.save(tmp_path / "f.ckpt")
    np.testing.assert_array_equal(SignnModel.load(tmp_path / "f.ckpt").features.data, feats)


def test_smooth_mode_gradients_reach_every_group():
    g = generate_sbm(SbmConfig(n=10, T=4, k_communities=2, p_in=0.6, p_out=0.1, drift_fraction=0.2, seed=0))
    m = SignnModel(10, 2, 4, d_in=3, d=4, K=1, intervals=(1, 2), seed=0)
    aggs = sample_plan(g, m.plan, (3,), np.random.default_rng(0))
    loss = tn.cross_entropy(m.forward(aggs, Smooth(4.0)).scores, g.labels)
    tn.reset_grads(m.parameters())
    loss.backward()
    for p in m.parameters():
        assert np.abs(p.grad).sum() > 0, p.name
