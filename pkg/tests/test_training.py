import math

import numpy as np
import pytest

from signn import tensor as tn
from signn.errors import ConfigError, DataError, RangeError
from signn.graph import DynamicGraph, SbmConfig, generate_sbm
from signn.metrics import confusion_matrix, macro_f1, micro_f1
from signn.model import SignnModel
from signn.tensor import Param, Tensor
from signn.training import (ARM_FAMILIES, TrainConfig, build_model, expand_arms, metrics_dict, run_ablation,
                            sample_for_epoch, split_nodes, train)


def test_split_examples():
    tr, te = split_nodes(10, 0.6, 3)
    assert len(tr) == 6 and len(te) == 4
    assert not set(tr) & set(te) and set(tr) | set(te) == set(range(10))
    tr2, te2 = split_nodes(10, 0.6, 3)
    assert np.array_equal(tr, tr2) and np.array_equal(te, te2)
    with pytest.raises(ConfigError):
        split_nodes(3, 0.1, 0)
    with pytest.raises(ConfigError):
        split_nodes(10, 1.0, 0)


def test_cross_entropy_examples():
    assert tn.cross_entropy(Tensor(np.zeros((3, 4))), [0, 1, 3]).item() == pytest.approx(math.log(4), abs=1e-15)
    assert tn.cross_entropy(Tensor([[1000.0, 0.0, 0.0]]), [0]).item() < 1e-9
    assert tn.cross_entropy(Tensor([[2.0, 0.0]]), [0]).item() == pytest.approx(-math.log(math.e ** 2 / (math.e ** 2 + 1)))
    assert tn.cross_entropy(Tensor([[2.0, 0.0]]), [0]).item() == pytest.approx(0.1269, abs=1e-4)
    with pytest.raises(RangeError):
        tn.cross_entropy(Tensor(np.zeros((1, 2))), [2])


def test_f1_hand_examples():
    conf = confusion_matrix([0, 0, 1, 1], [0, 1, 1, 1], 2)
    assert macro_f1(conf) == pytest.approx((2 / 3 + 4 / 5) / 2, abs=1e-15)
    assert micro_f1(conf) == 0.75
    conf = confusion_matrix([0, 0, 1, 1], [0, 0, 0, 0], 2)
    assert micro_f1(conf) == 0.5 and macro_f1(conf) == pytest.approx(1 / 3, abs=1e-15)
    conf = confusion_matrix([0, 1, 2], [0, 1, 2], 3)
    assert macro_f1(conf) == 1.0 and micro_f1(conf) == 1.0


def test_micro_equals_trace_ratio():
    rng = np.random.default_rng(0)
    for _ in range(200):
        conf = rng.integers(0, 20, size=(4, 4))
        assert micro_f1(conf) == pytest.approx(np.trace(conf) / conf.sum(), abs=1e-12)


def test_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(train_ratio=0.0)
    with pytest.raises(ConfigError):
        TrainConfig(epochs=0)
    with pytest.raises(ConfigError):
        TrainConfig(neuron="izhikevich")
    with pytest.raises(ConfigError):
        TrainConfig(fanouts=(10,))
    with pytest.raises(ConfigError):
        TrainConfig(learning_rate=-1.0)


def _small(seed=0, **kw):
    return generate_sbm(SbmConfig(n=40, T=6, k_communities=2, p_in=0.4, p_out=0.05, drift_fraction=0.05,
                                  seed=seed, **kw))


def test_missing_labels_rejected():
    g = DynamicGraph.from_edge_lists(4, [[(0, 1)], [(1, 2)]])
    with pytest.raises(DataError):
        train(g, TrainConfig(epochs=1))


def test_zero_learning_rate_leaves_params_bit_identical():
    g = _small()
    for opt in ("adam", "sgd"):
        cfg = TrainConfig(epochs=3, learning_rate=0.0, optimizer=opt, d=8)
        model = build_model(g, cfg)
        before = {k: p.data.copy() for k, p in model.named_parameters().items()}
        train(g, cfg, model)
        for k, p in model.named_parameters().items():
            assert np.array_equal(p.data, before[k]), k


def test_training_is_deterministic():
    g = _small()
    cfg = TrainConfig(epochs=5, d=8, seed=3)
    a, b = train(g, cfg), train(g, cfg)
    assert [h["loss"] for h in a.history] == [h["loss"] for h in b.history]
    assert a.report.confusion == b.report.confusion


def test_two_cliques_reach_perfect_train_accuracy():
    for seed in range(3):
        g = generate_sbm(SbmConfig(n=40, T=10, k_communities=2, p_in=1.0, p_out=0.0, seed=seed))
        r = train(g, TrainConfig(epochs=20, seed=seed))
        assert r.history[-1]["train_acc"] == 1.0


def test_checkpoint_reproduces_first_epoch_loss(tmp_path):
    g = _small()
    cfg = TrainConfig(epochs=1, d=8, learning_rate=0.0)
    model = build_model(g, cfg)
    aggs = sample_for_epoch(g, model, cfg, 0)
    tr, _ = split_nodes(g.num_nodes, cfg.train_ratio, cfg.seed)
    loss = tn.cross_entropy(tn.take_rows(model.forward(aggs).scores, tr), g.labels[tr]).item()
    model.save(tmp_path / "m.ckpt")
    again = SignnModel.load(tmp_path / "m.ckpt")
    loss2 = tn.cross_entropy(tn.take_rows(again.forward(aggs).scores, tr), g.labels[tr]).item()
    assert loss == loss2
    assert train(g, cfg).history[0]["loss"] == loss


def test_metrics_dict_keys_and_ranges():
    r = train(_small(), TrainConfig(epochs=2, d=8))
    m = metrics_dict(r)
    for key in ("macro_f1", "micro_f1", "confusion", "tau_means", "gamma_means", "spike_rates", "seconds"):
        assert key in m
    assert 0 <= m["macro_f1"] <= 1 and 0 <= m["micro_f1"] <= 1
    assert len(m["tau_means"]) == 3 and all(0 < t < 1 for t in m["tau_means"] + m["gamma_means"])
    assert all(0 <= s <= 1 for s in m["spike_rates"])
    assert m["micro_f1"] == pytest.approx(np.trace(m["confusion"]) / np.sum(m["confusion"]))


def test_holdout_split():
    r = train(_small(), TrainConfig(epochs=1, d=8, holdout=0.25))
    assert "val_acc" in r.history[0]
    assert not set(r.val_idx) & set(r.train_idx)
    assert len(r.val_idx) + len(r.train_idx) == 24


def test_arm_families():
    assert list(ARM_FAMILIES["ta"]) == ["TA-BLIF", "TA-LIF", "no-TA"]
    assert [a["intervals"] for a in ARM_FAMILIES["granularity"].values()] == [
        (1,), (1, 2), (1, 2, 3), (1, 2, 3, 4), (1, 2, 3, 4, 5)]
    assert list(ARM_FAMILIES["strategy"]) == ["average", "max", "concat", "attention"]
    assert len(expand_arms(["ta", "granularity", "strategy"])) == 12
    with pytest.raises(ConfigError):
        expand_arms(["nope"])


def test_ablation_bookkeeping():
    g = _small()
    base = TrainConfig(epochs=1, d=4, fanouts=(3, 3))
    table = run_ablation(g, base, ARM_FAMILIES["ta"], seeds=2)
    assert len(table.rows) == 6
    summary = table.summary()
    assert [s["arm"] for s in summary] == ["TA-BLIF", "TA-LIF", "no-TA"] and all(s["runs"] == 2 for s in summary)


def test_single_arm_single_seed_matches_plain_train():
    g = _small()
    base = TrainConfig(epochs=3, d=8, seed=2)
    table = run_ablation(g, base, {"only": {}}, seeds=1)
    rep = train(g, base).report
    assert table.rows == [("only", 2, rep.macro_f1, rep.micro_f1)]


def test_parallel_ablation_matches_serial():
    g = _small()
    base = TrainConfig(epochs=1, d=4, fanouts=(3, 3))
    arms = {"a": {}, "b": {"neuron": "lif"}}
    assert run_ablation(g, base, arms, seeds=2, workers=2).rows == run_ablation(g, base, arms, seeds=2, workers=1).rows
