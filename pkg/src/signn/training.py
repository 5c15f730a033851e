"""Supervised temporal node classification: splits, optimisation, evaluation, ablations."""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import tensor as tn
from .errors import ConfigError, DataError, NumericError
from .graph import DynamicGraph
from .metrics import confusion_matrix, macro_f1, micro_f1, precision_recall
from .model import STRATEGIES, ForwardResult, SignnModel
from .neuron import firing_rate
from .sampling import sample_plan
from .tensor import Surrogate

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    train_ratio: float = 0.6
    epochs: int = 100
    learning_rate: float = 0.01
    momentum: float = 0.9
    seed: int = 0
    neuron: str = "blif"
    ta_enabled: bool = True
    intervals: tuple = (1, 2, 3)
    strategy: str = "average"
    fanouts: tuple = (10, 10)
    d: int = 64
    d_in: int = 16
    K: int = 2
    holdout: float = 0.0
    surrogate_width: float = 1.0
    embed_scale: float = 0.1
    optimizer: str = "adam"

    def __post_init__(self):
        object.__setattr__(self, "intervals", tuple(int(i) for i in self.intervals))
        object.__setattr__(self, "fanouts", tuple(int(f) for f in self.fanouts))
        if not 0 < self.train_ratio < 1:
            raise ConfigError(f"train_ratio must lie in (0, 1), got {self.train_ratio}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate < 0:
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.neuron not in ("blif", "lif"):
            raise ConfigError(f"neuron must be 'blif' or 'lif', got {self.neuron!r}")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if len(self.fanouts) != self.K or min(self.fanouts) < 1:
            raise ConfigError(f"need one positive fanout per layer (K={self.K}), got {self.fanouts}")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")
        if not 0 <= self.holdout < 1:
            raise ConfigError(f"holdout must lie in [0, 1), got {self.holdout}")


@dataclass
class EvalReport:
    macro_f1: float
    micro_f1: float
    precision: list
    recall: list
    confusion: list
    seconds: float = 0.0


@dataclass
class TrainResult:
    model: SignnModel
    config: TrainConfig
    train_idx: np.ndarray
    test_idx: np.ndarray
    history: list = field(default_factory=list)
    report: EvalReport | None = None
    final: ForwardResult | None = None
    val_idx: np.ndarray | None = None


def split_nodes(n: int, ratio: float, seed: int):
    """Shuffle ``range(n)`` under ``seed``; the first ``floor(ratio * n)`` ids train."""
    if not 0 < ratio < 1:
        raise ConfigError(f"split ratio must lie in (0, 1), got {ratio}")
    n_train = int(np.floor(ratio * n))
    if n_train == 0 or n_train == n:
        raise ConfigError(f"ratio {ratio} leaves one side of the split empty for n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


class SGDMomentum:
    def __init__(self, params, lr: float, momentum: float = 0.9):
        self.params = list(params)
        self.lr, self.momentum = lr, momentum
        self.velocity = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        for p, v in zip(self.params, self.velocity):
            v *= self.momentum
            v += p.grad
            p.data -= self.lr * v


class Adam:
    def __init__(self, params, lr: float, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.lr, self.betas, self.eps = lr, betas, eps
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def step(self):
        self.t += 1
        b1, b2 = self.betas
        for p, m, v in zip(self.params, self.m, self.v):
            m *= b1
            m += (1 - b1) * p.grad
            v *= b2
            v += (1 - b2) * p.grad ** 2
            mhat = m / (1 - b1 ** self.t)
            vhat = v / (1 - b2 ** self.t)
            p.data -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def build_model(g: DynamicGraph, cfg: TrainConfig) -> SignnModel:
    return SignnModel(g.num_nodes, g.num_classes, g.num_steps, d_in=cfg.d_in, d=cfg.d, K=cfg.K,
                      intervals=cfg.intervals, neuron=cfg.neuron, ta_enabled=cfg.ta_enabled,
                      strategy=cfg.strategy, features=g.features, seed=cfg.seed,
                      embed_scale=cfg.embed_scale)


def sample_for_epoch(g: DynamicGraph, model: SignnModel, cfg: TrainConfig, epoch: int):
    rng = np.random.default_rng([cfg.seed, epoch])
    return sample_plan(g, model.plan, cfg.fanouts, rng)


def evaluate(scores: np.ndarray, labels: np.ndarray, idx, num_classes: int) -> EvalReport:
    pred = np.asarray(scores)[idx].argmax(axis=1)
    conf = confusion_matrix(labels[idx], pred, num_classes)
    prec, rec = precision_recall(conf)
    return EvalReport(macro_f1(conf), micro_f1(conf), prec.tolist(), rec.tolist(), conf.tolist())


def train(g: DynamicGraph, cfg: TrainConfig, model: SignnModel | None = None) -> TrainResult:
    """Full-batch BPTT training; the last epoch's weights are evaluated on the test split.

    Neighbor samples are redrawn every epoch from a generator seeded by
    ``(seed, epoch)``, so a run is reproducible from ``cfg`` alone.
    """
    if g.labels is None:
        raise DataError("training needs node labels")
    start = time.perf_counter()
    train_idx, test_idx = split_nodes(g.num_nodes, cfg.train_ratio, cfg.seed)
    val_idx = None
    if cfg.holdout > 0:
        n_val = int(round(cfg.holdout * len(train_idx)))
        perm = np.random.default_rng([cfg.seed, 1]).permutation(train_idx)
        val_idx, train_idx = np.sort(perm[:n_val]), np.sort(perm[n_val:])
    model = model or build_model(g, cfg)
    mode = Surrogate(cfg.surrogate_width)
    params = model.parameters()
    opt = (SGDMomentum(params, cfg.learning_rate, cfg.momentum) if cfg.optimizer == "sgd"
           else Adam(params, cfg.learning_rate))
    labels = g.labels
    result = TrainResult(model, cfg, train_idx, test_idx, val_idx=val_idx)

    for epoch in range(cfg.epochs):
        out = model.forward(sample_for_epoch(g, model, cfg, epoch), mode)
        loss = tn.cross_entropy(tn.take_rows(out.scores, train_idx), labels[train_idx])
        if not np.isfinite(loss.data):
            raise NumericError(f"epoch {epoch}: loss is {loss.item()}; "
                               f"max |param| = {max(float(np.abs(p.data).max()) for p in params):.3g}")
        tn.reset_grads(params)
        loss.backward()
        for p in params:
            if not np.isfinite(p.grad).all():
                raise NumericError(f"epoch {epoch}: non-finite gradient in {p.name}")
        opt.step()
        pred = out.scores.data.argmax(axis=1)
        record = dict(epoch=epoch + 1, loss=loss.item(),
                      train_acc=float((pred[train_idx] == labels[train_idx]).mean()),
                      test_acc=float((pred[test_idx] == labels[test_idx]).mean()))
        if val_idx is not None:
            record["val_acc"] = float((pred[val_idx] == labels[val_idx]).mean())
        result.history.append(record)
        log.debug("epoch %d loss %.4f train %.3f test %.3f", record["epoch"], record["loss"],
                  record["train_acc"], record["test_acc"])

    result.final = model.forward(sample_for_epoch(g, model, cfg, cfg.epochs), mode)
    result.report = evaluate(result.final.scores.data, labels, test_idx, g.num_classes)
    result.report.seconds = time.perf_counter() - start
    return result


def decay_means(model: SignnModel):
    """Per-channel mean effective tau and gamma over the channel's neuron banks."""
    taus, gammas = [], []
    for c in range(model.plan.num_channels):
        banks = model.neuron_banks(c)
        taus.append(float(np.mean([b.params.tau.item() for b in banks])))
        gammas.append(float(np.mean([b.params.gamma.item() for b in banks])))
    return taus, gammas


def metrics_dict(result: TrainResult) -> dict:
    taus, gammas = decay_means(result.model)
    rep = result.report
    return dict(
        macro_f1=rep.macro_f1,
        micro_f1=rep.micro_f1,
        precision=rep.precision,
        recall=rep.recall,
        confusion=rep.confusion,
        tau_means=taus,
        gamma_means=gammas,
        spike_rates=firing_rate(result.final.final_traces[0]).tolist(),
        history=result.history,
        config=_jsonable(asdict(result.config)),
        seconds=rep.seconds,
    )


def _jsonable(d: dict) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


# ablations

ARM_FAMILIES = {
    "ta": {
        "TA-BLIF": {"neuron": "blif", "ta_enabled": True},
        "TA-LIF": {"neuron": "lif", "ta_enabled": True},
        "no-TA": {"ta_enabled": False},
    },
    "granularity": {f"G{k}": {"intervals": tuple(range(1, k + 1))} for k in range(1, 6)},
    "strategy": {s: {"strategy": s} for s in STRATEGIES},
}


def expand_arms(families) -> dict:
    arms = {}
    for fam in families:
        if fam not in ARM_FAMILIES:
            raise ConfigError(f"unknown arm family {fam!r}; choose from {sorted(ARM_FAMILIES)}")
        arms.update(ARM_FAMILIES[fam])
    return arms


@dataclass
class AblationTable:
    rows: list  # (arm, seed, macro_f1, micro_f1)

    def summary(self) -> list:
        out = []
        for arm in dict.fromkeys(r[0] for r in self.rows):
            mac = np.array([r[2] for r in self.rows if r[0] == arm])
            mic = np.array([r[3] for r in self.rows if r[0] == arm])
            out.append(dict(arm=arm, runs=len(mac), macro_mean=float(mac.mean()), macro_std=float(mac.std()),
                            micro_mean=float(mic.mean()), micro_std=float(mic.std())))
        return out


def _run_arm(args):
    g, cfg, arm = args
    rep = train(g, cfg).report
    return arm, cfg.seed, rep.macro_f1, rep.micro_f1


def run_ablation(g: DynamicGraph, base_cfg: TrainConfig, arms: dict, seeds=5, workers=None) -> AblationTable:
    """Train every arm (a dict of config overrides) under ``seeds`` consecutive seeds.

    ``workers`` defaults to ``$SIGNN_THREADS`` (1 when unset); runs are
    independent, so they may execute in separate processes.
    """
    jobs = []
    for arm, delta in arms.items():
        for s in range(seeds):
            jobs.append((g, replace(base_cfg, seed=base_cfg.seed + s, **delta), arm))
    workers = workers or int(os.environ.get("SIGNN_THREADS", "1") or 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_run_arm, jobs))
    else:
        rows = [_run_arm(j) for j in jobs]
    return AblationTable(rows)
