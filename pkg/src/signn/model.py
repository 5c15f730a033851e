"""Spike-gated GNN over multi-granularity snapshot sequences.

Per granularity channel, ``K`` aggregation-update layers run at every step
of the channel's snapshot subsequence.  Each layer mixes the neighbor mean
and the node's own representation along two pathways: a sigmoid feature
pathway and a spiking pathway whose binary output gates the features
elementwise.  Neuron state persists across the steps of a channel, which is
where the temporal coupling comes from.  The gated final-layer outputs are
stacked into a per-node d x T_g matrix, pooled with a trainable weight
matrix, combined across channels and classified.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import tensor as tn
from .errors import ConfigError, DataError, DimensionError
from .neuron import NeuronBank, SpikeTrace
from .sampling import MtgPlan, build_plan, mean_matrix
from .tensor import GradMode, Param, Surrogate, Tensor

STRATEGIES = ("average", "max", "concat", "attention")


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))


def aggregate_neighbors(h, samples) -> Tensor:
    """Mean of sampled neighbor rows.

    ``samples`` is either a precomputed row-stochastic aggregation matrix or
    an iterable of :class:`~signn.sampling.NeighborSample`.
    """
    h = tn.as_tensor(h)
    if not (sp.issparse(samples) or isinstance(samples, np.ndarray)):
        samples = mean_matrix(samples, h.shape[0])
    return tn.spmm(samples, h)


class TaLayer:
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, neuron="blif",
                 ta_enabled=True, prefix="layer"):
        self.d_in, self.d_out = d_in, d_out
        self.w_h = Param(glorot(rng, d_in, d_out), f"{prefix}.w_h")
        self.b_h = Param(glorot(rng, d_in, d_out), f"{prefix}.b_h")
        self.w_s = Param(glorot(rng, d_in, d_out), f"{prefix}.w_s")
        self.b_s = Param(glorot(rng, d_in, d_out), f"{prefix}.b_s")
        self.neurons = NeuronBank(neuron, prefix=f"{prefix}.neuron")
        self.ta_enabled = ta_enabled

    def parameters(self) -> list[Param]:
        return [self.w_h, self.b_h, self.w_s, self.b_s, *self.neurons.parameters()]


def ta_update(layer: TaLayer, h_self, h_nbr, mode: GradMode = Surrogate()) -> Tensor:
    h_self, h_nbr = tn.as_tensor(h_self), tn.as_tensor(h_nbr)
    if h_self.shape != h_nbr.shape or h_self.shape[-1] != layer.d_in:
        raise DimensionError(
            f"layer expects inputs of width {layer.d_in}, got {h_self.shape} and {h_nbr.shape}")
    h_tilde = tn.sigmoid(h_nbr @ layer.w_h + h_self @ layer.b_h)
    if not layer.ta_enabled:
        return h_tilde
    spikes = layer.neurons.step(h_nbr @ layer.w_s + h_self @ layer.b_s, mode)
    return spikes * h_tilde


def temporal_pool(z_matrix, pool) -> Tensor:
    """Row sums of ``z_matrix * pool`` over the last (time) axis.

    Works for a single node's d x T matrix or a stacked n x d x T batch.
    """
    z_matrix, pool = tn.as_tensor(z_matrix), tn.as_tensor(pool)
    if z_matrix.shape[-2:] != pool.shape:
        raise DimensionError(f"pool weights {pool.shape} do not match embeddings {z_matrix.shape}")
    return tn.sum(z_matrix * pool, axis=-1)


class MtgAggregator:
    def __init__(self, strategy: str, d: int, num_channels: int, rng: np.random.Generator):
        if strategy not in STRATEGIES:
            raise ConfigError(f"unknown aggregation strategy {strategy!r}; choose from {STRATEGIES}")
        self.strategy = strategy
        self.params: list[Param] = []
        if strategy == "concat":
            self.proj = Param(glorot(rng, num_channels * d, d), "mtg.proj")
            self.params = [self.proj]
        elif strategy == "attention":
            self.att_w = Param(glorot(rng, d, d), "mtg.att_w")
            self.att_q = Param(np.zeros((d, 1)), "mtg.att_q")
            self.params = [self.att_w, self.att_q]


def mtg_aggregate(agg: MtgAggregator, z_list) -> Tensor:
    if not z_list:
        raise ConfigError("MTG aggregation needs at least one channel")
    z_list = [tn.as_tensor(z) for z in z_list]
    if agg.strategy == "average":
        out = z_list[0]
        for z in z_list[1:]:
            out = out + z
        return out * (1.0 / len(z_list))
    if agg.strategy == "max":
        return tn.maximum(z_list)
    if agg.strategy == "concat":
        return tn.concat(z_list, axis=-1) @ agg.proj
    scores = tn.concat([tn.tanh(z @ agg.att_w) @ agg.att_q for z in z_list], axis=-1)
    weights = tn.softmax(scores, axis=-1)
    out = None
    for g, z in enumerate(z_list):
        term = weights[..., g:g + 1] * z
        out = term if out is None else out + term
    return out


@dataclass
class ClassifierHead:
    weights: Param
    bias: Param

    @classmethod
    def create(cls, d: int, num_classes: int, rng: np.random.Generator) -> "ClassifierHead":
        return cls(Param(glorot(rng, d, num_classes), "head.weights"),
                   Param(np.zeros((1, num_classes)), "head.bias"))


def predict(head: ClassifierHead, z) -> Tensor:
    """Unnormalised class scores; argmax gives the predicted class."""
    return tn.as_tensor(z) @ head.weights + head.bias


@dataclass
class ForwardResult:
    scores: Tensor
    z: Tensor
    channel_z: list
    embeddings: list          # per channel, n x d x T_g spike-gated stacks
    final_traces: list        # per channel, final-layer SpikeTrace snapshot
    final_spikes: list        # per channel, n x d x T_g binary array (None without TA)


class SignnModel:
    """All trainable state plus the forward computation.

    ``features`` (n x d_in) are used as fixed inputs when given; otherwise a
    trainable per-node embedding table of width ``d_in`` is created.
    """

    def __init__(self, num_nodes: int, num_classes: int, num_steps: int, *, d_in=16, d=64, K=2,
                 intervals=(1, 2, 3), neuron="blif", ta_enabled=True, strategy="average",
                 features=None, seed=0, embed_scale=0.1):
        if K < 1:
            raise ConfigError(f"need at least one layer, got K={K}")
        rng = np.random.default_rng(seed)
        self.plan: MtgPlan = build_plan(num_steps, intervals)
        self.config = dict(num_nodes=num_nodes, num_classes=num_classes, num_steps=num_steps,
                           d_in=d_in, d=d, K=K, intervals=list(self.plan.intervals), neuron=neuron,
                           ta_enabled=ta_enabled, strategy=strategy, seed=seed, embed_scale=embed_scale,
                           has_features=features is not None)
        if features is not None:
            features = np.asarray(features, dtype=np.float64)
            if features.shape[0] != num_nodes:
                raise DimensionError(f"features {features.shape} for {num_nodes} nodes")
            self.config["d_in"] = d_in = features.shape[1]
            self.embedding = None
            self.features = Tensor(features)
        else:
            self.embedding = Param(embed_scale * rng.standard_normal((num_nodes, d_in)), "embedding")
            self.features = self.embedding
        self.channels = []
        for c in range(self.plan.num_channels):
            dims = [d_in] + [d] * K
            self.channels.append([
                TaLayer(dims[k], dims[k + 1], rng, neuron, ta_enabled, prefix=f"ch{c}.l{k}")
                for k in range(K)
            ])
        self.pools = [Param(np.ones((d, len(ix))), f"ch{c}.pool")
                      for c, ix in enumerate(self.plan.indices)]
        self.aggregator = MtgAggregator(strategy, d, self.plan.num_channels, rng)
        self.head = ClassifierHead.create(d, num_classes, rng)

    def parameters(self) -> list[Param]:
        out = [self.embedding] if self.embedding is not None else []
        for layers in self.channels:
            for layer in layers:
                out.extend(layer.parameters())
        out.extend(self.pools)
        out.extend(self.aggregator.params)
        out.extend([self.head.weights, self.head.bias])
        return out

    def named_parameters(self) -> dict:
        return {p.name: p for p in self.parameters()}

    def reset_state(self):
        for layers in self.channels:
            for layer in layers:
                layer.neurons.reset_state()

    def neuron_banks(self, channel: int):
        return [layer.neurons for layer in self.channels[channel]]

    def forward_channel(self, c: int, aggregators, mode: GradMode = Surrogate()):
        """Run channel ``c`` over its snapshot subsequence.

        ``aggregators[i][k]`` is the sampled mean matrix for the i-th step of
        the channel at layer ``k``.  Returns the list of final-layer outputs,
        one n x d tensor per step.
        """
        layers = self.channels[c]
        columns, spikes = [], []
        for per_layer in aggregators:
            h = self.features
            for k, layer in enumerate(layers):
                h = ta_update(layer, h, aggregate_neighbors(h, per_layer[k]), mode)
            columns.append(h)
            if layers[-1].ta_enabled:
                spikes.append(layers[-1].neurons.last_spikes)
        self._last_spikes = spikes
        return columns

    def forward(self, aggregators, mode: GradMode = Surrogate()) -> ForwardResult:
        """Full pass; ``aggregators`` comes from :func:`signn.sampling.sample_plan`."""
        if len(aggregators) != self.plan.num_channels:
            raise DimensionError(f"{len(aggregators)} aggregator channels for {self.plan.num_channels} model channels")
        self.reset_state()
        embeddings, channel_z, traces, spikes = [], [], [], []
        for c in range(self.plan.num_channels):
            columns = self.forward_channel(c, aggregators[c], mode)
            z_mat = tn.stack(columns, axis=-1)
            embeddings.append(z_mat)
            channel_z.append(temporal_pool(z_mat, self.pools[c]))
            last = self.channels[c][-1].neurons.trace
            traces.append(SpikeTrace(list(last.counts), list(last.units)))
            spikes.append(np.stack(self._last_spikes, axis=-1) if self._last_spikes else None)
        z = mtg_aggregate(self.aggregator, channel_z)
        return ForwardResult(predict(self.head, z), z, channel_z, embeddings, traces, spikes)

    # checkpoints

    def save(self, path):
        arrays = {name: p.data for name, p in self.named_parameters().items()}
        if self.embedding is None:
            arrays["__features__"] = self.features.data
        arrays["__config__"] = np.array(json.dumps(self.config, sort_keys=True))
        with open(path, "wb") as fh:
            np.savez(fh, **arrays)

    @classmethod
    def load(cls, path) -> "SignnModel":
        try:
            with np.load(path, allow_pickle=False) as npz:
                arrays = {k: npz[k] for k in npz.files}
        except (OSError, ValueError) as exc:
            raise DataError(f"cannot read checkpoint {path}: {exc}") from None
        cfg = json.loads(str(arrays.pop("__config__")))
        has_features = cfg.pop("has_features")
        features = arrays.pop("__features__", None) if has_features else None
        model = cls(features=features, **cfg)
        named = model.named_parameters()
        if set(named) != set(arrays):
            raise DataError(f"checkpoint {path} parameters do not match its config")
        for name, value in arrays.items():
            if named[name].data.shape != value.shape:
                raise DataError(f"checkpoint {path}: {name} has shape {value.shape}")
            named[name].data[...] = value
        return model
