"""LIF and bidirectional LIF (BLIF) neuron banks with adaptive thresholds.

One step runs four phases::

    integrate  v~ = v + tau * (v_reset - v + I)
    fire       s  = H(v~ - v_th) + H(-v_th - v~)       (BLIF)
               s  = H(v~ - v_th)                       (LIF)
    reset      v' = v~ * (1 - s) + v_reset * s
    update     v_th' = gamma * v_th + (1 - gamma) * s

``tau`` and ``gamma`` are sigmoids of unconstrained learnable scalars.
Under surrogate training the spikes entering reset/update are detached, so
gradients only cross the fire phase.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import tensor as tn
from .errors import DimensionError
from .tensor import GradMode, Param, Surrogate, Tensor


def logit(p: float) -> float:
    return float(np.log(p / (1.0 - p)))


@dataclass
class BlifParams:
    raw_tau: Param
    raw_gamma: Param
    v_reset: float = 0.0
    v_th_init: float = 1.0

    @classmethod
    def create(cls, prefix="neuron", tau=0.7, gamma=0.7, v_reset=0.0, v_th_init=1.0) -> "BlifParams":
        return cls(Param([[logit(tau)]], f"{prefix}.raw_tau"),
                   Param([[logit(gamma)]], f"{prefix}.raw_gamma"),
                   v_reset, v_th_init)

    @property
    def tau(self) -> Tensor:
        return tn.sigmoid(self.raw_tau)

    @property
    def gamma(self) -> Tensor:
        return tn.sigmoid(self.raw_gamma)

    def params(self) -> list[Param]:
        return [self.raw_tau, self.raw_gamma]


@dataclass
class BlifState:
    v: Tensor
    v_th: Tensor

    @classmethod
    def rest(cls, shape, params: BlifParams) -> "BlifState":
        return cls(Tensor(np.full(shape, params.v_reset)), Tensor(np.full(shape, params.v_th_init)))


def _step(inp, state: BlifState, params: BlifParams, mode: GradMode, bidirectional: bool):
    inp = tn.as_tensor(inp)
    if inp.shape != state.v.shape:
        raise DimensionError(f"neuron input {inp.shape} does not match state {state.v.shape}")
    v_tilde = state.v + params.tau * (params.v_reset - state.v + inp)
    spikes = tn.heaviside(v_tilde - state.v_th, mode)
    if bidirectional:
        spikes = spikes + tn.heaviside(-state.v_th - v_tilde, mode)
    # smooth mode keeps the full graph so finite differences stay comparable
    s = tn.detach(spikes) if isinstance(mode, Surrogate) else spikes
    v_new = v_tilde * (1.0 - s) + params.v_reset * s
    gamma = params.gamma
    v_th_new = gamma * state.v_th + (1.0 - gamma) * s
    return spikes, BlifState(v_new, v_th_new)


def blif_step(inp, state: BlifState, params: BlifParams, mode: GradMode = Surrogate()):
    """One BLIF update; fires when v~ leaves the band (-v_th, v_th)."""
    return _step(inp, state, params, mode, bidirectional=True)


def lif_step(inp, state: BlifState, params: BlifParams, mode: GradMode = Surrogate()):
    """Positive-threshold-only counterpart of :func:`blif_step`."""
    return _step(inp, state, params, mode, bidirectional=False)


@dataclass
class SpikeTrace:
    counts: list = field(default_factory=list)
    units: list = field(default_factory=list)

    def record(self, spikes: Tensor):
        self.counts.append(float(spikes.data.sum()))
        self.units.append(int(spikes.data.size))

    def clear(self):
        self.counts.clear()
        self.units.clear()

    def __len__(self):
        return len(self.counts)


def firing_rate(trace: SpikeTrace) -> np.ndarray:
    if not len(trace):
        return np.zeros(0)
    return np.asarray(trace.counts, dtype=np.float64) / np.asarray(trace.units, dtype=np.float64)


def write_trace_csv(trace: SpikeTrace, path, steps=None):
    steps = steps if steps is not None else range(1, len(trace) + 1)
    rates = firing_rate(trace)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "spikes", "units", "rate"])
        for t, c, u, r in zip(steps, trace.counts, trace.units, rates):
            w.writerow([t, f"{c:.17g}", u, f"{r:.17g}"])


class NeuronBank:
    """A population of BLIF or LIF units whose state persists across steps.

    The state shape is fixed by the first input after a reset.
    """

    def __init__(self, kind="blif", prefix="neuron", **param_kwargs):
        if kind not in ("blif", "lif"):
            raise ValueError(f"neuron kind must be 'blif' or 'lif', got {kind!r}")
        self.kind = kind
        self.params = BlifParams.create(prefix, **param_kwargs)
        self.state: BlifState | None = None
        self.trace = SpikeTrace()
        self.last_spikes: np.ndarray | None = None

    def reset_state(self):
        self.state = None
        self.last_spikes = None
        self.trace.clear()

    def step(self, inp, mode: GradMode = Surrogate()) -> Tensor:
        inp = tn.as_tensor(inp)
        if self.state is None:
            self.state = BlifState.rest(inp.shape, self.params)
        fn = blif_step if self.kind == "blif" else lif_step
        spikes, self.state = fn(inp, self.state, self.params, mode)
        self.trace.record(spikes)
        self.last_spikes = spikes.data
        return spikes

    def parameters(self) -> list[Param]:
        return self.params.params()
