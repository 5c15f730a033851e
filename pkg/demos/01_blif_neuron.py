"""
A bidirectional spiking neuron, one step at a time
==================================================

A BLIF unit fires when its membrane leaves the band (-v_th, v_th), so it
reacts to strong negative drive as well as strong positive drive.  A plain
LIF unit only sees the positive side.
"""

import numpy as np

from signn.neuron import BlifParams, BlifState, blif_step, lif_step
from signn.tensor import Tensor

params = BlifParams.create(tau=0.5, gamma=0.9)


def rest(n):
    return BlifState(Tensor(np.zeros((1, n))), Tensor(np.ones((1, n))))


# three units: strong positive input, strong negative input, weak input
drive = np.array([[2.0, -3.0, 0.4]])

s, state = blif_step(drive, rest(3), params)
print("BLIF spikes      ", s.data[0])
print("membrane after   ", state.v.data[0])
print("threshold after  ", state.v_th.data[0])

s, _ = lif_step(drive, rest(3), params)
print("LIF spikes       ", s.data[0])

# the weak unit stays silent here: its membrane creeps toward the input, 0.2, 0.3, 0.35, ...
# while the threshold, with no spikes to push it up, decays toward zero
state = rest(1)
for t in range(1, 9):
    s, state = blif_step([[0.4]], state, params)
    print(f"t={t}  v={state.v.item():.4f}  v_th={state.v_th.item():.4f}  spike={int(s.item())}")

# an adaptive threshold eventually lets a constant weak input through
print("first spike of a constant 0.4 drive with gamma=0.5:")
fast = BlifParams.create(tau=0.5, gamma=0.5)
state = rest(1)
for t in range(1, 20):
    s, state = blif_step([[0.4]], state, fast)
    if s.item():
        print(f"  step {t}")
        break
