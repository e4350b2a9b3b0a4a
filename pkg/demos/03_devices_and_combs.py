"""
Channels, faithful states and the link product
==============================================

A channel is represented by its Choi operator (ordered output, input).
Sending half of a maximally entangled state through it and doing state
tomography on the pair recovers that operator.  Circuits of channels are
composed with the link product, and a circuit with an open slot is a comb.
"""

import numpy as np

from qtomo.combs import QuantumComb, comb_link, validate_comb
from qtomo.devices import (FaithfulState, choi_from_kraus, is_faithful, max_entangled_state,
                           process_tomography, random_channel, random_kraus)
from qtomo.linalg import SubsystemShape, link_product, reorder_to

rng = np.random.default_rng(7)

# %%
# Process tomography of a random qubit channel from 10^5 shots.
C = random_channel(2, rng=rng)
T = is_faithful(max_entangled_state(2))
assert isinstance(T, FaithfulState)
C_hat = process_tomography(C, T, shots=100_000, rng=rng)
print("Hilbert-Schmidt error:", np.linalg.norm(C_hat.R - C.R))

# %%
# Two channels A (system -> system + memory) and B (system + memory ->
# system) joined on the memory wire leave one open slot in between: a
# two-tooth comb on wires 0 -> 1 -> 2 -> 3.
KA = random_kraus(2, 4, 2, rng)
KB = random_kraus(4, 2, 2, rng)
R, shape = link_product(choi_from_kraus(KA).R, SubsystemShape((2, 2, 2), (1, 9, 0)),
                        choi_from_kraus(KB).R, SubsystemShape((2, 2, 2), (3, 2, 9)))
comb = QuantumComb(reorder_to(R, shape, [0, 1, 2, 3]), (2, 2, 2, 2))
print(validate_comb(comb))

# %%
# Plugging a channel into the slot closes the circuit.
closed = comb_link(comb, QuantumComb.from_choi(random_channel(2, rng=rng), 1, 2))
print("closed circuit is a channel:", validate_comb(closed).passed)

# %%
# Causality matters: a channel whose output ignores its input, read with
# the roles of input and output swapped, violates normalization.
R_swapped = np.kron(np.diag([1.0, 0.0]), np.eye(2))
print(validate_comb(R_swapped, (2, 2)))
