"""
A circuit that only ever visits valid tours
===========================================

Each block rotates a shared ancilla and then uses it to control a swap of two
neighbouring registers. Starting from one tour, every amplitude stays on
permutations, so only the distance part of the Hamiltonian is needed.
"""

import math

import numpy as np

from qtsp.ansatz import AnsatzParams, build_layer_circuit, count_resources, energy, expected_resources, prepare_state
from qtsp.encoding import ReducedEncoding, feasible_state_index_set
from qtsp.hamiltonian import build_distance_hamiltonian
from qtsp.instances import generate_instance
from qtsp.simulator import data_probabilities

# %% resource counts for n = 6 at a few depths
enc = ReducedEncoding(6)
for L in (1, 5, 12):
    params = AnsatzParams.zeros(enc, L)
    got = count_resources(build_layer_circuit(enc, params), enc.num_data_qubits + 1, params.num_params)
    print(L, got, got == expected_resources(enc.M, L))

# %% random angles never leak probability outside the permutations
feas = np.array(sorted(feasible_state_index_set(enc)))
rng = np.random.default_rng(0)
params = AnsatzParams(rng.uniform(-math.pi, math.pi, (3, enc.M - 1)))
p = data_probabilities(prepare_state(enc, params), enc.num_data_qubits)
print("mass on permutations:", p[feas].sum())

# %% the distance-only energy, dense simulation vs the permutation-subspace engine
inst = generate_instance(6, 7)
h = build_distance_hamiltonian(inst, enc)
print(energy(enc, h, params, "dense"), energy(enc, h, params, "subspace"))
