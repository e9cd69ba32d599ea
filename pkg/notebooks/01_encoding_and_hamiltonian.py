"""
Binary-register encoding of a small tour problem
================================================

Fix city 0 as the start, store the remaining cities in ceil(log2 M)-bit
registers, and check that the lowest-energy basis states of the register
Hamiltonian are exactly the shortest tours.
"""

import numpy as np

from qtsp.encoding import ReducedEncoding, bitstring, classify_state, decode_state, encode_tour, FeasibleTour
from qtsp.hamiltonian import build_hamiltonian, expand_pauli, ground_states
from qtsp.instances import TspInstance, solve_exact

# %%
dist = np.array([[0, 10, 15, 20], [10, 0, 35, 25], [15, 35, 0, 30], [20, 25, 30, 0]], dtype=float)
inst = TspInstance(dist)
sol = solve_exact(inst)
print("optimal length", sol.optimal_length, "tours", sorted(sol.optimal_tours))

# %% three positions, two bits each: six data qubits
enc = ReducedEncoding(inst.n)
print("M =", enc.M, "k =", enc.k, "data qubits =", enc.num_data_qubits)

for tour in sorted(sol.optimal_tours):
    s = encode_tour(enc, FeasibleTour.from_full_tour(tour))
    print(tour, "->", bitstring(enc, s), "codes", decode_state(enc, s))

# %% ground states of the penalized Hamiltonian
h = build_hamiltonian(inst, enc)
e0, states = ground_states(h)
print("ground energy", e0)
for s in sorted(states):
    print(bitstring(enc, s), classify_state(enc, s).kind.value)

# %% the spectrum: feasible tours sit at their lengths, everything else is lifted
kinds = np.array([classify_state(enc, s).kind.value for s in range(2**enc.num_data_qubits)])
for kind in np.unique(kinds):
    print(f"{kind:>14}: min energy {h.diag[kinds == kind].min():8.1f}")

# %% the same operator as a sum of Pauli-Z strings
terms = expand_pauli(h)
print(len(terms), "terms; identity coefficient", terms[0].coeff, "== mean diagonal", h.diag.mean())
