"""Compact binary-register variational TSP toolkit.

Symmetry-reduced register encoding, a permutation-preserving controlled
register-swap ansatz, and a divide-and-conquer product-state execution path
with simulated readout noise and mitigation.
"""

__version__ = "0.1.0"
