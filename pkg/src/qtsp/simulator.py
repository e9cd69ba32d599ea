"""Dense statevector simulation for the RY / CZ / CSWAP gate set.

Qubit ``q`` is bit ``q`` of the amplitude index. Circuits built on a reduced
encoding use qubits ``0 .. M*k - 1`` for data and qubit ``M*k`` for the
ancilla.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Literal

import numpy as np

from .encoding import FeasibleTour, ReducedEncoding, pack_codes

MAX_QUBITS = 24

BlockOrder = Literal["rotation_first", "swap_first"]


@dataclass(frozen=True)
class GateOp:
    kind: str
    qubits: tuple[int, ...]
    angle: float = 0.0

    def __post_init__(self):
        arity = {"RY": 1, "CZ": 2, "CSWAP": 3}
        if self.kind not in arity:
            raise ValueError(f"unsupported gate {self.kind!r}")
        if len(self.qubits) != arity[self.kind]:
            raise ValueError(f"{self.kind} acts on {arity[self.kind]} qubits, got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"repeated qubit index in {self.kind}{self.qubits}")


def RY(target: int, angle: float) -> GateOp:
    return GateOp("RY", (target,), float(angle))


def CZ(a: int, b: int) -> GateOp:
    return GateOp("CZ", (a, b))


def CSWAP(control: int, a: int, b: int) -> GateOp:
    return GateOp("CSWAP", (control, a, b))


@dataclass(eq=False)
class Statevector:
    num_qubits: int
    amps: np.ndarray

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def copy(self) -> "Statevector":
        return Statevector(self.num_qubits, self.amps.copy())


def init_basis(num_qubits: int, basis: int = 0) -> Statevector:
    if not 0 < num_qubits <= MAX_QUBITS:
        raise ValueError(f"num_qubits must be in 1..{MAX_QUBITS}, got {num_qubits}")
    if not 0 <= basis < (1 << num_qubits):
        raise ValueError(f"basis index {basis} does not fit in {num_qubits} qubits")
    amps = np.zeros(1 << num_qubits, dtype=complex)
    amps[basis] = 1.0
    return Statevector(num_qubits, amps)


def _index(n: int, fixed: dict[int, int]) -> tuple:
    # Tensor axis for qubit q is n - 1 - q under C-order reshape.
    idx = [slice(None)] * n
    for q, v in fixed.items():
        idx[n - 1 - q] = v
    return tuple(idx)


def _apply_inplace(sv: Statevector, g: GateOp) -> None:
    n = sv.num_qubits
    if any(not 0 <= q < n for q in g.qubits):
        raise ValueError(f"{g.kind}{g.qubits} out of range for {n} qubits")
    psi = sv.amps.reshape((2,) * n)
    if g.kind == "RY":
        (t,) = g.qubits
        c, s = np.cos(g.angle / 2), np.sin(g.angle / 2)
        i0, i1 = _index(n, {t: 0}), _index(n, {t: 1})
        a0 = psi[i0].copy()
        a1 = psi[i1]
        psi[i0] = c * a0 - s * a1
        psi[i1] = s * a0 + c * a1
    elif g.kind == "CZ":
        a, b = g.qubits
        psi[_index(n, {a: 1, b: 1})] *= -1
    else:
        c, a, b = g.qubits
        i10, i01 = _index(n, {c: 1, a: 1, b: 0}), _index(n, {c: 1, a: 0, b: 1})
        tmp = psi[i10].copy()
        psi[i10] = psi[i01]
        psi[i01] = tmp


def apply_gate(sv: Statevector, g: GateOp) -> Statevector:
    out = sv.copy()
    _apply_inplace(out, g)
    return out


def run_circuit(sv: Statevector, gates: Iterable[GateOp]) -> Statevector:
    out = sv.copy()
    for g in gates:
        _apply_inplace(out, g)
    return out


def block_gates(enc: ReducedEncoding, i: int, theta: float, aux: int,
                order: BlockOrder = "rotation_first") -> list[GateOp]:
    """RY(2 theta) on the ancilla plus k ancilla-controlled swaps of registers i, i+1."""
    if not 0 <= i <= enc.M - 2:
        raise ValueError(f"no neighbouring register pair at i={i} for M={enc.M}")
    k = enc.k
    rot = [RY(aux, 2 * theta)]
    swaps = [CSWAP(aux, i * k + b, (i + 1) * k + b) for b in range(k)]
    if order == "rotation_first":
        return rot + swaps
    if order == "swap_first":
        return swaps + rot
    raise ValueError(f"unknown block order {order!r}")


def register_swap_block(sv: Statevector, enc: ReducedEncoding, i: int, theta: float,
                        aux: int | None = None, order: BlockOrder = "rotation_first") -> Statevector:
    aux = enc.num_data_qubits if aux is None else aux
    return run_circuit(sv, block_gates(enc, i, theta, aux, order))


def _diag_vector(h) -> np.ndarray:
    return np.asarray(h.diag if hasattr(h, "diag") else h, dtype=float)


def data_probabilities(sv: Statevector, num_data_qubits: int) -> np.ndarray:
    p = sv.probabilities()
    if sv.num_qubits == num_data_qubits:
        return p
    if sv.num_qubits == num_data_qubits + 1:
        return p.reshape(2, -1).sum(axis=0)
    raise ValueError(f"{sv.num_qubits}-qubit state does not cover {num_data_qubits} data qubits (+1 ancilla)")


def diag_expectation(sv: Statevector, h) -> float:
    """Expectation of a diagonal operator on the data qubits, tracing out the ancilla if present."""
    d = _diag_vector(h)
    nd = len(d).bit_length() - 1
    if 1 << nd != len(d):
        raise ValueError(f"diagonal length {len(d)} is not a power of two")
    return float(data_probabilities(sv, nd) @ d)


def marginal_tour_probabilities(sv: Statevector, enc: ReducedEncoding) -> dict[FeasibleTour, float]:
    if sv.num_qubits != enc.num_data_qubits + 1:
        raise ValueError(f"expected {enc.num_data_qubits + 1} qubits, got {sv.num_qubits}")
    p = data_probabilities(sv, enc.num_data_qubits)
    return {
        FeasibleTour(perm): float(p[pack_codes(enc, perm)])
        for perm in itertools.permutations(range(enc.M))
    }
