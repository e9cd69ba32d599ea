"""Diagonal binary-register Hamiltonian, its Pauli-Z expansion, and the
one-hot QUBO cost used as a classical cross-check."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .encoding import ReducedEncoding, register_codes
from .instances import TspInstance

MATERIALIZE_CAP = 20
PAULI_EPS = 1e-12


def default_penalty(inst: TspInstance) -> float:
    """``2 * n * max(dist)``: larger than the spread of any feasible energies."""
    return 2.0 * inst.n * float(inst.dist.max())


@dataclass(frozen=True, eq=False)
class DiagonalHamiltonian:
    inst: TspInstance
    enc: ReducedEncoding
    lam: float
    mu: float

    @cached_property
    def _padded(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        # Codes >= M carry zero distance: their projector never appears in the distance sum.
        M, d = self.enc.M, self.enc.num_codes
        start = np.zeros(d)
        start[:M] = self.inst.dist[0, 1:]
        end = np.zeros(d)
        end[:M] = self.inst.dist[1:, 0]
        chain = np.zeros((d, d))
        chain[:M, :M] = self.inst.dist[1:, 1:]
        return start, chain, end

    def dist_term(self, states) -> np.ndarray:
        codes = register_codes(self.enc, np.atleast_1d(states))
        start, chain, end = self._padded
        e = start[codes[:, 0]] + end[codes[:, -1]]
        for i in range(self.enc.M - 1):
            e = e + chain[codes[:, i], codes[:, i + 1]]
        return e

    def rep_term(self, states) -> np.ndarray:
        codes = register_codes(self.enc, np.atleast_1d(states))
        M = self.enc.M
        r = np.zeros(len(codes))
        for i in range(M):
            for j in range(i + 1, M):
                r += (codes[:, i] == codes[:, j]) & (codes[:, i] < M)
        return r

    def inv_term(self, states) -> np.ndarray:
        codes = register_codes(self.enc, np.atleast_1d(states))
        return (codes >= self.enc.M).sum(axis=1).astype(float)

    def energies(self, states) -> np.ndarray:
        e = self.dist_term(states)
        if self.lam:
            e = e + self.lam * self.rep_term(states)
        if self.mu:
            e = e + self.mu * self.inv_term(states)
        return e

    def energy(self, state: int) -> float:
        return float(self.energies([state])[0])

    @property
    def num_qubits(self) -> int:
        return self.enc.num_data_qubits

    @cached_property
    def diag(self) -> np.ndarray:
        if self.num_qubits > MATERIALIZE_CAP:
            raise ValueError(
                f"{self.num_qubits} qubits exceeds the dense cap of {MATERIALIZE_CAP}; use energies()"
            )
        d = self.energies(np.arange(1 << self.num_qubits))
        d.setflags(write=False)
        return d


def build_hamiltonian(inst: TspInstance, enc: ReducedEncoding, lam: float | None = None,
                      mu: float | None = None) -> DiagonalHamiltonian:
    """Full Hamiltonian with strictly positive penalty weights (default ``default_penalty``)."""
    if enc.n != inst.n:
        raise ValueError(f"encoding is for n={enc.n}, instance has n={inst.n}")
    lam = default_penalty(inst) if lam is None else float(lam)
    mu = default_penalty(inst) if mu is None else float(mu)
    if lam <= 0 or mu <= 0:
        raise ValueError("penalty weights must be strictly positive")
    return DiagonalHamiltonian(inst, enc, lam, mu)


def build_distance_hamiltonian(inst: TspInstance, enc: ReducedEncoding) -> DiagonalHamiltonian:
    """Distance part only, for circuits that never leave the feasible subspace."""
    if enc.n != inst.n:
        raise ValueError(f"encoding is for n={enc.n}, instance has n={inst.n}")
    return DiagonalHamiltonian(inst, enc, 0.0, 0.0)


def ground_states(h: DiagonalHamiltonian, cap: int = MATERIALIZE_CAP,
                  rtol: float = 1e-12) -> tuple[float, frozenset[int]]:
    if h.num_qubits > cap:
        raise ValueError(f"{h.num_qubits} qubits exceeds the exhaustive cap of {cap}")
    d = h.diag
    e = d.min()
    return float(e), frozenset(int(s) for s in np.flatnonzero(d <= e + rtol * abs(e)))


# -- Pauli-Z expansion ---------------------------------------------------------------------

@dataclass(frozen=True)
class PauliZTerm:
    coeff: float
    z_mask: int


def _projector_terms(enc: ReducedEncoding, register: int, code: int) -> dict[int, float]:
    # prod_b (1 + (-1)^{a_b} Z_b) / 2 expanded over subsets of the register's bits
    k = enc.k
    out = {}
    for subset in range(1 << k):
        sign = 1.0
        mask = 0
        for b in range(k):
            if subset >> b & 1:
                mask |= 1 << (register * k + b)
                if code >> b & 1:
                    sign = -sign
        out[mask] = sign / (1 << k)
    return out


def _product(p: dict[int, float], q: dict[int, float]) -> dict[int, float]:
    # Operands act on disjoint registers, so masks combine by OR.
    return {mp | mq: cp * cq for mp, cp in p.items() for mq, cq in q.items()}


def expand_pauli(h: DiagonalHamiltonian, eps: float = PAULI_EPS) -> list[PauliZTerm]:
    enc, inst = h.enc, h.inst
    M = enc.M
    proj = {(i, a): _projector_terms(enc, i, a) for i in range(M) for a in range(enc.num_codes)}
    acc: dict[int, float] = defaultdict(float)

    def add(terms: dict[int, float], weight: float) -> None:
        if weight == 0:
            return
        for m, c in terms.items():
            acc[m] += weight * c

    for a in range(M):
        add(proj[0, a], inst.dist[0, a + 1])
        add(proj[M - 1, a], inst.dist[a + 1, 0])
    for i in range(M - 1):
        for a in range(M):
            for b in range(M):
                add(_product(proj[i, a], proj[i + 1, b]), inst.dist[a + 1, b + 1])
    if h.lam:
        for i in range(M):
            for j in range(i + 1, M):
                for a in range(M):
                    add(_product(proj[i, a], proj[j, a]), h.lam)
    if h.mu:
        for i in range(M):
            for a in range(M, enc.num_codes):
                add(proj[i, a], h.mu)
    return [PauliZTerm(acc[m], m) for m in sorted(acc) if abs(acc[m]) >= eps]


def _parity(x: np.ndarray) -> np.ndarray:
    x = x.copy()
    p = np.zeros_like(x)
    while np.any(x):
        p ^= x & 1
        x >>= 1
    return p


def evaluate_terms(terms: Sequence[PauliZTerm], states) -> np.ndarray:
    states = np.atleast_1d(np.asarray(states, dtype=np.int64))
    out = np.zeros(len(states))
    for t in terms:
        out += t.coeff * (1 - 2 * _parity(states & t.z_mask))
    return out


def write_pauli_csv(terms: Iterable[PauliZTerm], path: str | Path | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["coeff", "z_mask"])
    for t in terms:
        w.writerow([repr(float(t.coeff)), hex(t.z_mask)])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def parse_pauli_csv(text: str) -> list[PauliZTerm]:
    rows = csv.DictReader(line for line in io.StringIO(text) if not line.startswith("#"))
    return [PauliZTerm(float(r["coeff"]), int(r["z_mask"], 16)) for r in rows]


def read_pauli_csv(path: str | Path) -> list[PauliZTerm]:
    return parse_pauli_csv(Path(path).read_text())


# -- one-hot QUBO baseline -----------------------------------------------------------------

@dataclass(frozen=True)
class QuboCost:
    n: int
    A: float
    B: float

    @classmethod
    def for_instance(cls, inst: TspInstance) -> "QuboCost":
        p = default_penalty(inst)
        return cls(inst.n, p, p)


def qubo_cost(q: QuboCost, inst: TspInstance, x) -> float:
    """One-hot cost; ``x[i, u] == 1`` places city ``u`` at position ``i``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (q.n, q.n) or inst.n != q.n:
        raise ValueError(f"assignment must be {q.n}x{q.n}")
    nxt = np.roll(x, -1, axis=0)
    distance = float(np.einsum("iu,uv,iv->", x, inst.dist, nxt))
    pos = float(((1 - x.sum(axis=1)) ** 2).sum())
    city = float(((1 - x.sum(axis=0)) ** 2).sum())
    return distance + q.A * pos + q.B * city


def one_hot(tour: Sequence[int]) -> np.ndarray:
    n = len(tour)
    x = np.zeros((n, n), dtype=int)
    x[np.arange(n), list(tour)] = 1
    return x
