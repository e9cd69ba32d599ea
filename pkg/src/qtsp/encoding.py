"""Symmetry-reduced binary city-label registers.

City 0 is fixed as the start of every tour. The remaining ``M = n - 1``
positions each hold a ``k``-bit code; reduced label ``a`` stands for original
city ``a + 1``. Register ``i`` occupies bits ``[i*k, (i+1)*k)`` of the packed
basis-state integer, little-endian inside the register, so bit ``i*k + b`` is
bit ``b`` of register ``i``'s code. Qubit ``q`` of a statevector is bit ``q``
of the amplitude index.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

FEASIBLE_ENUMERATION_CAP = 8


@dataclass(frozen=True)
class ReducedEncoding:
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"need at least 2 cities, got {self.n}")

    @property
    def M(self) -> int:
        return self.n - 1

    @property
    def k(self) -> int:
        return max(1, math.ceil(math.log2(self.M)))

    @property
    def start_city(self) -> int:
        return 0

    @property
    def num_data_qubits(self) -> int:
        return self.M * self.k

    @property
    def num_codes(self) -> int:
        return 1 << self.k

    def register_qubits(self, i: int) -> list[int]:
        self._check_register(i)
        return list(range(i * self.k, (i + 1) * self.k))

    def city_of(self, label: int) -> int:
        return label + 1

    def label_of(self, city: int) -> int:
        if not 1 <= city < self.n:
            raise ValueError(f"city {city} has no reduced label")
        return city - 1

    def _check_register(self, i: int) -> None:
        if not 0 <= i < self.M:
            raise ValueError(f"register {i} out of range for M={self.M}")


@dataclass(frozen=True)
class FeasibleTour:
    """Permutation of reduced labels; position ``i`` is register ``i``."""

    codes: tuple[int, ...]

    def __post_init__(self):
        codes = tuple(int(c) for c in self.codes)
        if sorted(codes) != list(range(len(codes))):
            raise ValueError(f"{codes} is not a permutation of 0..{len(codes) - 1}")
        object.__setattr__(self, "codes", codes)

    @classmethod
    def from_full_tour(cls, tour: Sequence[int]) -> "FeasibleTour":
        """Rotate ``tour`` to start at city 0 and drop the start city."""
        t = list(tour)
        s = t.index(0)
        t = t[s:] + t[:s]
        return cls(tuple(c - 1 for c in t[1:]))

    def to_full_tour(self) -> tuple[int, ...]:
        return (0, *(c + 1 for c in self.codes))

    def swapped(self, i: int) -> "FeasibleTour":
        c = list(self.codes)
        c[i], c[i + 1] = c[i + 1], c[i]
        return FeasibleTour(tuple(c))


def canonical_tour(enc: ReducedEncoding) -> FeasibleTour:
    return FeasibleTour(tuple(range(enc.M)))


class StateKind(enum.Enum):
    FEASIBLE = "feasible"
    REPEATED_CITY = "repeated_city"
    INVALID_CODE = "invalid_code"


class Classification(NamedTuple):
    kind: StateKind
    tour: FeasibleTour | None = None


def decode_state(enc: ReducedEncoding, state: int) -> tuple[int, ...]:
    if not 0 <= state < 1 << enc.num_data_qubits:
        raise ValueError(f"state {state} outside the {enc.num_data_qubits}-qubit data space")
    mask = enc.num_codes - 1
    return tuple((state >> (i * enc.k)) & mask for i in range(enc.M))


def pack_codes(enc: ReducedEncoding, codes: Sequence[int]) -> int:
    if len(codes) != enc.M:
        raise ValueError(f"expected {enc.M} codes, got {len(codes)}")
    state = 0
    for i, c in enumerate(codes):
        if not 0 <= c < enc.num_codes:
            raise ValueError(f"code {c} does not fit in {enc.k} bits")
        state |= int(c) << (i * enc.k)
    return state


def encode_tour(enc: ReducedEncoding, tour: FeasibleTour | Sequence[int]) -> int:
    if not isinstance(tour, FeasibleTour):
        tour = FeasibleTour(tuple(tour))
    if len(tour.codes) != enc.M:
        raise ValueError(f"tour has {len(tour.codes)} positions, encoding expects {enc.M}")
    return pack_codes(enc, tour.codes)


def register_codes(enc: ReducedEncoding, states: np.ndarray) -> np.ndarray:
    """Vectorized decode: ``(len(states), M)`` array of register codes."""
    states = np.asarray(states, dtype=np.int64)
    shifts = np.arange(enc.M, dtype=np.int64) * enc.k
    return (states[:, None] >> shifts) & (enc.num_codes - 1)


def projector_value(enc: ReducedEncoding, state: int, register: int, code: int) -> int:
    enc._check_register(register)
    if not 0 <= code < enc.num_codes:
        raise ValueError(f"code {code} out of range for k={enc.k}")
    return int(decode_state(enc, state)[register] == code)


def classify_state(enc: ReducedEncoding, state: int) -> Classification:
    codes = decode_state(enc, state)
    if any(c >= enc.M for c in codes):
        return Classification(StateKind.INVALID_CODE)
    if len(set(codes)) < len(codes):
        return Classification(StateKind.REPEATED_CITY)
    return Classification(StateKind.FEASIBLE, FeasibleTour(codes))


def feasible_state_index_set(enc: ReducedEncoding, cap: int = FEASIBLE_ENUMERATION_CAP) -> frozenset[int]:
    if enc.M > cap:
        raise ValueError(f"M={enc.M} exceeds the feasible-set enumeration cap of {cap}")
    return frozenset(pack_codes(enc, p) for p in itertools.permutations(range(enc.M)))


def bitstring(enc: ReducedEncoding, state: int) -> str:
    """Registers left to right, each code written most-significant bit first."""
    return " ".join(format(c, f"0{enc.k}b") for c in decode_state(enc, state))
