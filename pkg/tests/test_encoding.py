import itertools

import pytest
from hypothesis import given, strategies as st

from qtsp.encoding import (
    FeasibleTour,
    ReducedEncoding,
    StateKind,
    bitstring,
    canonical_tour,
    classify_state,
    decode_state,
    encode_tour,
    feasible_state_index_set,
    pack_codes,
    projector_value,
    register_codes,
)
import numpy as np


@pytest.mark.parametrize("n,M,k", [(3, 2, 1), (4, 3, 2), (5, 4, 2), (6, 5, 3), (9, 8, 3), (10, 9, 4)])
def test_register_sizes(n, M, k):
    enc = ReducedEncoding(n)
    assert (enc.M, enc.k, enc.num_data_qubits) == (M, k, M * k)


def test_register_layout():
    enc = ReducedEncoding(6)
    assert enc.register_qubits(0) == [0, 1, 2]
    assert enc.register_qubits(4) == [12, 13, 14]
    with pytest.raises(ValueError):
        enc.register_qubits(5)


def test_projector_bit_match():
    enc = ReducedEncoding(5)
    state = pack_codes(enc, (0, 1, 2, 3))
    assert projector_value(enc, state, 1, 1) == 1
    assert projector_value(enc, state, 1, 2) == 0


@given(st.integers(0, 2**15 - 1), st.integers(0, 4))
def test_projectors_complete(state, register):
    enc = ReducedEncoding(6)
    assert sum(projector_value(enc, state, register, c) for c in range(2**enc.k)) == 1


def test_packing_order():
    enc = ReducedEncoding(5)
    assert encode_tour(enc, FeasibleTour((0, 1, 2, 3))) == 0b11100100
    assert bitstring(enc, 0b11100100) == "00 01 10 11"


def test_round_trip_all_permutations():
    enc = ReducedEncoding(5)
    states = set()
    for p in itertools.permutations(range(4)):
        s = encode_tour(enc, FeasibleTour(p))
        states.add(s)
        assert decode_state(enc, s) == p
    assert len(states) == 24


def test_n6_qubit_count():
    enc = ReducedEncoding(6)
    assert encode_tour(enc, canonical_tour(enc)) < 2**15
    assert enc.num_data_qubits + 1 == 16


def test_full_tour_conversion():
    t = FeasibleTour.from_full_tour((0, 3, 1, 4, 2))
    assert t.codes == (2, 0, 3, 1)
    assert t.to_full_tour() == (0, 3, 1, 4, 2)
    with pytest.raises(ValueError):
        FeasibleTour.from_full_tour((0, 1, 1, 2))
    with pytest.raises(ValueError):
        FeasibleTour((0, 0, 1))


def test_classification():
    enc = ReducedEncoding(5)
    c = classify_state(enc, pack_codes(enc, (0, 1, 2, 3)))
    assert c.kind is StateKind.FEASIBLE and c.tour.codes == (0, 1, 2, 3)
    assert classify_state(enc, pack_codes(enc, (0, 0, 1, 2))).kind is StateKind.REPEATED_CITY
    enc3 = ReducedEncoding(4)
    for i in range(3):
        codes = [0, 1, 2]
        codes[i] = 3
        assert classify_state(enc3, pack_codes(enc3, codes)).kind is StateKind.INVALID_CODE


@pytest.mark.parametrize("n,count", [(4, 6), (5, 24), (6, 120)])
def test_feasible_set(n, count):
    enc = ReducedEncoding(n)
    feas = feasible_state_index_set(enc)
    assert len(feas) == count
    for s in range(2**enc.num_data_qubits):
        assert (classify_state(enc, s).kind is StateKind.FEASIBLE) == (s in feas)


def test_vectorized_codes_match_scalar_decode():
    enc = ReducedEncoding(6)
    states = np.arange(0, 2**15, 37)
    codes = register_codes(enc, states)
    for s, row in zip(states, codes):
        assert tuple(row) == decode_state(enc, int(s))


def test_out_of_range_state_rejected():
    enc = ReducedEncoding(4)
    with pytest.raises(ValueError):
        decode_state(enc, 2**6)
