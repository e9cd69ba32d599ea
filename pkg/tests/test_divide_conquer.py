import math

import numpy as np
import pytest

from oracles import dense_run, product_state
from qtsp.divide_conquer import (
    DncConfig,
    SubsystemPartition,
    exact_distributions,
    exact_factorized_energy,
    factorize,
    initial_params,
    local_gates,
    local_state,
    partition_terms,
    register_partition,
    run_dnc_spsa,
    run_dnc_variants,
    sampled_factorized_energy,
    split_params,
    target_probability,
    z_expectations,
)
from qtsp.encoding import FeasibleTour, ReducedEncoding, encode_tour
from qtsp.hamiltonian import PauliZTerm, build_distance_hamiltonian, build_hamiltonian, ground_states
from qtsp.instances import generate_instance, solve_exact
from qtsp.mitigation import ConfusionModel


@pytest.fixture(scope="module")
def n5():
    inst = generate_instance(5, 77)
    enc = ReducedEncoding(5)
    h = build_hamiltonian(inst, enc)
    return inst, enc, h, factorize(h)


def random_params(obj, rng):
    return [rng.uniform(-math.pi, math.pi, 2 * s) for s in obj.partition.sizes]


def test_submask_split():
    part = SubsystemPartition(((0, 1), (2, 3)))
    obj = partition_terms([PauliZTerm(2.0, 0b0011), PauliZTerm(1.5, 0b0110)], part)
    assert obj.submasks.tolist() == [[3, 0], [2, 1]]
    assert obj.recombine() == [0b0011, 0b0110]


def test_identity_term_contributes_its_coefficient():
    part = SubsystemPartition(((0, 1), (2, 3)))
    obj = partition_terms([PauliZTerm(4.25, 0)], part)
    rng = np.random.default_rng(0)
    for _ in range(5):
        assert exact_factorized_energy(obj, random_params(obj, rng)) == pytest.approx(4.25, abs=1e-12)


def test_partition_validation():
    with pytest.raises(ValueError):
        SubsystemPartition(((0, 1), (1, 2)))
    with pytest.raises(ValueError):
        partition_terms([PauliZTerm(1.0, 0b10000)], SubsystemPartition(((0, 1), (2, 3))))


def test_register_partition_n5(n5):
    _, enc, _, obj = n5
    part = register_partition(enc)
    assert part.groups == ((0, 1), (2, 3), (4, 5), (6, 7))
    assert obj.partition == part
    assert obj.recombine() == [t.z_mask for t in _terms(n5)]


def _terms(n5):
    from qtsp.hamiltonian import expand_pauli

    return expand_pauli(n5[2])


def test_local_state_examples():
    assert np.allclose(local_state([0, 0, 0, 0]).amps, [1, 0, 0, 0])
    flipped = local_state([math.pi, 0, 0, 0]).amps
    assert abs(abs(flipped[0b01]) - 1) < 1e-12
    rng = np.random.default_rng(1)
    for _ in range(10):
        p = rng.uniform(-3, 3, 4)
        amps = local_state(p).amps
        assert np.allclose(amps.imag, 0)
        assert np.allclose(amps, dense_run(2, local_gates(p)), atol=1e-12)
    with pytest.raises(ValueError):
        local_state([0, 0, 0])


def test_z_expectations_match_direct_sum():
    rng = np.random.default_rng(2)
    d = rng.dirichlet(np.ones(8))
    z = z_expectations(d)
    for s in range(8):
        direct = sum(d[x] * (-1) ** bin(x & s).count("1") for x in range(8))
        assert z[s] == pytest.approx(direct)


def test_basis_product_state_gives_diag_value(n5):
    inst, enc, h, obj = n5
    state = encode_tour(enc, FeasibleTour((2, 0, 3, 1)))
    params = []
    for bits in obj.partition.local_bits(state):
        params.append(np.array([math.pi * (bits & 1), math.pi * (bits >> 1 & 1), 0, 0]))
    assert exact_factorized_energy(obj, params) == pytest.approx(h.diag[state], abs=1e-9)
    # also for an infeasible basis state
    bad = 0b11110000
    params = [np.array([math.pi * (b & 1), math.pi * (b >> 1 & 1), 0, 0]) for b in obj.partition.local_bits(bad)]
    assert exact_factorized_energy(obj, params) == pytest.approx(h.diag[bad], abs=1e-9)


def test_factorized_energy_matches_tensor_product_oracle(n5):
    _, _, h, obj = n5
    rng = np.random.default_rng(3)
    for _ in range(20):
        params = random_params(obj, rng)
        psi = product_state([dense_run(2, local_gates(p)) for p in params])
        assert exact_factorized_energy(obj, params) == pytest.approx(float(np.abs(psi) ** 2 @ h.diag), abs=1e-10)


def test_target_probability_is_product_of_marginals(n5):
    _, _, h, obj = n5
    params = random_params(obj, np.random.default_rng(4))
    psi = product_state([dense_run(2, local_gates(p)) for p in params])
    targets = ground_states(h)[1]
    got = target_probability(obj.partition, exact_distributions(obj, params), targets)
    assert got == pytest.approx(sum(abs(psi[s]) ** 2 for s in targets), abs=1e-12)


def test_sampled_estimate_within_three_standard_errors(n5):
    _, _, _, obj = n5
    params = random_params(obj, np.random.default_rng(5))
    exact = exact_factorized_energy(obj, params)
    runs = np.array([sampled_factorized_energy(obj, params, 10**6, rng_seed=s) for s in range(20)])
    se = runs.std(ddof=1)
    assert abs(runs[0] - exact) <= 3 * se
    assert abs(runs.mean() - exact) <= 3 * se / math.sqrt(len(runs))


def test_shot_noise_scales_as_inverse_sqrt(n5):
    _, _, _, obj = n5
    params = random_params(obj, np.random.default_rng(6))
    shots = np.array([2**8, 2**10, 2**12, 2**14])
    sd = [np.std([sampled_factorized_energy(obj, params, int(s), rng_seed=r) for r in range(60)]) for s in shots]
    slope = np.polyfit(np.log(shots), np.log(sd), 1)[0]
    assert abs(slope + 0.5) < 0.1


def test_identity_noise_changes_nothing(n5):
    _, _, _, obj = n5
    params = random_params(obj, np.random.default_rng(7))
    clean = sampled_factorized_energy(obj, params, 2048, rng_seed=3)
    noisy = sampled_factorized_energy(obj, params, 2048, noise=ConfusionModel.identity(2), rng_seed=3)
    assert clean == noisy


def test_inversion_with_exact_calibration_removes_bias(n5):
    _, _, _, obj = n5
    params = random_params(obj, np.random.default_rng(8))
    R = ConfusionModel.from_flip_probs(2)
    exact = exact_factorized_energy(obj, params)
    raw = np.array([sampled_factorized_energy(obj, params, 10**6, noise=R, rng_seed=s) for s in range(10)])
    mit = np.array([sampled_factorized_energy(obj, params, 10**6, noise=R, mitigation="inversion", calibration=R,
                                              rng_seed=s) for s in range(10)])
    assert abs(mit[0] - exact) <= 3 * mit.std(ddof=1)
    assert abs(raw.mean() - exact) > 3 * raw.std(ddof=1)


def test_mitigation_requires_calibration(n5):
    _, _, _, obj = n5
    params = random_params(obj, np.random.default_rng(9))
    with pytest.raises(ValueError):
        sampled_factorized_energy(obj, params, 10, mitigation="ibu")
    with pytest.raises(ValueError):
        sampled_factorized_energy(obj, params, 0)


def test_split_params_round_trip(n5):
    _, _, _, obj = n5
    flat = np.arange(16.0)
    parts = split_params(obj, flat)
    assert [p.tolist() for p in parts] == [[0, 1, 2, 3], [4, 5, 6, 7], [8, 9, 10, 11], [12, 13, 14, 15]]


def test_warm_start_concentrates_on_reference(n5):
    _, _, h, obj = n5
    ref = min(ground_states(h)[1])
    theta = initial_params(obj, DncConfig(init_jitter=0.0), ref)
    assert target_probability(obj.partition, exact_distributions(obj, split_params(obj, theta)), [ref]) == pytest.approx(1)
    with pytest.raises(ValueError):
        initial_params(obj, DncConfig(), None)


def test_zero_iterations(n5):
    _, _, h, _ = n5
    tr = run_dnc_spsa(h, cfg=DncConfig(iterations=0))
    assert tr.loss == [] and tr.target_prob == []
    assert np.array_equal(tr.final_params, tr.initial_params)


def test_penalties_required():
    inst = generate_instance(5, 1)
    with pytest.raises(ValueError):
        run_dnc_spsa(build_distance_hamiltonian(inst, ReducedEncoding(5)))


def test_spsa_is_deterministic(n5):
    _, _, h, _ = n5
    cfg = DncConfig(iterations=15, seed=4)
    a = run_dnc_spsa(h, cfg=cfg, variant="ibu")
    b = run_dnc_spsa(h, cfg=cfg, variant="ibu")
    assert a.loss == b.loss and a.target_prob == b.target_prob


def test_noiseless_run_improves_on_its_start(n5):
    _, _, h, _ = n5
    tr = run_dnc_spsa(h, cfg=DncConfig(seed=1))
    assert tr.target_prob[-1] > 0.9
    assert np.mean(tr.loss[-10:]) < np.mean(tr.loss[:10])


def test_ibu_tracks_noiseless_under_symmetric_flips(n5):
    _, _, h, _ = n5
    for seed in range(3):
        tr = run_dnc_variants(h, DncConfig(seed=seed, p01=0.1, p10=0.1), ("raw", "ibu", "noiseless"))
        ref = tr["noiseless"].loss[-1]
        assert abs(tr["ibu"].loss[-1] - ref) < abs(tr["raw"].loss[-1] - ref)


def test_penalties_are_necessary_for_product_states():
    # Every basis state is a product state; exhaustive search over them.
    inst = generate_instance(5, 19)
    enc = ReducedEncoding(5)
    opt = solve_exact(inst).optimal_length
    assert build_distance_hamiltonian(inst, enc).diag.min() < opt - 1e-9
    assert build_hamiltonian(inst, enc).diag.min() == pytest.approx(opt)
