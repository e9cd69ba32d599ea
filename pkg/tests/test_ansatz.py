import math

import numpy as np
import pytest

from oracles import dense_run
from qtsp.ansatz import (
    AnsatzParams,
    OptConfig,
    PermutationSpace,
    SweepConfig,
    adam,
    build_layer_circuit,
    count_resources,
    depth_sweep,
    energy,
    expected_resources,
    gradient,
    prepare_state,
    run_vqe,
    run_vqe_batch,
    select_best_tours,
)
from qtsp.encoding import FeasibleTour, ReducedEncoding, canonical_tour
from qtsp.hamiltonian import build_distance_hamiltonian
from qtsp.instances import TspInstance, generate_instance, solve_exact, tour_length
from qtsp.simulator import data_probabilities, marginal_tour_probabilities


def setup(n, seed=0):
    inst = generate_instance(n, seed)
    enc = ReducedEncoding(n)
    return inst, enc, build_distance_hamiltonian(inst, enc)


@pytest.mark.parametrize("M", range(3, 10))
@pytest.mark.parametrize("L", range(1, 6))
def test_resource_formulas(M, L):
    enc = ReducedEncoding(M + 1)
    params = AnsatzParams.zeros(enc, L)
    got = count_resources(build_layer_circuit(enc, params), enc.num_data_qubits + 1, params.num_params)
    assert got == expected_resources(M, L)


def test_n6_circuit_sizes():
    enc = ReducedEncoding(6)
    gates = build_layer_circuit(enc, AnsatzParams.zeros(enc, 1), include_preparation=False)
    assert sum(g.kind == "CSWAP" for g in gates) == 12
    assert sum(g.kind == "RY" for g in gates) == 4
    assert AnsatzParams.zeros(enc, 12).num_params == 48
    assert expected_resources(5, 1).qubits == 16


def test_preparation_reaches_canonical_tour():
    enc = ReducedEncoding(6)
    sv = prepare_state(enc, AnsatzParams.zeros(enc, 2))
    assert marginal_tour_probabilities(sv, enc)[canonical_tour(enc)] == pytest.approx(1.0)


@pytest.mark.parametrize("order", ["rotation_first", "swap_first"])
def test_dense_matches_kron_oracle(order):
    inst, enc, h = setup(4, 3)
    rng = np.random.default_rng(0)
    for _ in range(5):
        params = AnsatzParams(rng.uniform(-math.pi, math.pi, (3, enc.M - 1)))
        n = enc.num_data_qubits + 1
        psi = dense_run(n, build_layer_circuit(enc, params, order=order))
        p = (np.abs(psi) ** 2).reshape(2, -1).sum(axis=0)
        assert energy(enc, h, params, "dense", order) == pytest.approx(p @ h.diag, abs=1e-10)


@pytest.mark.parametrize("n", [4, 5, 6])
@pytest.mark.parametrize("order", ["rotation_first", "swap_first"])
def test_subspace_engine_matches_dense(n, order):
    inst, enc, h = setup(n, n)
    rng = np.random.default_rng(n)
    space = PermutationSpace(enc, h, order)
    for L in (1, 3):
        params = AnsatzParams(rng.uniform(-math.pi, math.pi, (L, enc.M - 1)))
        sv = prepare_state(enc, params, order)
        dense = marginal_tour_probabilities(sv, enc)
        sub = space.tour_probabilities(params.theta)
        assert max(abs(dense[t] - sub[t]) for t in dense) < 1e-12
        assert energy(enc, h, params, "subspace", order) == pytest.approx(energy(enc, h, params, "dense", order), abs=1e-9)


def test_zero_angles_give_canonical_length():
    inst, enc, h = setup(5, 2)
    assert energy(enc, h, AnsatzParams.zeros(enc, 4)) == pytest.approx(tour_length(inst, (0, 1, 2, 3, 4)))


def test_energy_never_below_optimum():
    inst, enc, h = setup(5, 9)
    opt = solve_exact(inst).optimal_length
    rng = np.random.default_rng(1)
    space = PermutationSpace(enc, h)
    e = space.energies(rng.uniform(-math.pi, math.pi, (500, 3 * (enc.M - 1))))
    assert e.min() >= opt - 1e-9


def test_probability_mass_stays_feasible():
    inst, enc, h = setup(6, 1)
    rng = np.random.default_rng(5)
    params = AnsatzParams(rng.uniform(-math.pi, math.pi, (2, enc.M - 1)))
    sv = prepare_state(enc, params)
    assert sum(marginal_tour_probabilities(sv, enc).values()) == pytest.approx(1.0, abs=1e-12)
    assert data_probabilities(sv, enc.num_data_qubits).sum() == pytest.approx(1.0)


def central_difference(enc, h, theta, step=1e-5):
    g = np.zeros_like(theta)
    for idx in np.ndindex(*theta.shape):
        tp, tm = theta.copy(), theta.copy()
        tp[idx] += step
        tm[idx] -= step
        g[idx] = (energy(enc, h, AnsatzParams(tp), "subspace") - energy(enc, h, AnsatzParams(tm), "subspace")) / (2 * step)
    return g


@pytest.mark.parametrize("n", [4, 5])
def test_parameter_shift_matches_finite_difference(n):
    inst, enc, h = setup(n, 17)
    rng = np.random.default_rng(n)
    theta = rng.uniform(-math.pi, math.pi, (3, enc.M - 1))
    g = gradient(enc, h, AnsatzParams(theta))
    assert np.max(np.abs(g - central_difference(enc, h, theta))) < 1e-6


def test_dense_and_subspace_gradients_agree():
    inst, enc, h = setup(4, 2)
    params = AnsatzParams(np.random.default_rng(0).uniform(-1, 1, (2, enc.M - 1)))
    assert np.allclose(gradient(enc, h, params, "dense"), gradient(enc, h, params, "subspace"), atol=1e-10)


@pytest.mark.parametrize("order", ["rotation_first", "swap_first"])
def test_adjoint_matches_parameter_shift(order):
    inst, enc, h = setup(6, 4)
    space = PermutationSpace(enc, h, order)
    rng = np.random.default_rng(2)
    batch = rng.uniform(-math.pi, math.pi, (4, 5 * (enc.M - 1)))
    e, g = space.value_and_grad_adjoint(batch)
    for row, er, gr in zip(batch, e, g):
        e_shift, g_shift = space.value_and_grad(row)
        assert er == pytest.approx(e_shift, abs=1e-9)
        assert np.allclose(gr, g_shift, atol=1e-9)


def test_gradient_vanishes_at_zero_angles():
    # Cities 1 and 2 are interchangeable, so swapping registers 0 and 1 keeps the length.
    d = generate_instance(5, 21).dist.copy()
    d[2, [0, 3, 4]] = d[1, [0, 3, 4]]
    d[[0, 3, 4], 2] = d[[0, 3, 4], 1]
    enc = ReducedEncoding(5)
    h = build_distance_hamiltonian(TspInstance(d), enc)
    assert tour_length(h.inst, (0, 1, 2, 3, 4)) == pytest.approx(tour_length(h.inst, (0, 2, 1, 3, 4)))
    g = gradient(enc, h, AnsatzParams.zeros(enc, 2))
    assert g[0, 0] == pytest.approx(0, abs=1e-12)
    assert np.allclose(g, 0, atol=1e-12)


def test_flat_landscape_has_zero_gradient():
    d = np.full((5, 5), 4.0) - 4 * np.eye(5)
    enc = ReducedEncoding(5)
    h = build_distance_hamiltonian(TspInstance(d), enc)
    theta = np.random.default_rng(0).uniform(-3, 3, (3, 3))
    assert np.allclose(gradient(enc, h, AnsatzParams(theta)), 0, atol=1e-12)


def test_param_shape_checked():
    inst, enc, h = setup(5)
    with pytest.raises(ValueError):
        energy(enc, h, AnsatzParams(np.zeros((2, 4))))
    with pytest.raises(ValueError):
        AnsatzParams(np.zeros(3))


def test_adam_minimizes_a_quadratic():
    target = np.array([[1.0, -2.0], [0.5, 0.5]])

    def vg(x):
        return ((x - target) ** 2).sum(axis=1), 2 * (x - target)

    best, e, trace = adam(vg, np.zeros((2, 2)), OptConfig(learning_rate=0.1, iterations=500))
    assert np.allclose(best, target, atol=1e-3)
    assert trace.shape == (500, 2)
    assert np.all(e <= trace.min(axis=0) + 1e-15)


def test_zero_iteration_run_reports_start():
    inst, enc, h = setup(5, 6)
    r = run_vqe(inst, enc, 3, seed=1, opt=OptConfig(iterations=0, init_half_width=0.0))
    assert r.best_tour == canonical_tour(enc)
    assert r.final_energy == pytest.approx(tour_length(inst, (0, 1, 2, 3, 4)))
    assert r.energy_trace == [] and r.iterations_used == 0


def test_n4_all_seeds_succeed():
    inst, enc, _ = setup(4, 12)
    results = run_vqe_batch(inst, enc, 3, list(range(20)))
    assert all(r.success for r in results)


def test_batch_matches_single_runs():
    inst, enc, _ = setup(5, 3)
    opt = OptConfig(iterations=60)
    batch = run_vqe_batch(inst, enc, 4, [11, 12, 13], opt)
    single = run_vqe(inst, enc, 4, 12, opt)
    assert batch[1].final_energy == single.final_energy
    assert batch[1].energy_trace == single.energy_trace


def test_shift_and_adjoint_optimizers_agree():
    inst, enc, _ = setup(5, 3)
    a = run_vqe(inst, enc, 2, 5, OptConfig(iterations=40, gradient="adjoint"))
    b = run_vqe(inst, enc, 2, 5, OptConfig(iterations=40, gradient="shift"))
    assert a.final_energy == pytest.approx(b.final_energy, abs=1e-8)


def test_ties_are_reported():
    t0, t1 = FeasibleTour((0, 1, 2)), FeasibleTour((1, 0, 2))
    assert select_best_tours({t0: 0.5, t1: 0.5, FeasibleTour((2, 1, 0)): 0.0}) == (t0, t1)


def test_sweep_granularity_and_determinism():
    cfg = SweepConfig(n=4, depths=(1, 2), num_instances=1, num_inits=1, opt=OptConfig(iterations=30))
    rows, agg = depth_sweep(cfg)
    assert {r["success"] for r in rows} <= {0, 1}
    assert all(a["mean"] in (0.0, 1.0) for a in agg)
    assert depth_sweep(cfg) == (rows, agg)


def test_parallel_sweep_matches_serial():
    cfg = SweepConfig(n=5, depths=(2,), num_instances=2, num_inits=3, opt=OptConfig(iterations=25))
    assert depth_sweep(cfg, workers=2) == depth_sweep(cfg, workers=1)


def test_empty_depth_list_rejected():
    with pytest.raises(ValueError):
        depth_sweep(SweepConfig(n=4, depths=()))


def test_optimized_energy_never_exceeds_start():
    inst, enc, h = setup(6, 8)
    space = PermutationSpace(enc, h)
    seeds = list(range(10))
    results = run_vqe_batch(inst, enc, 4, seeds, OptConfig(iterations=150), space=space)
    for s, r in zip(seeds, results):
        start = space.energies(AnsatzParams.random(enc, 4, s, OptConfig().init_half_width).theta.ravel()[None, :])[0]
        assert r.final_energy <= start + 1e-12


def test_argmax_rule_is_scale_invariant():
    inst, enc, _ = setup(5, 13)
    opt = OptConfig(iterations=200)
    a = run_vqe_batch(inst, enc, 4, [1, 2, 3, 4], opt)
    b = run_vqe_batch(inst.scaled(3.5), enc, 4, [1, 2, 3, 4], opt)
    assert [r.best_tour for r in a] == [r.best_tour for r in b]
    assert [r.success for r in a] == [r.success for r in b]
