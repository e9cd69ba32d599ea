"""Permutation-preserving register-swap ansatz and its Adam-driven VQE loop.

Two evaluation routes exist. ``method="dense"`` runs the gate list on the
full ``M*k + 1`` qubit statevector. ``method="subspace"`` tracks only the
``2 * M!`` amplitudes that the circuit can ever populate (ancilla bit times
feasible permutation); it is exact for this ansatz and is what the
optimizer uses.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .encoding import FeasibleTour, ReducedEncoding, canonical_tour, encode_tour
from .hamiltonian import DiagonalHamiltonian, build_distance_hamiltonian
from .instances import ExactSolution, TspInstance, derive_seed, generate_instance, solve_exact
from .simulator import (
    RY,
    BlockOrder,
    GateOp,
    Statevector,
    block_gates,
    diag_expectation,
    init_basis,
    run_circuit,
)

log = logging.getLogger(__name__)

Method = Literal["dense", "subspace"]
SHIFT = math.pi / 4
TIE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class AnsatzParams:
    theta: np.ndarray

    def __post_init__(self):
        t = np.array(self.theta, dtype=float)
        if t.ndim != 2:
            raise ValueError(f"theta must be L x (M-1), got shape {t.shape}")
        object.__setattr__(self, "theta", t)

    @property
    def L(self) -> int:
        return self.theta.shape[0]

    @property
    def num_params(self) -> int:
        return self.theta.size

    @classmethod
    def zeros(cls, enc: ReducedEncoding, L: int) -> "AnsatzParams":
        return cls(np.zeros((L, enc.M - 1)))

    @classmethod
    def random(cls, enc: ReducedEncoding, L: int, seed: int, half_width: float = math.pi / 8) -> "AnsatzParams":
        rng = np.random.default_rng(seed)
        return cls(rng.uniform(-half_width, half_width, size=(L, enc.M - 1)))


def _check_params(enc: ReducedEncoding, params: AnsatzParams) -> None:
    if params.theta.shape[1] != enc.M - 1:
        raise ValueError(f"expected {enc.M - 1} angles per layer, got {params.theta.shape[1]}")


# -- resources -------------------------------------------------------------------------------

@dataclass(frozen=True)
class ResourceCount:
    qubits: int
    params: int
    one_qubit_gates: int
    cswap_gates: int


def expected_resources(M: int, L: int) -> ResourceCount:
    k = max(1, math.ceil(math.log2(M)))
    return ResourceCount(
        qubits=M * k + 1,
        params=(M - 1) * L,
        one_qubit_gates=(M - 1) * L + sum(bin(i).count("1") for i in range(M)),
        cswap_gates=k * (M - 1) * L,
    )


def prior_work_resources(M: int) -> dict[str, float]:
    """Reference constants for the one-hot feasible-subspace ansatz (not implemented here)."""
    return {
        "qubits": M**2,
        "params": M**2 / 2 - M / 2,
        "one_qubit_gates": M**2 - 1,
        "two_qubit_gates": M**2 - M + 2,
        "cswap_gates": M**3 / 3 - M**2 / 2 + M / 6 - 1,
    }


def count_resources(gates: Sequence[GateOp], num_qubits: int, num_params: int) -> ResourceCount:
    return ResourceCount(
        qubits=num_qubits,
        params=num_params,
        one_qubit_gates=sum(g.kind == "RY" for g in gates),
        cswap_gates=sum(g.kind == "CSWAP" for g in gates),
    )


# -- circuit ---------------------------------------------------------------------------------

def preparation_gates(enc: ReducedEncoding, tour: FeasibleTour | None = None) -> list[GateOp]:
    """Bit flips taking |0...0> to the encoded tour; RY(pi) acts as X on |0>."""
    state = encode_tour(enc, tour or canonical_tour(enc))
    return [RY(q, math.pi) for q in range(enc.num_data_qubits) if state >> q & 1]


def build_layer_circuit(enc: ReducedEncoding, params: AnsatzParams, include_preparation: bool = True,
                        order: BlockOrder = "rotation_first") -> list[GateOp]:
    _check_params(enc, params)
    aux = enc.num_data_qubits
    gates = preparation_gates(enc) if include_preparation else []
    for layer in params.theta:
        for i, th in enumerate(layer):
            gates.extend(block_gates(enc, i, th, aux, order))
    return gates


def prepare_state(enc: ReducedEncoding, params: AnsatzParams, order: BlockOrder = "rotation_first") -> Statevector:
    sv = init_basis(enc.num_data_qubits + 1, 0)
    return run_circuit(sv, build_layer_circuit(enc, params, include_preparation=True, order=order))


# -- permutation-subspace engine ------------------------------------------------------------

class PermutationSpace:
    """Amplitudes indexed by (ancilla bit, feasible permutation)."""

    def __init__(self, enc: ReducedEncoding, h_dist: DiagonalHamiltonian | None = None,
                 order: BlockOrder = "rotation_first"):
        if order not in ("rotation_first", "swap_first"):
            raise ValueError(f"unknown block order {order!r}")
        self.enc = enc
        self.order = order
        self.perms = [FeasibleTour(p) for p in itertools.permutations(range(enc.M))]
        index = {p.codes: j for j, p in enumerate(self.perms)}
        self.swap_index = np.array(
            [[index[p.swapped(i).codes] for p in self.perms] for i in range(enc.M - 1)], dtype=np.intp
        )
        self.start = index[canonical_tour(enc).codes]
        self.states = np.array([encode_tour(enc, p) for p in self.perms], dtype=np.int64)
        self.lengths = None if h_dist is None else h_dist.energies(self.states)

    @property
    def size(self) -> int:
        return len(self.perms)

    def forward(self, angles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Batched circuit: ``angles`` is (batch, L*(M-1)), flattened layer-major."""
        angles = np.atleast_2d(angles)
        B, P = angles.shape
        nb = self.enc.M - 1
        a0 = np.zeros((B, self.size))
        a0[:, self.start] = 1.0
        a1 = np.zeros((B, self.size))
        cos, sin = np.cos(angles), np.sin(angles)
        for p in range(P):
            sw = self.swap_index[p % nb]
            c, s = cos[:, p, None], sin[:, p, None]
            if self.order == "swap_first":
                a1 = a1[:, sw]
            a0, a1 = c * a0 - s * a1, s * a0 + c * a1
            if self.order == "rotation_first":
                a1 = a1[:, sw]
        return a0, a1

    def probabilities(self, angles: np.ndarray) -> np.ndarray:
        a0, a1 = self.forward(angles)
        return a0**2 + a1**2

    def energies(self, angles: np.ndarray) -> np.ndarray:
        if self.lengths is None:
            raise ValueError("no Hamiltonian attached")
        # Row-wise reduction keeps each row's value independent of batch size.
        return (self.probabilities(angles) * self.lengths).sum(axis=-1)

    def value_and_grad(self, theta: np.ndarray) -> tuple[float, np.ndarray]:
        """Energy and parameter-shift gradient from one batched pass (2P + 1 circuits)."""
        flat = np.ravel(theta)
        P = flat.size
        batch = np.tile(flat, (2 * P + 1, 1))
        batch[np.arange(P), np.arange(P)] += SHIFT
        batch[P + np.arange(P), np.arange(P)] -= SHIFT
        e = self.energies(batch)
        return float(e[-1]), (e[:P] - e[P : 2 * P]).reshape(np.shape(theta))

    def value_and_grad_adjoint(self, angles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Reverse-mode energy gradient for a batch of flat angle vectors.

        Equal to the parameter-shift gradient up to rounding; costs one forward
        and one backward sweep instead of 2P circuits.
        """
        angles = np.atleast_2d(angles)
        if self.lengths is None:
            raise ValueError("no Hamiltonian attached")
        B, P = angles.shape
        nb = self.enc.M - 1
        a0, a1 = self.forward(angles)
        e = ((a0**2 + a1**2) * self.lengths).sum(axis=-1)
        l0, l1 = 2 * self.lengths * a0, 2 * self.lengths * a1
        cos, sin = np.cos(angles), np.sin(angles)
        grad = np.empty((B, P))
        for p in range(P - 1, -1, -1):
            sw = self.swap_index[p % nb]
            c, s = cos[:, p, None], sin[:, p, None]
            if self.order == "rotation_first":
                a1, l1 = a1[:, sw], l1[:, sw]
            # d/dtheta of the rotation, expressed at its output: R(pi/2) applied to the output state
            grad[:, p] = (l1 * a0 - l0 * a1).sum(axis=-1)
            a0, a1 = c * a0 + s * a1, c * a1 - s * a0
            l0, l1 = c * l0 + s * l1, c * l1 - s * l0
            if self.order == "swap_first":
                a1, l1 = a1[:, sw], l1[:, sw]
        return e, grad

    def tour_probabilities(self, theta: np.ndarray) -> dict[FeasibleTour, float]:
        p = self.probabilities(np.ravel(theta)[None, :])[0]
        return dict(zip(self.perms, p.tolist()))


# -- objective and gradient -----------------------------------------------------------------

def energy(enc: ReducedEncoding, h_dist: DiagonalHamiltonian, params: AnsatzParams,
           method: Method = "dense", order: BlockOrder = "rotation_first") -> float:
    _check_params(enc, params)
    if method == "dense":
        return diag_expectation(prepare_state(enc, params, order), h_dist)
    if method == "subspace":
        return float(PermutationSpace(enc, h_dist, order).energies(params.theta.ravel()[None, :])[0])
    raise ValueError(f"unknown method {method!r}")


def gradient(enc: ReducedEncoding, h_dist: DiagonalHamiltonian, params: AnsatzParams,
             method: Method = "subspace", order: BlockOrder = "rotation_first") -> np.ndarray:
    """Parameter-shift gradient: dE/dtheta = E(theta + pi/4) - E(theta - pi/4) per angle."""
    _check_params(enc, params)
    if method == "subspace":
        return PermutationSpace(enc, h_dist, order).value_and_grad(params.theta)[1]
    if method != "dense":
        raise ValueError(f"unknown method {method!r}")
    g = np.zeros_like(params.theta)
    for idx in np.ndindex(*params.theta.shape):
        plus, minus = params.theta.copy(), params.theta.copy()
        plus[idx] += SHIFT
        minus[idx] -= SHIFT
        g[idx] = energy(enc, h_dist, AnsatzParams(plus), "dense", order) - energy(
            enc, h_dist, AnsatzParams(minus), "dense", order
        )
    return g


# -- optimisation -----------------------------------------------------------------------------

@dataclass(frozen=True)
class OptConfig:
    learning_rate: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    iterations: int = 5000
    init_half_width: float = math.pi / 2
    order: BlockOrder = "rotation_first"
    gradient: Literal["adjoint", "shift"] = "adjoint"


@dataclass
class VqeRunResult:
    final_energy: float
    energy_trace: list[float]
    best_tour: FeasibleTour
    success: bool
    iterations_used: int
    theta: np.ndarray = field(repr=False)
    tied_tours: tuple[FeasibleTour, ...] = ()


def adam(value_and_grad, x0: np.ndarray, cfg: OptConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Adam over a batch of independent rows.

    ``value_and_grad`` maps a (batch, P) array to (energies, gradients).
    Returns the lowest-energy iterate of every row, those energies, and the
    (iterations, batch) energy trace.
    """
    x = np.array(x0, dtype=float)
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    trace = []
    best_x, best_e = x.copy(), np.full(len(x), np.inf)
    for t in range(1, cfg.iterations + 1):
        e, g = value_and_grad(x)
        trace.append(e)
        better = e < best_e
        best_x[better], best_e[better] = x[better], e[better]
        m = cfg.beta1 * m + (1 - cfg.beta1) * g
        v = cfg.beta2 * v + (1 - cfg.beta2) * g * g
        mhat = m / (1 - cfg.beta1**t)
        vhat = v / (1 - cfg.beta2**t)
        x = x - cfg.learning_rate * mhat / (np.sqrt(vhat) + cfg.eps)
    e, _ = value_and_grad(x)
    better = e < best_e
    best_x[better], best_e[better] = x[better], e[better]
    return best_x, best_e, np.array(trace).reshape(-1, len(x))


def select_best_tours(probs: dict[FeasibleTour, float], tol: float = TIE_TOL) -> tuple[FeasibleTour, ...]:
    top = max(probs.values())
    return tuple(t for t, p in probs.items() if p >= top - tol)


def _batched_value_and_grad(space: PermutationSpace, method: str):
    if method == "adjoint":
        return space.value_and_grad_adjoint
    if method == "shift":
        def vg(x):
            out = [space.value_and_grad(row) for row in x]
            return np.array([o[0] for o in out]), np.array([o[1] for o in out])
        return vg
    raise ValueError(f"unknown gradient method {method!r}")


def run_vqe_batch(inst: TspInstance, enc: ReducedEncoding, L: int, seeds: Sequence[int],
                  opt: OptConfig = OptConfig(), solution: ExactSolution | None = None,
                  space: PermutationSpace | None = None) -> list[VqeRunResult]:
    """Independent runs, one per initialization seed, optimized side by side."""
    if L < 1:
        raise ValueError("need at least one layer")
    solution = solution or solve_exact(inst)
    space = space or PermutationSpace(enc, build_distance_hamiltonian(inst, enc), opt.order)
    theta0 = np.array([AnsatzParams.random(enc, L, s, opt.init_half_width).theta.ravel() for s in seeds])
    if opt.iterations == 0:
        best, e_best, trace = theta0, space.energies(theta0), np.zeros((0, len(seeds)))
    else:
        best, e_best, trace = adam(_batched_value_and_grad(space, opt.gradient), theta0, opt)
    optimal = {FeasibleTour.from_full_tour(t) for t in solution.optimal_tours}
    probs = space.probabilities(best)
    results = []
    for r, seed in enumerate(seeds):
        tied = select_best_tours(dict(zip(space.perms, probs[r].tolist())))
        if len(tied) > 1:
            log.info("tie between %d tours at max probability (seed=%s, L=%d)", len(tied), seed, L)
        results.append(VqeRunResult(
            final_energy=float(e_best[r]),
            energy_trace=trace[:, r].tolist(),
            best_tour=tied[0],
            success=any(t in optimal for t in tied),
            iterations_used=trace.shape[0],
            theta=best[r].reshape(L, enc.M - 1),
            tied_tours=tied,
        ))
    return results


def run_vqe(inst: TspInstance, enc: ReducedEncoding, L: int, seed: int, opt: OptConfig = OptConfig(),
            solution: ExactSolution | None = None, space: PermutationSpace | None = None) -> VqeRunResult:
    return run_vqe_batch(inst, enc, L, [seed], opt, solution, space)[0]


# -- depth sweep ----------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepConfig:
    n: int
    depths: tuple[int, ...]
    num_instances: int = 3
    num_inits: int = 20
    root_seed: int = 2024
    weight_range: tuple[float, float] = (10.0, 50.0)
    integer_weights: bool = False
    opt: OptConfig = OptConfig()


def sweep_instances(cfg: SweepConfig) -> list[TspInstance]:
    return [
        generate_instance(cfg.n, derive_seed(cfg.root_seed, "instance", cfg.n, j), cfg.weight_range,
                          cfg.integer_weights)
        for j in range(cfg.num_instances)
    ]


def _sweep_job(args) -> list[dict]:
    inst, L, init_seeds, opt = args
    enc = ReducedEncoding(inst.n)
    results = run_vqe_batch(inst, enc, L, init_seeds, opt)
    return [
        {
            "n": inst.n, "L": L, "instance_seed": inst.seed, "init_seed": s,
            "success": int(r.success), "final_energy": r.final_energy, "iterations": r.iterations_used,
        }
        for s, r in zip(init_seeds, results)
    ]


def depth_sweep(cfg: SweepConfig, workers: int = 1,
                instances: Sequence[TspInstance] | None = None) -> tuple[list[dict], list[dict]]:
    """Per-run rows and per-depth (mean, min, max) of per-instance success rates."""
    if not cfg.depths:
        raise ValueError("depth list is empty")
    instances = list(instances) if instances is not None else sweep_instances(cfg)
    jobs = []
    for L in cfg.depths:
        for j, inst in enumerate(instances):
            seeds = [derive_seed(cfg.root_seed, "init", cfg.n, j, r) for r in range(cfg.num_inits)]
            jobs.append((inst, L, seeds, cfg.opt))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(j) for j in jobs]
    rows = [r for chunk in results for r in chunk]
    return rows, aggregate_success(rows)


def aggregate_success(rows: Sequence[dict]) -> list[dict]:
    per: dict[tuple[int, int], dict[int, list[int]]] = {}
    for r in rows:
        per.setdefault((r["n"], r["L"]), {}).setdefault(r["instance_seed"], []).append(r["success"])
    out = []
    for (n, L), by_inst in sorted(per.items()):
        rates = [float(np.mean(v)) for v in by_inst.values()]
        out.append({"n": n, "L": L, "mean": float(np.mean(rates)), "min": min(rates), "max": max(rates)})
    return out
