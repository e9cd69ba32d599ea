"""Product-state (divide-and-conquer) evaluation of the diagonal Hamiltonian.

The data qubits are split into small groups, each prepared by its own local
circuit. Every Pauli-Z string factorizes over the groups, so the global
energy is a coefficient-weighted sum of products of local Z-string
expectations, all of which come out of one computational-basis histogram
per group.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .encoding import ReducedEncoding
from .hamiltonian import DiagonalHamiltonian, PauliZTerm, expand_pauli, ground_states
from .instances import derive_seed
from .mitigation import ConfusionModel, calibrate, mitigate_ibu, mitigate_inversion
from .simulator import CZ, RY, Statevector, init_basis, run_circuit

LOCAL_QUBIT_CAP = 10

Mitigation = Literal["none", "ibu", "inversion"]
VARIANTS = ("raw", "ibu", "inversion", "noiseless")


@dataclass(frozen=True)
class SubsystemPartition:
    groups: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        groups = tuple(tuple(int(q) for q in g) for g in self.groups)
        flat = [q for g in groups for q in g]
        if len(set(flat)) != len(flat):
            raise ValueError("subsystem groups overlap")
        if any(not g for g in groups):
            raise ValueError("empty subsystem group")
        if any(len(g) > LOCAL_QUBIT_CAP for g in groups):
            raise ValueError(f"group larger than the local cap of {LOCAL_QUBIT_CAP} qubits")
        object.__setattr__(self, "groups", groups)

    @property
    def qubits(self) -> frozenset[int]:
        return frozenset(q for g in self.groups for q in g)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(g) for g in self.groups)

    def check_covers(self, num_qubits: int) -> None:
        if self.qubits != frozenset(range(num_qubits)):
            raise ValueError(f"groups must cover exactly qubits 0..{num_qubits - 1}")

    def local_bits(self, state: int) -> tuple[int, ...]:
        """Split a global basis index into per-group local indices."""
        return tuple(sum(((state >> q) & 1) << j for j, q in enumerate(g)) for g in self.groups)


def register_partition(enc: ReducedEncoding) -> SubsystemPartition:
    return SubsystemPartition(tuple(tuple(enc.register_qubits(i)) for i in range(enc.M)))


# -- local circuits ---------------------------------------------------------------------------

def local_num_params(num_qubits: int) -> int:
    return 2 * num_qubits


def local_gates(params: Sequence[float], num_qubits: int = 2):
    """RY on every qubit, a CZ chain, RY on every qubit again."""
    if len(params) != local_num_params(num_qubits):
        raise ValueError(f"{num_qubits}-qubit local circuit takes {local_num_params(num_qubits)} angles")
    q = num_qubits
    gates = [RY(j, params[j]) for j in range(q)]
    gates += [CZ(j, j + 1) for j in range(q - 1)]
    gates += [RY(j, params[q + j]) for j in range(q)]
    return gates


def local_state(params: Sequence[float], num_qubits: int = 2) -> Statevector:
    return run_circuit(init_basis(num_qubits, 0), local_gates(params, num_qubits))


def local_probabilities(params: Sequence[float], num_qubits: int = 2) -> np.ndarray:
    return local_state(params, num_qubits).probabilities()


def _parity_table(q: int) -> np.ndarray:
    x = np.arange(1 << q)
    anded = x[:, None] & x[None, :]
    bits = np.zeros_like(anded)
    for b in range(q):
        bits ^= (anded >> b) & 1
    return 1.0 - 2.0 * bits


def z_expectations(dist: np.ndarray) -> np.ndarray:
    """<Z^s> for every local submask ``s`` under a distribution over local outcomes."""
    q = len(dist).bit_length() - 1
    return _parity_table(q) @ np.asarray(dist, dtype=float)


# -- factorized objective ---------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FactorizedObjective:
    coeffs: np.ndarray
    submasks: np.ndarray  # (terms, groups) local Z masks
    partition: SubsystemPartition

    def recombine(self) -> list[int]:
        out = []
        for row in self.submasks:
            mask = 0
            for g, sub in zip(self.partition.groups, row):
                for j, q in enumerate(g):
                    if sub >> j & 1:
                        mask |= 1 << q
            out.append(mask)
        return out

    def energy_from_distributions(self, dists: Sequence[np.ndarray]) -> float:
        factors = np.ones(len(self.coeffs))
        for g, d in enumerate(dists):
            factors *= z_expectations(d)[self.submasks[:, g]]
        return float(self.coeffs @ factors)


def partition_terms(terms: Sequence[PauliZTerm], part: SubsystemPartition) -> FactorizedObjective:
    covered = part.qubits
    covered_mask = sum(1 << q for q in covered)
    sub = np.zeros((len(terms), len(part.groups)), dtype=np.intp)
    for t, term in enumerate(terms):
        if term.z_mask & ~covered_mask:
            raise ValueError(f"term mask {term.z_mask:#x} touches a qubit outside the partition")
        sub[t] = part.local_bits(term.z_mask)
    return FactorizedObjective(np.array([t.coeff for t in terms], dtype=float), sub, part)


def factorize(h: DiagonalHamiltonian, part: SubsystemPartition | None = None) -> FactorizedObjective:
    part = part or register_partition(h.enc)
    part.check_covers(h.num_qubits)
    return partition_terms(expand_pauli(h), part)


def split_params(obj: FactorizedObjective, flat: np.ndarray) -> list[np.ndarray]:
    sizes = [local_num_params(s) for s in obj.partition.sizes]
    if len(flat) != sum(sizes):
        raise ValueError(f"expected {sum(sizes)} parameters, got {len(flat)}")
    return np.split(np.asarray(flat, dtype=float), np.cumsum(sizes)[:-1])


def exact_distributions(obj: FactorizedObjective, all_params) -> list[np.ndarray]:
    if len(all_params) != len(obj.partition.groups):
        raise ValueError("need one parameter set per group")
    return [local_probabilities(p, s) for p, s in zip(all_params, obj.partition.sizes)]


def exact_factorized_energy(obj: FactorizedObjective, all_params) -> float:
    return obj.energy_from_distributions(exact_distributions(obj, all_params))


def _per_group(model, n_groups: int) -> list:
    if model is None or isinstance(model, ConfusionModel):
        return [model] * n_groups
    if len(model) != n_groups:
        raise ValueError("need one confusion model per group")
    return list(model)


def sampled_distributions(obj: FactorizedObjective, all_params, shots: int,
                          noise: ConfusionModel | Sequence[ConfusionModel] | None = None,
                          mitigation: Mitigation = "none",
                          calibration: ConfusionModel | Sequence[ConfusionModel] | None = None,
                          rng_seed: int = 0, ibu_iterations: int = 20) -> list[np.ndarray]:
    """One shot histogram per group, optionally corrupted and then mitigated.

    Group ``g`` draws from ``default_rng([rng_seed, g])``.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if mitigation not in ("none", "ibu", "inversion"):
        raise ValueError(f"unknown mitigation {mitigation!r}")
    if mitigation != "none" and calibration is None:
        raise ValueError("mitigation requires a calibration matrix")
    n_groups = len(obj.partition.groups)
    noise_g = _per_group(noise, n_groups)
    cal_g = _per_group(calibration, n_groups)
    out = []
    for g, p in enumerate(exact_distributions(obj, all_params)):
        rng = np.random.default_rng([rng_seed, g])
        counts = rng.multinomial(shots, p / p.sum())
        if noise_g[g] is not None:
            counts = noise_g[g].corrupt_counts(counts, rng)
        hist = counts / shots
        if mitigation == "ibu":
            hist = mitigate_ibu(cal_g[g], hist, iterations=ibu_iterations)
        elif mitigation == "inversion":
            hist = mitigate_inversion(cal_g[g], hist)
        out.append(hist)
    return out


def sampled_factorized_energy(obj: FactorizedObjective, all_params, shots: int,
                              noise: ConfusionModel | Sequence[ConfusionModel] | None = None,
                              mitigation: Mitigation = "none",
                              calibration: ConfusionModel | Sequence[ConfusionModel] | None = None,
                              rng_seed: int = 0, ibu_iterations: int = 20) -> float:
    dists = sampled_distributions(obj, all_params, shots, noise, mitigation, calibration, rng_seed,
                                  ibu_iterations)
    return obj.energy_from_distributions(dists)


def target_probability(part: SubsystemPartition, dists: Sequence[np.ndarray], targets) -> float:
    """Probability of the target basis states under the product of group distributions."""
    total = 0.0
    for state in targets:
        total += math.prod(float(d[b]) for d, b in zip(dists, part.local_bits(state)))
    return total


# -- SPSA ---------------------------------------------------------------------------------------

@dataclass(frozen=True)
class DncConfig:
    iterations: int = 120
    shots: int = 1024
    a: float | None = None  # None: calibrate so the first step moves each angle by ~target_step
    c: float = 0.1
    target_step: float = 0.2
    max_step: float | None = 0.2  # per-angle cap on a single update
    calibration_steps: int = 20
    A: float | None = None  # default: 10% of iterations
    alpha: float = 0.602
    gamma: float = 0.101
    init: Literal["warm", "uniform", "random", "zeros"] = "warm"
    init_jitter: float = 0.5
    p01: float = 0.03
    p10: float = 0.07
    calibration_shots: int = 1024
    ibu_iterations: int = 20
    seed: int = 0


@dataclass
class DncTrace:
    variant: str
    loss: list[float] = field(default_factory=list)
    target_prob: list[float] = field(default_factory=list)
    initial_params: np.ndarray | None = None
    final_params: np.ndarray | None = None


def initial_params(obj: FactorizedObjective, cfg: DncConfig, reference_state: int | None = None) -> np.ndarray:
    """Starting angles for the local circuits.

    ``warm`` flips each qubit that is set in ``reference_state`` (first RY
    layer at pi) and adds uniform jitter of half-width ``init_jitter`` to
    every angle; 0.5 rad leaves roughly 70% probability on the reference
    state. ``uniform`` puts every qubit in |+> plus jitter, ``random`` draws
    every angle from [-pi, pi).
    """
    rng = np.random.default_rng(derive_seed(cfg.seed, "dnc-init"))
    if cfg.init == "warm" and reference_state is None:
        raise ValueError("warm start needs a reference basis state")
    local = obj.partition.local_bits(reference_state) if reference_state is not None else None
    parts = []
    for g, s in enumerate(obj.partition.sizes):
        jitter = rng.uniform(-cfg.init_jitter, cfg.init_jitter, 2 * s)
        if cfg.init == "warm":
            flips = [math.pi if local[g] >> j & 1 else 0.0 for j in range(s)]
            parts.append(np.concatenate([flips, np.zeros(s)]) + jitter)
        elif cfg.init == "uniform":
            parts.append(np.concatenate([np.full(s, math.pi / 2), np.zeros(s)]) + jitter)
        elif cfg.init == "random":
            parts.append(rng.uniform(-math.pi, math.pi, 2 * s))
        elif cfg.init == "zeros":
            parts.append(np.zeros(2 * s))
        else:
            raise ValueError(f"unknown init {cfg.init!r}")
    return np.concatenate(parts)


class _Evaluator:
    def __init__(self, obj: FactorizedObjective, variant: str, cfg: DncConfig):
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        self.obj, self.variant, self.cfg = obj, variant, cfg
        sizes = obj.partition.sizes
        self.noise = None
        self.calibration = None
        self.mitigation: Mitigation = {"raw": "none", "noiseless": "none"}.get(variant, variant)
        if variant != "noiseless":
            self.noise = [ConfusionModel.from_flip_probs(s, cfg.p01, cfg.p10) for s in sizes]
        if self.mitigation != "none":
            self.calibration = [
                calibrate(nm, cfg.calibration_shots, derive_seed(cfg.seed, "calibration", g))
                for g, nm in enumerate(self.noise)
            ]

    def distributions(self, flat: np.ndarray, seed: int) -> list[np.ndarray]:
        return sampled_distributions(
            self.obj, split_params(self.obj, flat), self.cfg.shots, self.noise, self.mitigation,
            self.calibration, seed, self.cfg.ibu_iterations,
        )


def calibrate_gain(ev: _Evaluator, theta: np.ndarray, cfg: DncConfig, A: float) -> float:
    """Pick ``a`` so that ``a / (A + 1)**alpha * |g|`` equals ``target_step`` for the
    average magnitude ``|g|`` of SPSA gradient estimates at ``theta``."""
    mags = []
    for j in range(cfg.calibration_steps):
        rng = np.random.default_rng(derive_seed(cfg.seed, "gain", j))
        delta = rng.choice([-1.0, 1.0], size=theta.size)
        fp = ev.obj.energy_from_distributions(ev.distributions(theta + cfg.c * delta, derive_seed(cfg.seed, "gain+", j)))
        fm = ev.obj.energy_from_distributions(ev.distributions(theta - cfg.c * delta, derive_seed(cfg.seed, "gain-", j)))
        mags.append(abs(fp - fm) / (2 * cfg.c))
    mean = float(np.mean(mags))
    if mean == 0:
        return cfg.target_step
    return cfg.target_step * (A + 1) ** cfg.alpha / mean


def run_dnc_spsa(h: DiagonalHamiltonian, part: SubsystemPartition | None = None,
                 cfg: DncConfig = DncConfig(), variant: str = "noiseless",
                 obj: FactorizedObjective | None = None, targets=None,
                 reference_state: int | None = None) -> DncTrace:
    """SPSA on the sampled factorized energy; records loss and target probability
    at every post-update iterate.

    ``targets`` defaults to the exhaustive ground states of ``h``; a warm start
    uses ``reference_state``, defaulting to the smallest target state.
    """
    if h.lam <= 0 or h.mu <= 0:
        raise ValueError("product states need the repetition and invalid-code penalties")
    obj = obj or factorize(h, part)
    part = obj.partition
    if targets is None:
        targets = ground_states(h)[1]
    ev = _Evaluator(obj, variant, cfg)
    A = 0.1 * cfg.iterations if cfg.A is None else cfg.A
    if reference_state is None and cfg.init == "warm":
        reference_state = min(targets)
    theta = initial_params(obj, cfg, reference_state)
    a = cfg.a if cfg.a is not None else calibrate_gain(ev, theta, cfg, A)
    trace = DncTrace(variant, initial_params=theta.copy())
    for k in range(cfg.iterations):
        ak = a / (k + 1 + A) ** cfg.alpha
        ck = cfg.c / (k + 1) ** cfg.gamma
        rng = np.random.default_rng(derive_seed(cfg.seed, "spsa", k))
        delta = rng.choice([-1.0, 1.0], size=theta.size)
        f_plus = obj.energy_from_distributions(ev.distributions(theta + ck * delta, derive_seed(cfg.seed, "plus", k)))
        f_minus = obj.energy_from_distributions(ev.distributions(theta - ck * delta, derive_seed(cfg.seed, "minus", k)))
        step = ak * (f_plus - f_minus) / (2 * ck)
        if cfg.max_step is not None:
            step = float(np.clip(step, -cfg.max_step, cfg.max_step))
        theta = theta - step * delta
        dists = ev.distributions(theta, derive_seed(cfg.seed, "record", k))
        trace.loss.append(obj.energy_from_distributions(dists))
        trace.target_prob.append(target_probability(part, dists, targets))
    trace.final_params = theta.copy()
    return trace


def run_dnc_variants(h: DiagonalHamiltonian, cfg: DncConfig = DncConfig(),
                     variants: Sequence[str] = VARIANTS,
                     part: SubsystemPartition | None = None,
                     reference_state: int | None = None) -> dict[str, DncTrace]:
    """Independent SPSA runs, one per measurement-processing variant, sharing seeds."""
    obj = factorize(h, part)
    targets = ground_states(h)[1]
    return {
        v: run_dnc_spsa(h, cfg=cfg, variant=v, obj=obj, targets=targets, reference_state=reference_state)
        for v in variants
    }
