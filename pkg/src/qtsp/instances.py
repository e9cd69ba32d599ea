"""Random TSP instances and the exhaustive ground-truth solver."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

DEFAULT_WEIGHT_RANGE = (10.0, 50.0)
ENUMERATION_CAP = 10


@dataclass(frozen=True, eq=False)
class TspInstance:
    """Symmetric, zero-diagonal distance matrix plus the seed that produced it."""

    dist: np.ndarray
    seed: int | None = None
    weight_range: tuple[float, float] = DEFAULT_WEIGHT_RANGE
    integer_weights: bool = False

    def __post_init__(self):
        d = np.array(self.dist, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError(f"distance matrix must be square, got shape {d.shape}")
        if d.shape[0] < 3:
            raise ValueError("a TSP instance needs at least 3 cities")
        if not np.array_equal(d, d.T):
            raise ValueError("distance matrix must be symmetric")
        if np.any(np.diag(d) != 0):
            raise ValueError("distance matrix must have a zero diagonal")
        if np.any(d < 0):
            raise ValueError("distances must be non-negative")
        d.setflags(write=False)
        object.__setattr__(self, "dist", d)

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    def scaled(self, factor: float) -> "TspInstance":
        return TspInstance(self.dist * factor, self.seed, self.weight_range, self.integer_weights)


@dataclass(frozen=True)
class ExactSolution:
    optimal_length: float
    optimal_tours: frozenset[tuple[int, ...]] = field(default_factory=frozenset)


def generate_instance(
    n: int,
    seed: int,
    weight_range: Sequence[float] = DEFAULT_WEIGHT_RANGE,
    integer_weights: bool = False,
) -> TspInstance:
    """Draw a fully connected symmetric instance.

    Upper-triangle weights are drawn row-major from a PCG64 stream seeded with
    ``seed``; ``integer_weights`` draws integers in the closed range instead of
    continuous uniforms.
    """
    if n < 3:
        raise ValueError(f"n must be >= 3, got {n}")
    lo, hi = (float(w) for w in weight_range)
    if lo < 0:
        raise ValueError("weight range must be non-negative")
    if hi < lo:
        raise ValueError(f"inverted weight range ({lo}, {hi})")
    rng = np.random.Generator(np.random.PCG64(seed))
    iu = np.triu_indices(n, k=1)
    if integer_weights:
        w = rng.integers(math.ceil(lo), math.floor(hi), size=len(iu[0]), endpoint=True).astype(float)
    else:
        w = rng.uniform(lo, hi, size=len(iu[0]))
    dist = np.zeros((n, n))
    dist[iu] = w
    dist = dist + dist.T
    return TspInstance(dist, seed=int(seed), weight_range=(lo, hi), integer_weights=integer_weights)


def _check_permutation(tour: Sequence[int], n: int) -> tuple[int, ...]:
    t = tuple(int(c) for c in tour)
    if sorted(t) != list(range(n)):
        raise ValueError(f"{t} is not a permutation of 0..{n - 1}")
    return t


def tour_length(inst: TspInstance, tour: Sequence[int]) -> float:
    t = _check_permutation(tour, inst.n)
    d = inst.dist
    return float(sum(d[t[i], t[(i + 1) % len(t)]] for i in range(len(t))))


def solve_exact(inst: TspInstance, cap: int = ENUMERATION_CAP, rtol: float = 1e-12) -> ExactSolution:
    """Enumerate all (n-1)! tours that start at city 0.

    Every tour within ``rtol`` (relative) of the minimum is reported, so both
    orientations of an optimal cycle appear.
    """
    n = inst.n
    if n > cap:
        raise ValueError(f"n={n} exceeds the enumeration cap of {cap}")
    perms = np.array(list(itertools.permutations(range(1, n))), dtype=np.intp)
    tours = np.hstack([np.zeros((len(perms), 1), dtype=np.intp), perms])
    lengths = inst.dist[tours, np.roll(tours, -1, axis=1)].sum(axis=1)
    best = lengths.min()
    hits = np.flatnonzero(lengths <= best + rtol * abs(best))
    return ExactSolution(float(best), frozenset(tuple(int(c) for c in tours[h]) for h in hits))


def all_tour_lengths(inst: TspInstance) -> dict[tuple[int, ...], float]:
    """Length of every tour starting at city 0 (brute-force reference)."""
    return {
        (0, *p): tour_length(inst, (0, *p))
        for p in itertools.permutations(range(1, inst.n))
    }


def instance_to_dict(inst: TspInstance, solution: ExactSolution | None = None) -> dict:
    doc = {
        "n": inst.n,
        "seed": inst.seed,
        "weight_range": list(inst.weight_range),
        "integer_weights": inst.integer_weights,
        "dist": [float(x) for x in inst.dist.ravel()],
    }
    if solution is not None:
        doc["optimal_length"] = solution.optimal_length
        doc["optimal_tours"] = sorted(list(t) for t in solution.optimal_tours)
    return doc


def instance_from_dict(doc: dict) -> TspInstance:
    n = int(doc["n"])
    dist = np.asarray(doc["dist"], dtype=float).reshape(n, n)
    return TspInstance(
        dist,
        seed=doc.get("seed"),
        weight_range=tuple(doc.get("weight_range", DEFAULT_WEIGHT_RANGE)),
        integer_weights=bool(doc.get("integer_weights", False)),
    )


def save_instance(path: str | Path, inst: TspInstance, solution: ExactSolution | None = None) -> None:
    if solution is None and inst.n <= ENUMERATION_CAP:
        solution = solve_exact(inst)
    Path(path).write_text(json.dumps(instance_to_dict(inst, solution), indent=2) + "\n")


def load_instance(path: str | Path) -> TspInstance:
    return instance_from_dict(json.loads(Path(path).read_text()))


def derive_seed(root: int, *keys: int | str) -> int:
    """Deterministic 64-bit child seed of ``root`` for a tuple of integer/string keys."""
    spawn_key = tuple(
        k if isinstance(k, int) else int.from_bytes(k.encode(), "little") for k in keys
    )
    words = np.random.SeedSequence(root, spawn_key=spawn_key).generate_state(2, np.uint32)
    return int(words[0]) | int(words[1]) << 32
