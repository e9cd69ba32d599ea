"""Simulated readout noise, calibration, and readout-error mitigation.

Outcome ``x`` of a ``q``-qubit group has qubit ``j`` at bit ``j``; confusion
matrices are column-stochastic with ``R[observed, prepared]``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

COND_WARN = 1e6


@dataclass(frozen=True, eq=False)
class ConfusionModel:
    R: np.ndarray

    def __post_init__(self):
        R = np.array(self.R, dtype=float)
        if R.ndim != 2 or R.shape[0] != R.shape[1]:
            raise ValueError(f"confusion matrix must be square, got {R.shape}")
        if np.any(R < 0):
            raise ValueError("confusion matrix entries must be non-negative")
        if not np.allclose(R.sum(axis=0), 1.0, rtol=0, atol=1e-12):
            raise ValueError("confusion matrix columns must sum to 1")
        R.setflags(write=False)
        object.__setattr__(self, "R", R)

    @property
    def dim(self) -> int:
        return self.R.shape[0]

    @property
    def num_qubits(self) -> int:
        return self.dim.bit_length() - 1

    @classmethod
    def identity(cls, num_qubits: int) -> "ConfusionModel":
        return cls(np.eye(1 << num_qubits))

    @classmethod
    def from_flip_probs(cls, num_qubits: int, p01: float = 0.03, p10: float = 0.07) -> "ConfusionModel":
        """Independent per-qubit flips: ``p01`` = P(read 1 | prepared 0), ``p10`` = P(read 0 | prepared 1)."""
        single = np.array([[1 - p01, p10], [p01, 1 - p10]])
        R = np.ones((1, 1))
        for _ in range(num_qubits):
            R = np.kron(single, R)  # later qubits are higher bits
        return cls(R)

    def apply(self, p) -> np.ndarray:
        return self.R @ np.asarray(p, dtype=float)

    def corrupt_counts(self, counts, rng: np.random.Generator) -> np.ndarray:
        """Push each recorded shot through the readout channel."""
        out = np.zeros(self.dim, dtype=np.int64)
        for j, c in enumerate(np.asarray(counts, dtype=np.int64)):
            if c:
                out += rng.multinomial(c, self.R[:, j])
        return out

    def to_json(self, **meta) -> str:
        return json.dumps({"dim": self.dim, "R": self.R.tolist(), **meta}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ConfusionModel":
        return cls(np.asarray(json.loads(text)["R"], dtype=float))


def normalize(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    total = m.sum()
    if total <= 0:
        raise ValueError("histogram is empty")
    return m / total


def total_variation(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float)).sum())


def calibrate(noise: ConfusionModel, shots_per_state: int, seed: int) -> ConfusionModel:
    """Estimate R by preparing every basis state ``shots_per_state`` times."""
    if shots_per_state < 1:
        raise ValueError("shots_per_state must be >= 1")
    rng = np.random.default_rng(seed)
    cols = [rng.multinomial(shots_per_state, noise.R[:, j]) / shots_per_state for j in range(noise.dim)]
    return ConfusionModel(np.column_stack(cols))


def save_calibration(path: str | Path, model: ConfusionModel, shots_per_state: int, seed: int) -> None:
    Path(path).write_text(model.to_json(shots_per_state=shots_per_state, seed=seed) + "\n")


def load_calibration(path: str | Path) -> ConfusionModel:
    return ConfusionModel.from_json(Path(path).read_text())


def mitigate_inversion(R: ConfusionModel, m) -> np.ndarray:
    """Apply R^-1, clip negatives to zero, renormalize."""
    m = normalize(m)
    cond = np.linalg.cond(R.R)
    if not np.isfinite(cond) or cond > 1 / np.finfo(float).eps:
        raise np.linalg.LinAlgError("calibration matrix is singular")
    if cond > COND_WARN:
        warnings.warn(f"calibration matrix is ill-conditioned (cond={cond:.3g})", RuntimeWarning)
    p = np.linalg.solve(R.R, m)
    p = np.clip(p, 0.0, None)
    if p.sum() <= 0:
        raise ValueError("inversion produced no positive mass")
    return p / p.sum()


def mitigate_ibu(R: ConfusionModel, m, iterations: int = 20, prior=None, tol: float = 1e-8,
                 return_iterates: bool = False):
    """Iterative Bayesian unfolding.

    ``p_j <- p_j * sum_i R_ij m_i / (R p)_i`` starting from ``prior`` (uniform
    by default). Stops early once successive iterates differ by less than
    ``tol`` in total variation.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    m = normalize(m)
    p = np.full(R.dim, 1.0 / R.dim) if prior is None else normalize(prior)
    if np.any(p <= 0):
        raise ValueError("prior must be strictly positive")
    support = m > 0
    iterates = []
    for _ in range(iterations):
        folded = R.R @ p
        if np.any(folded[support] <= 0):
            raise ZeroDivisionError("observed outcome has zero probability under R and the current estimate")
        ratio = np.zeros_like(m)
        ratio[support] = m[support] / folded[support]
        new = p * (R.R.T @ ratio)
        new /= new.sum()
        if return_iterates:
            iterates.append(new)
        done = total_variation(new, p) < tol
        p = new
        if done:
            break
    return (p, iterates) if return_iterates else p
