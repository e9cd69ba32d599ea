"""Experiment configs, seeded orchestration, and checksummed CSV/JSON outputs.

Every random draw descends from ``root_seed`` through ``derive_seed``:
instances use keys ``("instance", n, j)``, VQE initializations
``("init", n, j, r)``, the divide-and-conquer fixture ``("dnc-fixture", n)``
and mitigation trials ``("mitigation-trial", t)``.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import __version__
from .ansatz import OptConfig, SweepConfig, depth_sweep, run_vqe_batch
from .divide_conquer import VARIANTS, DncConfig, run_dnc_variants
from .encoding import ReducedEncoding
from .hamiltonian import build_hamiltonian
from .instances import (
    derive_seed,
    generate_instance,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    solve_exact,
)
from .mitigation import ConfusionModel, mitigate_ibu, mitigate_inversion, total_variation

MODES = ("gen-instances", "solve-exact", "run-vqe", "sweep-depth", "run-dnc", "mitigation-study", "report")
DESK_DEPTHS = {4: [3, 5, 10], 5: [4, 9, 10, 12], 6: [5, 12, 30]}
DEFAULT_ROOT_SEED = 2024


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    mode: str
    ns: list[int] = field(default_factory=lambda: [4, 5, 6])
    depths: dict[str, list[int]] | None = None
    num_instances: int = 3
    num_inits: int = 20
    root_seed: int = DEFAULT_ROOT_SEED
    weight_range: list[float] = field(default_factory=lambda: [10.0, 50.0])
    integer_weights: bool = False
    instance: str | None = None  # path to an instance fixture; run-vqe / solve-exact / run-dnc
    L: int = 10
    opt: dict[str, Any] = field(default_factory=dict)
    dnc: dict[str, Any] = field(default_factory=dict)
    dnc_seed: int = 0
    variants: list[str] = field(default_factory=lambda: list(VARIANTS))
    lam: float | None = None
    mu: float | None = None
    trials: int = 200
    trial_shots: int = 1024
    perturbation: float = 0.02
    p01: float = 0.03
    p10: float = 0.07
    inputs: list[str] = field(default_factory=list)
    paper_scale: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if any(n < 3 for n in self.ns):
            raise ConfigError("every n must be >= 3")
        if self.depths is not None:
            self.depths = {str(k): list(v) for k, v in self.depths.items()}
            if any(not v for v in self.depths.values()) or not self.depths:
                raise ConfigError("depth lists must be non-empty")
            if any(L < 1 for v in self.depths.values() for L in v):
                raise ConfigError("depths must be >= 1")
        if self.num_instances < 1 or self.num_inits < 1:
            raise ConfigError("need at least one instance and one initialization")
        try:
            OptConfig(**self.opt)
            DncConfig(**self.dnc)
        except TypeError as e:
            raise ConfigError(str(e)) from None
        if any(v not in VARIANTS for v in self.variants):
            raise ConfigError(f"variants must be drawn from {VARIANTS}")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**doc)
        except TypeError as e:
            raise ConfigError(str(e)) from None

    def to_dict(self) -> dict:
        return asdict(self)

    def effective(self) -> "ExperimentConfig":
        """Full protocol: 10 instances x 100 initializations, depths n-1..30."""
        if not self.paper_scale:
            return self
        return dataclasses.replace(
            self, num_instances=10, num_inits=100, depths={str(n): list(range(n - 1, 31)) for n in self.ns}
        )

    def depths_for(self, n: int) -> list[int]:
        if self.depths is not None:
            if str(n) not in self.depths:
                raise ConfigError(f"no depth list for n={n}")
            return self.depths[str(n)]
        return DESK_DEPTHS.get(n, [n - 1])

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


# -- output helpers -----------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def csv_text(header: Sequence[str], rows: Iterable[Sequence], config_hash: str) -> str:
    buf = io.StringIO()
    buf.write(f"# config_hash={config_hash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def read_csv(path: str | Path) -> list[dict]:
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def _json_text(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class Collector:
    """Single writer for every output file of a run; builds the manifest."""

    def __init__(self, out: str | Path, cfg: ExperimentConfig):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.cfg = cfg
        self.files: list[str] = []
        self.started = time.time()

    def write(self, name: str, text: str) -> Path:
        p = self.out / name
        p.write_text(text, encoding="utf-8")
        self.files.append(name)
        return p

    def csv(self, name: str, header, rows) -> Path:
        return self.write(name, csv_text(header, rows, self.cfg.hash()))

    def json(self, name: str, doc) -> Path:
        return self.write(name, _json_text(doc))

    def manifest(self) -> dict:
        end = time.time()
        doc = {
            "config_hash": self.cfg.hash(),
            "artifact_version": __version__,
            "mode": self.cfg.mode,
            "files": {f: sha256_file(self.out / f) for f in sorted(self.files)},
            "wall_clock": {"started": self.started, "finished": end, "seconds": end - self.started},
        }
        (self.out / "manifest.json").write_text(_json_text(doc))
        return doc


# -- shipped fixtures ---------------------------------------------------------------------

def fixture_path(name: str) -> Path:
    return Path(str(resources.files("qtsp") / "data" / name))


def dnc_fixture():
    return load_instance(fixture_path("dnc_fixture_n5.json"))


def desk_instances(n: int):
    docs = json.loads(fixture_path("desk_instances.json").read_text())
    return [instance_from_dict(d) for d in docs if d["n"] == n]


def _instance_for(cfg: ExperimentConfig, n: int | None = None):
    if cfg.instance:
        return load_instance(cfg.instance)
    n = n or cfg.ns[0]
    return generate_instance(n, derive_seed(cfg.root_seed, "instance", n, 0), cfg.weight_range, cfg.integer_weights)


# -- commands -----------------------------------------------------------------------------

def cmd_gen_instances(cfg: ExperimentConfig, col: Collector) -> None:
    for n in cfg.ns:
        for j in range(cfg.num_instances):
            inst = generate_instance(n, derive_seed(cfg.root_seed, "instance", n, j), cfg.weight_range,
                                     cfg.integer_weights)
            col.json(f"instance_n{n}_{j}.json", instance_to_dict(inst, solve_exact(inst)))


def cmd_solve_exact(cfg: ExperimentConfig, col: Collector) -> None:
    if cfg.instance:
        targets = [load_instance(cfg.instance)]
    else:
        targets = [
            generate_instance(n, derive_seed(cfg.root_seed, "instance", n, j), cfg.weight_range, cfg.integer_weights)
            for n in cfg.ns for j in range(cfg.num_instances)
        ]
    rows = []
    for inst in targets:
        sol = solve_exact(inst)
        for t in sorted(sol.optimal_tours):
            rows.append((inst.n, inst.seed, sol.optimal_length, " ".join(map(str, t))))
    col.csv("exact_solutions.csv", ["n", "instance_seed", "optimal_length", "tour"], rows)


def _sweep_rows_csv(rows):
    keys = ["n", "L", "instance_seed", "init_seed", "success", "final_energy", "iterations"]
    return keys, [[r[k] for k in keys] for r in rows]


def cmd_run_vqe(cfg: ExperimentConfig, col: Collector) -> None:
    inst = _instance_for(cfg)
    enc = ReducedEncoding(inst.n)
    seeds = [derive_seed(cfg.root_seed, "init", inst.n, 0, r) for r in range(cfg.num_inits)]
    results = run_vqe_batch(inst, enc, cfg.L, seeds, OptConfig(**cfg.opt))
    rows = [
        {"n": inst.n, "L": cfg.L, "instance_seed": inst.seed, "init_seed": s, "success": int(r.success),
         "final_energy": r.final_energy, "iterations": r.iterations_used}
        for s, r in zip(seeds, results)
    ]
    col.csv("vqe_runs.csv", *_sweep_rows_csv(rows))
    col.csv(
        "vqe_traces.csv", ["init_seed", "iteration", "energy"],
        ((s, i, e) for s, r in zip(seeds, results) for i, e in enumerate(r.energy_trace)),
    )


def cmd_sweep_depth(cfg: ExperimentConfig, col: Collector, workers: int = 1) -> None:
    all_rows, all_agg = [], []
    for n in cfg.ns:
        sc = SweepConfig(
            n=n, depths=tuple(cfg.depths_for(n)), num_instances=cfg.num_instances, num_inits=cfg.num_inits,
            root_seed=cfg.root_seed, weight_range=tuple(cfg.weight_range), integer_weights=cfg.integer_weights,
            opt=OptConfig(**cfg.opt),
        )
        rows, agg = depth_sweep(sc, workers=workers)
        all_rows += rows
        all_agg += agg
    col.csv("sweep_runs.csv", *_sweep_rows_csv(all_rows))
    col.json("sweep_aggregate.json", all_agg)


def cmd_run_dnc(cfg: ExperimentConfig, col: Collector) -> None:
    inst = load_instance(cfg.instance) if cfg.instance else dnc_fixture()
    enc = ReducedEncoding(inst.n)
    h = build_hamiltonian(inst, enc, cfg.lam, cfg.mu)
    dcfg = DncConfig(**{"seed": cfg.dnc_seed, "p01": cfg.p01, "p10": cfg.p10, **cfg.dnc})
    traces = run_dnc_variants(h, dcfg, cfg.variants)
    summary = []
    for v, tr in traces.items():
        col.csv(f"dnc_trace_{v}.csv", ["iteration", "variant", "loss", "target_prob"],
                ((i + 1, v, l, p) for i, (l, p) in enumerate(zip(tr.loss, tr.target_prob))))
        summary.append((v, tr.loss[-1] if tr.loss else math.nan, tr.target_prob[-1] if tr.target_prob else math.nan))
    col.csv("dnc_summary.csv", ["variant", "final_loss", "final_target_probability"], summary)


def mitigation_trials(trials: int, root_seed: int, shots: int = 1024, perturbation: float = 0.02,
                      p01: float = 0.03, p10: float = 0.07, num_qubits: int = 2) -> list[tuple]:
    """IBU vs inversion under finite shots and an entrywise-perturbed calibration.

    Per trial: true distribution ~ Dirichlet(1), ``shots`` samples through the
    true readout model, calibration = truth + U(-perturbation, perturbation)
    per entry (clipped at 0, columns renormalized).
    """
    R = ConfusionModel.from_flip_probs(num_qubits, p01, p10)
    out = []
    for t in range(trials):
        rng = np.random.default_rng(derive_seed(root_seed, "mitigation-trial", t))
        p = rng.dirichlet(np.ones(R.dim))
        m = rng.multinomial(shots, R.apply(p)) / shots
        Rp = np.clip(R.R + rng.uniform(-perturbation, perturbation, R.R.shape), 0.0, None)
        est = ConfusionModel(Rp / Rp.sum(axis=0))
        out.append((t, total_variation(mitigate_ibu(est, m), p), total_variation(mitigate_inversion(est, m), p)))
    return out


def cmd_mitigation_study(cfg: ExperimentConfig, col: Collector) -> None:
    rows = mitigation_trials(cfg.trials, cfg.root_seed, cfg.trial_shots, cfg.perturbation, cfg.p01, cfg.p10)
    col.csv("mitigation_trials.csv", ["trial", "tv_ibu", "tv_inversion"], rows)
    wins = sum(a <= b for _, a, b in rows)
    col.json("mitigation_summary.json", {
        "trials": len(rows), "ibu_not_worse": wins, "ibu_win_fraction": wins / len(rows),
        "mean_tv_ibu": float(np.mean([r[1] for r in rows])),
        "mean_tv_inversion": float(np.mean([r[2] for r in rows])),
    })


def cmd_report(cfg: ExperimentConfig, col: Collector, paths: Sequence[str] = ()) -> None:
    """Tidy long-format tables from sweep aggregates and divide-and-conquer traces."""
    paths = list(paths) or cfg.inputs
    if not paths:
        raise ConfigError("report needs input paths")
    sweep_rows, trace_rows = [], []
    for p in paths:
        p = Path(p)
        if not p.exists():
            raise FileNotFoundError(p)
        if p.suffix == ".json":
            try:
                agg = json.loads(p.read_text())
                for a in agg:
                    for stat in ("mean", "min", "max"):
                        sweep_rows.append((a["n"], a["L"], stat, float(a[stat])))
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise ValueError(f"{p} is not a sweep aggregate: {e}") from None
        elif p.suffix == ".csv":
            rows = read_csv(p)
            if not rows or not {"iteration", "variant", "loss", "target_prob"} <= set(rows[0]):
                raise ValueError(f"{p} is not a divide-and-conquer trace")
            for r in rows:
                trace_rows.append((int(r["iteration"]), r["variant"], "loss", float(r["loss"])))
                trace_rows.append((int(r["iteration"]), r["variant"], "target_prob", float(r["target_prob"])))
        else:
            raise ValueError(f"unsupported input {p}")
    if sweep_rows:
        col.csv("report_sweep.csv", ["n", "L", "stat", "value"], sorted(sweep_rows))
    if trace_rows:
        col.csv("report_dnc.csv", ["iteration", "variant", "metric", "value"],
                sorted(trace_rows, key=lambda r: (r[1], r[0], r[2])))


def run(cfg: ExperimentConfig, out: str | Path, workers: int = 1, paths: Sequence[str] = ()) -> dict:
    cfg = cfg.effective()
    col = Collector(out, cfg)
    if cfg.mode == "gen-instances":
        cmd_gen_instances(cfg, col)
    elif cfg.mode == "solve-exact":
        cmd_solve_exact(cfg, col)
    elif cfg.mode == "run-vqe":
        cmd_run_vqe(cfg, col)
    elif cfg.mode == "sweep-depth":
        cmd_sweep_depth(cfg, col, workers)
    elif cfg.mode == "run-dnc":
        cmd_run_dnc(cfg, col)
    elif cfg.mode == "mitigation-study":
        cmd_mitigation_study(cfg, col)
    else:
        cmd_report(cfg, col, paths)
    return col.manifest()
