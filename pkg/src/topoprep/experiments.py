"""End-to-end interpolation experiments on the 12-edge rhombic torus.

Every run is deterministic: identical configurations produce byte-identical
CSV files. Runtimes are kept out of the CSVs and the manifest.
"""

from __future__ import annotations

import csv
import dataclasses
import functools
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from time import perf_counter
from typing import Any, Mapping, Sequence

import numpy as np
import scipy

from . import __version__
from .anyons import load_category
from .evolution import (
    GroundSubspace,
    Schedule,
    Trajectory,
    evolve,
    ground_subspace,
)
from .lattice import (
    HoneycombTorus,
    LogicalOperators,
    build_field_hamiltonian,
    build_levin_wen,
    build_reference_torus,
    build_toric_code,
    field_vector,
    logical_operators,
)
from .ops import SparseOperator

MODELS = ("toric", "doubled_semion", "doubled_fibonacci", "majorana")
LATTICE_MODELS = MODELS[:3]
FAMILIES = ("theta", "disc_pm", "disc_pm_x")
REFERENCE_T = {"toric": 120.0, "doubled_semion": 120.0, "doubled_fibonacci": 320.0}
DEFAULT_DISC = 41
MAX_POINTS = 10_000
FIGURES = {
    "tc_groundspaceoverlap": ("toric", ("T", "theta", "eps_adia")),
    "fib_instant": ("doubled_fibonacci", ("T", "t", "eps_adia")),
    "ds_minusZ_refoverlap": ("doubled_semion", ("a", "b", "log_one_minus_overlap")),
}
PROBES = ("xbar1", "zbar1", "xbar2", "zbar2", "av_min", "av_max")


class BudgetError(ValueError):
    """Requested grid exceeds the simulation budget."""


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment. ``grid`` is an angle list for ``theta`` and a disc resolution otherwise."""

    model: str
    family: str = "theta"
    grid: tuple[float, ...] | int = (0.0,)
    T: tuple[float, ...] = (120.0,)
    dt: float = 0.1
    kappa: float = 1.0
    sign: int = -1
    probes: tuple[str, ...] = ()
    deterministic: bool = True
    out: str = "results"
    eps: float = 1e-3
    workers: int = 1
    chain_length: int = 6

    def __post_init__(self) -> None:
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not 0 < self.kappa <= 1:
            raise ValueError("kappa must lie in (0, 1]")
        if self.sign not in (-1, 1):
            raise ValueError("sign must be +1 or -1")
        T = (self.T,) if isinstance(self.T, (int, float)) else tuple(self.T)
        if not T or any(t <= 0 for t in T):
            raise ValueError("total times must be positive")
        object.__setattr__(self, "T", tuple(float(t) for t in T))
        if self.family == "theta":
            grid = (self.grid,) if isinstance(self.grid, (int, float)) else tuple(self.grid)
            if any(not 0 <= g < 2 * math.pi for g in grid):
                raise ValueError("angles must lie in [0, 2 pi)")
            object.__setattr__(self, "grid", tuple(float(g) for g in grid))
        elif not isinstance(self.grid, (int, np.integer)) or self.grid < 2:
            raise ValueError("disc families need an integer resolution of at least 2")
        unknown = set(self.probes) - set(PROBES)
        if unknown:
            raise ValueError(f"unknown probes {sorted(unknown)}")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    @classmethod
    def from_mapping(cls, d: Mapping[str, Any]) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        d = dict(d)
        for key in ("T", "probes"):
            if key in d and isinstance(d[key], list):
                d[key] = tuple(d[key])
        if "grid" in d and isinstance(d["grid"], list):
            d["grid"] = tuple(d["grid"])
        return cls(**d)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["grid"] = list(self.grid) if isinstance(self.grid, tuple) else self.grid
        d["T"] = list(self.T)
        d["probes"] = list(self.probes)
        return d


# ------------------------------------------------------------------ models


@dataclass(frozen=True)
class ModelSetup:
    name: str
    lattice: HoneycombTorus
    H_top: SparseOperator
    ground: GroundSubspace
    logicals: LogicalOperators | None

    @property
    def n_sites(self) -> int:
        return self.lattice.n_edges


@functools.lru_cache(maxsize=None)
def model_setup(model: str) -> ModelSetup:
    if model not in LATTICE_MODELS:
        raise ValueError(f"{model!r} is not a lattice model")
    lat = build_reference_torus()
    if model == "toric":
        H = build_toric_code(lat)
        logicals = logical_operators("toric", lat)
    else:
        H = build_levin_wen(load_category(model.removeprefix("doubled_")), lat)
        logicals = None
    return ModelSetup(model, lat, H, ground_subspace(H), logicals)


def model_hash(setup: ModelSetup) -> str:
    m = setup.H_top.matrix.tocsr()
    m.sort_indices()
    h = hashlib.sha256()
    for arr in (m.indptr, m.indices, np.round(m.data, 12)):
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()


def field_points(cfg: ExperimentConfig) -> list[tuple[tuple[float, ...], np.ndarray]]:
    """``(coordinates, field vector)`` in deterministic grid order."""
    if cfg.family == "theta":
        return [((th,), field_vector("theta", th)) for th in cfg.grid]
    axis = np.linspace(-1.0, 1.0, cfg.grid)
    pts = []
    for b in axis:
        for a in axis:
            if a * a + b * b <= 1 + 1e-12:
                pts.append(((float(a), float(b)), field_vector(cfg.family, a, b, cfg.sign)))
    return pts


def check_budget(cfg: ExperimentConfig) -> int:
    n = len(field_points(cfg)) * len(cfg.T)
    if n > MAX_POINTS:
        raise BudgetError(f"{n} simulations requested, budget is {MAX_POINTS} at dimension 4096")
    return n


def _probe_functions(setup: ModelSetup, names: Sequence[str]) -> dict:
    out = {}
    lg = setup.logicals
    for name in names:
        if name.startswith(("xbar", "zbar")):
            if lg is None:
                raise ValueError(f"probe {name} needs the toric model")
            op = getattr(lg, name)
            out[name] = functools.partial(_expect, op)
        else:
            avs = [t.op for t in setup.H_top.terms if t.label.startswith("A")]
            if setup.name != "toric":
                raise ValueError(f"probe {name} needs the toric model")
            reducer = min if name == "av_min" else max
            out[name] = functools.partial(_reduce_expect, avs, reducer)
    return out


def _expect(op, psi: np.ndarray) -> float:
    return float(np.vdot(psi, op @ psi).real)


def _reduce_expect(ops, reducer, psi: np.ndarray) -> float:
    return reducer(_expect(op, psi) for op in ops)


# ------------------------------------------------------------ reference states


def reference_state(model: str, dt: float = 0.1, cache_dir: str | Path | None = None) -> np.ndarray:
    """Normalized ground projection of the canonical ``-sum Z`` run at the model's reference time."""
    setup = model_setup(model)
    T = REFERENCE_T[model]
    path = Path(cache_dir) / f"ref_{model}_T{T:g}_dt{dt:g}.npy" if cache_dir is not None else None
    if path is not None and path.exists():
        return np.load(path)
    psi = _canonical_final_state(model, T, dt)
    ref = setup.ground.project(psi)
    ref = ref / np.linalg.norm(ref)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.save(path, ref)
    return ref


@functools.lru_cache(maxsize=8)
def _canonical_final_state(model: str, T: float, dt: float) -> np.ndarray:
    setup = model_setup(model)
    H_triv, psi0 = build_field_hamiltonian([0.0, 0.0, -1.0], setup.n_sites)
    psi, _ = evolve(H_triv, setup.H_top, Schedule(T, dt), psi0=psi0, instantaneous=False, final_subspace=setup.ground)
    psi.setflags(write=False)
    return psi


# ------------------------------------------------------------------ results


@dataclass(frozen=True)
class ResultRow:
    coords: tuple[float, ...]
    T: float
    eps_adia: float
    overlap_ref: float
    probes: dict[str, float]
    runtime: float = dataclasses.field(default=0.0, compare=False)

    def check(self) -> list[str]:
        bad = []
        for name, v in (("eps_adia", self.eps_adia), ("overlap_ref", self.overlap_ref)):
            if not math.isnan(v) and not -1e-12 <= v <= 1 + 1e-12:
                bad.append(f"{name}={v} outside [0, 1]")
        for name, v in self.probes.items():
            if not -1 - 1e-10 <= v <= 1 + 1e-10:
                bad.append(f"{name}={v} outside [-1, 1]")
        return bad


@dataclass
class ResultSet:
    config: ExperimentConfig
    coord_names: tuple[str, ...]
    rows: list[ResultRow]
    manifest: dict
    trajectories: dict[tuple, Trajectory] = dataclasses.field(default_factory=dict)

    def failures(self) -> list[str]:
        return [f"{r.coords} T={r.T}: {msg}" for r in self.rows for msg in r.check()]

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        names = sorted(self.rows[0].probes) if self.rows else []
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([*self.coord_names, "T", "eps_adia", "overlap_ref", *names])
            for r in self.rows:
                vals = [*r.coords, r.T, r.eps_adia, r.overlap_ref, *(r.probes[n] for n in names)]
                w.writerow([f"{x:.12g}" for x in vals])
        return path

    def write_manifest(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.manifest, indent=1, sort_keys=True) + "\n")
        return path


def _coord_names(cfg: ExperimentConfig) -> tuple[str, ...]:
    return ("theta",) if cfg.family == "theta" else ("a", "b")


def simulate_point(
    cfg: ExperimentConfig,
    coords: tuple[float, ...],
    nvec: np.ndarray,
    T: float,
    reference: np.ndarray | None = None,
    instantaneous: bool = False,
) -> tuple[ResultRow, Trajectory]:
    setup = model_setup(cfg.model)
    start = perf_counter()
    H_triv, psi0 = build_field_hamiltonian(nvec, setup.n_sites)
    probes = _probe_functions(setup, cfg.probes)
    final = setup.ground if cfg.kappa == 1 else None
    psi, traj = evolve(
        H_triv,
        setup.H_top,
        Schedule(T, cfg.dt, kappa=cfg.kappa),
        probes=probes,
        psi0=psi0,
        reference=reference,
        instantaneous=instantaneous,
        final_subspace=final,
    )
    row = ResultRow(
        coords,
        T,
        traj.eps_adia[-1],
        traj.overlap_ref[-1],
        {k: v[-1] for k, v in traj.probes.items()},
        perf_counter() - start,
    )
    return row, traj


def _scan_job(args):
    cfg, coords, nvec, T, reference = args
    return simulate_point(cfg, coords, nvec, T, reference)[0]


def manifest(cfg: ExperimentConfig, extra: Mapping[str, Any] | None = None) -> dict:
    out = {
        "config": cfg.to_dict(),
        "versions": {"topoprep": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
        "tolerances": {"degeneracy": 1e-8, "residual": 1e-8},
    }
    if cfg.model in LATTICE_MODELS:
        setup = model_setup(cfg.model)
        out["model"] = {
            "name": cfg.model,
            "sha256": model_hash(setup),
            "ground_energy": round(setup.ground.energy, 10),
            "degeneracy": setup.ground.degeneracy,
        }
    out.update(extra or {})
    return out


def run(cfg: ExperimentConfig, with_reference: bool = False) -> ResultSet:
    """Scan all grid points and total times; rows follow grid order, then ``T``."""
    if cfg.model not in LATTICE_MODELS:
        raise ValueError("grid scans are defined for lattice models")
    check_budget(cfg)
    reference = reference_state(cfg.model, cfg.dt) if with_reference else None
    jobs = [(cfg, c, n, T, reference) for c, n in field_points(cfg) for T in cfg.T]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            rows = list(pool.map(_scan_job, jobs))
    else:
        rows = [_scan_job(j) for j in jobs]
    extra = {"reference_T": REFERENCE_T[cfg.model] if with_reference else None}
    return ResultSet(cfg, _coord_names(cfg), rows, manifest(cfg, extra))


def logical_map(cfg: ExperimentConfig) -> ResultSet:
    """Final logical expectations per grid point for the toric code."""
    if cfg.model != "toric":
        raise ValueError("logical maps are defined for the toric model")
    cfg = dataclasses.replace(cfg, probes=("xbar1", "zbar1", "xbar2", "zbar2"))
    return run(cfg)


@dataclass(frozen=True)
class PerturbedRow:
    coords: tuple[float, ...]
    overlap: float
    gap: float
    degenerate: bool


def perturbed_ground_comparison(cfg: ExperimentConfig, eps: float | None = None, reference: np.ndarray | None = None) -> list[PerturbedRow]:
    """``|<psi_pert|psi_R>|^2`` with ``psi_pert`` the ground state of ``H_top + eps * H_triv``."""
    eps = cfg.eps if eps is None else eps
    setup = model_setup(cfg.model)
    if reference is None:
        reference = reference_state(cfg.model, cfg.dt)
    rows = []
    for coords, nvec in field_points(cfg):
        if eps == 0:
            w = setup.ground.weight(reference)
            rows.append(PerturbedRow(coords, w, 0.0, setup.ground.degeneracy > 1))
            continue
        H_triv, _ = build_field_hamiltonian(nvec, setup.n_sites)
        sub = ground_subspace(setup.H_top.matrix + eps * H_triv.matrix)
        degenerate = sub.degeneracy > 1
        rows.append(PerturbedRow(coords, sub.weight(reference), float(sub.gap), degenerate))
    return rows


# ------------------------------------------------------------------ figures


def instantaneous_run(model: str, T: float, dt: float = 0.1, sign: int = -1, n_samples: int = 64) -> Trajectory:
    """``-sign * sum Z`` start sampled against the instantaneous ground space."""
    setup = model_setup(model)
    H_triv, psi0 = build_field_hamiltonian([0.0, 0.0, float(sign)], setup.n_sites)
    _, traj = evolve(H_triv, setup.H_top, Schedule(T, dt), psi0=psi0, n_samples=n_samples)
    return traj


def emit_figure_data(figure: str, out: str | Path, source: ResultSet | Mapping[float, Trajectory]) -> Path:
    """Write ``<model>_<figure>.csv`` from a scan result or, for ``fib_instant``, trajectories keyed by ``T``."""
    if figure not in FIGURES:
        raise ValueError(f"unknown figure id {figure!r}; expected one of {sorted(FIGURES)}")
    model, cols = FIGURES[figure]
    path = Path(out) / f"{model}_{figure}.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    rows: list[list[float]] = []
    if figure == "fib_instant":
        for T in sorted(source):
            tr = source[T]
            rows += [[T, t, e] for t, e in zip(tr.times, tr.eps_adia)]
    elif figure == "tc_groundspaceoverlap":
        rows = [[r.T, r.coords[0], r.eps_adia] for r in source.rows]
    else:
        for r in source.rows:
            one_minus = max(1.0 - r.overlap_ref, 1e-300)
            rows.append([r.coords[0], r.coords[1], math.log(one_minus)])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in rows:
            w.writerow([f"{x:.12g}" for x in row])
    return path

