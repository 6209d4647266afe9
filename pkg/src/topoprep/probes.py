"""Ring operators and flux tomography on microscopic string-net ground spaces.

A ring operator ``O_a`` acts on one edge qudit as ``diag(S_ab / S_1b)`` in the
label basis of the single-layer category. A product of ring operators along a
non-contractible dual loop acts on the ground space as a multiple of the loop
operator of the doubled label ``(a, a)``, whose eigenvalues on the flux basis
are ``S_{(a,a),x} / S_{1,x}``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .anyons import CategoryData, category_from_dict, double, load_category
from .evolution import GroundSubspace
from .lattice import HoneycombTorus, rotation_unitary
from .ops import SparseOperator, embed_local, pauli_string

TOMOGRAPHY_TOL = 1e-6


class TomographyError(ValueError):
    """Loop spectrum does not match the expected flux eigenvalues."""


def z2_category() -> CategoryData:
    """Single-layer ``Z_2`` input of the toric code string-net."""
    r = 2**-0.5
    F = [[a, b, (a + b) % 2, c, (a + b + c) % 2, (b + c) % 2, 1.0] for a in range(2) for b in range(2) for c in range(2)]
    return category_from_dict(
        {
            "name": "z2",
            "labels": ["1", "e"],
            "dual": [0, 1],
            "qdim": [1, 1],
            "fusion": [[a, b, (a + b) % 2] for a in range(2) for b in range(2)],
            "F": F,
            "S": [[r, r], [r, -r]],
            "T": [1, 1],
        }
    )


def single_layer(model: str) -> CategoryData:
    """String-net input category of a microscopic model."""
    if model == "toric":
        return z2_category()
    if model == "doubled_semion":
        return load_category("semion")
    if model == "doubled_fibonacci":
        return load_category("fibonacci")
    raise ValueError(f"unknown string-net model {model!r}")


@dataclass(frozen=True)
class RingOperator:
    label: int
    edge: int
    entries: np.ndarray

    def local(self) -> sp.csr_matrix:
        return sp.diags(self.entries, format="csr")


def ring_diagonal(cat: CategoryData, a: int | str) -> np.ndarray:
    a = cat.index(a)
    return cat.S[a] / cat.S[0]


def ring_operator(cat: CategoryData, a: int | str, edge: int, n_sites: int) -> SparseOperator:
    """``O_a`` on ``edge`` (0-based), identity elsewhere."""
    if not 0 <= edge < n_sites:
        raise ValueError(f"edge {edge} outside 0..{n_sites - 1}")
    ring = RingOperator(cat.index(a), edge, ring_diagonal(cat, a))
    m = embed_local(ring.local(), [edge], n_sites, cat.n)
    return SparseOperator(m, n_sites, cat.n, hermitian=bool(np.allclose(ring.entries.imag, 0)), name=f"O_{cat.labels[ring.label]}@{edge}")


def loop_operator(cat: CategoryData, a: int | str, edges: Sequence[int], n_sites: int) -> sp.csr_matrix:
    m = sp.identity(cat.n**n_sites, dtype=complex, format="csr")
    for e in edges:
        m = ring_operator(cat, a, e, n_sites).matrix @ m
    return m


# ------------------------------------------------------------ excitations


@dataclass(frozen=True)
class ExcitationReport:
    label: str
    edge: int
    plaquette_residual: float
    energy_shift: float
    eigen_residual: float
    ground_weight: float


def excitation_check(
    cat: CategoryData, a: int | str, edge: int, lat: HoneycombTorus, H_top: SparseOperator, ground: GroundSubspace
) -> ExcitationReport:
    """Apply ``O_a`` to every frame vector and test the two adjacent plaquettes and the energy.

    Residuals are maxima over the frame. ``ground_weight`` is the largest
    squared norm of the ground-space component of a normalized ``O_a|psi>``.
    """
    a = cat.index(a)
    O = ring_operator(cat, a, edge, lat.n_edges).matrix
    adjacent = {f"B{p.boundary}" for p in lat.plaquettes if edge in p.boundary}
    Bs = [t.op for t in H_top.terms if t.label in adjacent]
    if len(Bs) != 2:
        raise ValueError("Hamiltonian terms do not expose both adjacent plaquettes")
    plaq = shift = resid = weight = 0.0
    E0 = ground.energy
    for k in range(ground.frame.shape[1]):
        phi = O @ ground.frame[:, k]
        phi = phi / np.linalg.norm(phi)
        plaq = max(plaq, *(np.linalg.norm(B @ phi) for B in Bs))
        Hphi = H_top.matrix @ phi
        e = np.vdot(phi, Hphi).real
        shift = max(shift, e - E0)
        resid = max(resid, np.linalg.norm(Hphi - e * phi))
        weight = max(weight, np.linalg.norm(ground.frame.conj().T @ phi) ** 2)
    return ExcitationReport(cat.labels[a], edge, float(plaq), float(shift), float(resid), float(weight))


# ------------------------------------------------------------ tomography


def loop_eigenvalues(cat: CategoryData, a: int | str) -> np.ndarray:
    """``S_{(a,a),x} / S_{1,x}`` over the labels ``x`` of the double of ``cat``."""
    d = double(cat)
    a = cat.index(a)
    return d.S[a * cat.n + a] / d.S[0]


@dataclass(frozen=True)
class FluxTomography:
    sectors: tuple[str, ...]
    eigenvalues: np.ndarray
    projectors: tuple[np.ndarray, ...]
    scale: float
    mismatch: float
    expectations: dict[str, float]
    ground_weight: float

    def split_pairs(self) -> dict[str, float]:
        """Spread each combined sector evenly over its labels."""
        out = {}
        for name, val in self.expectations.items():
            parts = name.split("+")
            for p in parts:
                out[p] = val / len(parts)
        return out


def _fit_scale(m: np.ndarray, target: np.ndarray) -> tuple[float, float]:
    best = (np.nan, np.inf)
    for sign in (1, -1):
        t = np.sort(sign * target)
        c = float(np.dot(m, t) / np.dot(t, t))
        err = float(np.abs(m / c - t).max())
        if err < best[1]:
            best = (sign * c, err)
    return best


def flux_tomography(
    model: str, loop: Sequence[int], ground: GroundSubspace, psi: np.ndarray | None = None, a: int | str | None = None
) -> FluxTomography:
    """Flux-sector projectors of the loop operator of ``(a, a)`` along the 0-based dual ``loop``.

    ``a`` defaults to the nontrivial label of the single layer. Sectors with
    equal loop eigenvalue are merged and named ``x+y``.
    """
    cat = single_layer(model)
    a = cat.index(a if a is not None else 1)
    frame = ground.frame
    Op = loop_operator(cat, a, loop, int(round(np.log(frame.shape[0]) / np.log(cat.n))))
    M = frame.conj().T @ (Op @ frame)
    if np.abs(M - M.conj().T).max() > TOMOGRAPHY_TOL:
        raise TomographyError("loop operator is not Hermitian on the frame")
    w, U = np.linalg.eigh(M)
    target = loop_eigenvalues(cat, a)
    if np.abs(target.imag).max() > 1e-12 or len(target) != len(w):
        raise TomographyError("flux eigenvalues must be real and match the frame dimension")
    c, mismatch = _fit_scale(w, target.real)
    if mismatch > TOMOGRAPHY_TOL:
        raise TomographyError(f"loop spectrum mismatch {mismatch:.2e}")
    labels = double(cat).labels
    values = sorted(set(np.round(target.real, 8)), reverse=True)
    sectors, projectors, eigs = [], [], []
    for v in values:
        names = [labels[x] for x in range(len(target)) if abs(target[x].real - v) < 1e-8]
        cols = np.abs(w / c - v) < 1e-6
        projectors.append(U[:, cols] @ U[:, cols].conj().T)
        sectors.append("+".join(names))
        eigs.append(v)
    expectations, weight = {}, float("nan")
    if psi is not None:
        coords = frame.conj().T @ psi
        weight = float(np.linalg.norm(coords) ** 2)
        coords = coords / np.linalg.norm(coords)
        expectations = {s: float(np.vdot(coords, P @ coords).real) for s, P in zip(sectors, projectors)}
    return FluxTomography(tuple(sectors), np.array(eigs), tuple(projectors), c, mismatch, expectations, weight)


def write_tomography_csv(rows: Sequence[tuple[str, str, str, float]], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "loop", "sector", "expectation"])
        for model, loop, sector, val in rows:
            w.writerow([model, loop, sector, f"{val:.12g}"])


# ------------------------------------------------------------ effective state


@dataclass(frozen=True)
class AnalyticGroundState:
    labels: tuple[str, ...]
    hamiltonian: np.ndarray
    energies: np.ndarray
    state: np.ndarray
    degenerate: bool

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.state) ** 2


def analytic_effective_ground_state(cat: CategoryData, geometry: str = "rhombic") -> AnalyticGroundState:
    """Ground state of ``-(F + A^-1 F A + A^-2 F A^2)`` with ``A = TS`` on the flux basis.

    ``cat`` is the doubled category; ``F`` is the loop operator of ``(a, a)``
    for the first nontrivial single-layer label ``a``. The global phase makes
    the vacuum amplitude real and nonnegative.
    """
    if geometry != "rhombic":
        raise ValueError("only the rhombic geometry is supported")
    if cat.n == 1:
        return AnalyticGroundState(cat.labels, np.zeros((1, 1)), np.zeros(1), np.ones(1, dtype=complex), False)
    n = int(round(np.sqrt(cat.n)))
    if n * n != cat.n:
        raise ValueError("expected a doubled category with n^2 labels")
    F = np.diag(cat.S[n + 1] / cat.S[0])
    A = cat.T @ cat.S
    Ai = np.linalg.inv(A)
    H = -(F + Ai @ F @ A + Ai @ Ai @ F @ A @ A)
    H = (H + H.conj().T) / 2
    w, v = np.linalg.eigh(H)
    degenerate = bool(w[1] - w[0] < 1e-10)
    g = v[:, 0]
    if abs(g[0]) > 1e-12:
        g = g * np.exp(-1j * np.angle(g[0]))
    return AnalyticGroundState(cat.labels, H, w, g, degenerate)


# ------------------------------------------------------------ reference state


def semion_reference_state(lat: HoneycombTorus, ground: GroundSubspace, loop: Sequence[int] = (0, 1)) -> np.ndarray:
    """Unique joint +1 eigenvector of the rotation image and ``Z`` string on ``loop`` in the ground space."""
    n = lat.n_edges
    frame = ground.frame
    U = frame.conj().T @ (rotation_unitary(lat).matrix @ frame)
    Zs = frame.conj().T @ (pauli_string({e: "Z" for e in loop}, n) @ frame)
    w, v = np.linalg.eig(U)
    plus = v[:, np.abs(w - 1) < 1e-8]
    plus, _ = np.linalg.qr(plus)
    wz, vz = np.linalg.eigh(plus.conj().T @ Zs @ plus)
    sel = np.abs(wz - 1) < 1e-8
    if sel.sum() != 1:
        raise ValueError(f"joint +1 eigenspace has dimension {int(sel.sum())}, expected 1")
    return frame @ (plus @ vz[:, sel][:, 0])
