"""Majorana chain in its spin picture: the open transverse-field Ising chain.

Jordan-Wigner convention: ``c_{2j-1} = (prod_{k<j} Z_k) X_j`` and
``c_{2j} = (prod_{k<j} Z_k) Y_j``, so ``-i c_{2j-1} c_{2j} = Z_j`` and the
fermionic parity is ``prod_j Z_j``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .evolution import GroundSubspace, Schedule, evolve, field_operator, ground_subspace
from .ops import SparseOperator, Term, pauli_string
from .sw import exact_sw


@dataclass(frozen=True)
class ChainSpec:
    L: int
    g: float = 0.0
    boundary: str = "open"

    def __post_init__(self) -> None:
        if self.L < 2:
            raise ValueError("chain needs at least two sites")
        if self.boundary not in ("open", "periodic"):
            raise ValueError(f"unknown boundary {self.boundary!r}")


def majorana_operators(L: int) -> list[sp.csr_matrix]:
    """``[c_1, ..., c_{2L}]`` as spin operators (0-based list)."""
    out = []
    for j in range(L):
        tail = {k: "Z" for k in range(j)}
        out.append(pauli_string({**tail, j: "X"}, L))
        out.append(pauli_string({**tail, j: "Y"}, L))
    return out


def build_tfim(spec: ChainSpec) -> SparseOperator:
    """``-(1/2) sum X_j X_{j+1} + (g/2) sum Z_j``."""
    L = spec.L
    bonds = [(j, j + 1) for j in range(L - 1)]
    if spec.boundary == "periodic":
        bonds.append((L - 1, 0))
    terms = [Term(-0.5, pauli_string({a: "X", b: "X"}, L), "involution", f"XX{a}{b}") for a, b in bonds]
    if spec.g != 0:
        terms += [Term(spec.g / 2, pauli_string({j: "Z"}, L), "involution", f"Z{j}") for j in range(L)]
    H = sum(t.coeff * t.op for t in terms)
    return SparseOperator(H, L, 2, True, tuple(terms), name=f"tfim_L{L}_g{spec.g}")


def parity_operator(L: int) -> SparseOperator:
    return SparseOperator(pauli_string({j: "Z" for j in range(L)}, L), L, name="parity")


def majorana_matrix(spec: ChainSpec) -> np.ndarray:
    """Real antisymmetric ``A`` with ``H = (i/4) sum A_pq c_p c_q`` for the open chain."""
    if spec.boundary != "open":
        raise ValueError("the Majorana matrix is provided for open chains only")
    L = spec.L
    A = np.zeros((2 * L, 2 * L))
    for j in range(L):
        A[2 * j, 2 * j + 1] = -spec.g
        A[2 * j + 1, 2 * j] = spec.g
    for j in range(L - 1):
        A[2 * j + 1, 2 * j + 2] = 1.0
        A[2 * j + 2, 2 * j + 1] = -1.0
    return A


def quadratic_operator(Vmat: np.ndarray, range_r: int | None = None, norm_bound: float | None = 1.0) -> SparseOperator:
    """``(i/4) sum_pq V_pq c_p c_q`` for a real antisymmetric ``2L x 2L`` matrix."""
    Vmat = np.asarray(Vmat)
    if Vmat.ndim != 2 or Vmat.shape[0] != Vmat.shape[1] or Vmat.shape[0] % 2:
        raise ValueError("expected a square matrix of even size")
    if np.iscomplexobj(Vmat) and np.abs(Vmat.imag).max() > 0:
        raise ValueError("matrix must be real")
    Vmat = np.real(Vmat)
    if np.abs(Vmat + Vmat.T).max() > 1e-12:
        raise ValueError("matrix must be antisymmetric")
    if norm_bound is not None and np.linalg.norm(Vmat, 2) > norm_bound + 1e-12:
        raise ValueError(f"operator norm exceeds {norm_bound}")
    if range_r is not None:
        p, q = np.nonzero(Vmat)
        if np.any(np.abs(p - q) > range_r):
            raise ValueError(f"matrix has entries beyond range {range_r}")
    L = Vmat.shape[0] // 2
    cs = majorana_operators(L)
    H = sp.csr_matrix((2**L, 2**L), dtype=complex)
    for p, q in zip(*np.nonzero(Vmat)):
        H = H + (0.25j * Vmat[p, q]) * (cs[p] @ cs[q])
    return SparseOperator(H, L, name="quadratic")


def mode_energies(spec: ChainSpec) -> np.ndarray:
    """Single-fermion energies, the nonnegative eigenvalues of ``i A`` in ascending order."""
    # spectrum of i A comes in +- pairs; the upper half survives exact zero modes
    w = np.linalg.eigvalsh(1j * majorana_matrix(spec))
    return np.abs(w[spec.L :])


def critical_gap(L: int) -> float:
    """Closed-form critical gap ``2 sin(pi / (2L + 1))`` as quoted for the open chain at ``g = 1``."""
    if L < 2:
        raise ValueError("L must be at least 2")
    return 2 * np.sin(np.pi / (2 * L + 1))


def lowest_mode_energy(L: int) -> float:
    """Exact lowest single-fermion energy of the open critical chain, ``2 sin(pi / (2 (2L + 1)))``."""
    return 2 * np.sin(np.pi / (2 * (2 * L + 1)))


def sector_spectra(spec: ChainSpec) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in the even and odd parity sectors."""
    H = build_tfim(spec).dense()
    parity = np.asarray(parity_operator(spec.L).matrix.diagonal()).real
    even = parity > 0
    return np.linalg.eigvalsh(H[np.ix_(even, even)]), np.linalg.eigvalsh(H[np.ix_(~even, ~even)])


# ---------------------------------------------------------------- preparation


@dataclass(frozen=True)
class InterpolationReport:
    L: int
    T: float
    initial_parity: float
    final_overlap: float
    parity_drift: float
    target_sector: str


def symmetry_protected_interpolation(spec: ChainSpec, T: float, dt: float = 0.1, field_sign: int = 1) -> InterpolationReport:
    """Interpolate from ``field_sign * (g/2) sum Z`` to the ``g = 0`` chain and report the parity-resolved overlap."""
    if spec.g <= 0:
        raise ValueError("the initial field strength g must be positive")
    L = spec.L
    H_triv = field_operator([0.0, 0.0, field_sign * spec.g / 2], L)
    H_top = build_tfim(ChainSpec(L, 0.0, spec.boundary))
    F = parity_operator(L)
    psi0 = ground_subspace(H_triv).frame[:, 0]
    p0 = F.expectation(psi0).real
    if abs(abs(p0) - 1) > 1e-10:
        raise ValueError("initial state is not a parity eigenstate")
    probes = {"parity": lambda psi: F.expectation(psi).real}
    psi, traj = evolve(H_triv, H_top, Schedule(T, dt), probes=probes, psi0=psi0, n_samples=16)
    drift = max(abs(x - p0) for x in traj.probes["parity"])
    target = parity_ground_states(L)[0 if p0 > 0 else 1]
    return InterpolationReport(L, T, p0, abs(np.vdot(target, psi)) ** 2, drift, "even" if p0 > 0 else "odd")


def parity_ground_states(L: int) -> tuple[np.ndarray, np.ndarray]:
    """``(|g_0>, |g_1>)``: ground states of the ``g = 0`` chain with even and odd parity."""
    sub = ground_subspace(build_tfim(ChainSpec(L, 0.0)))
    Fm = parity_operator(L).matrix
    w, y = np.linalg.eigh(sub.frame.conj().T @ (Fm @ sub.frame))
    vecs = sub.frame @ y
    return vecs[:, 1], vecs[:, 0]


# ------------------------------------------------------- exact effective form


@dataclass(frozen=True)
class ParityEffectiveReport:
    L: int
    g: float
    eps: float
    E0: float
    E1: float
    alpha: float
    beta: float
    parity_residual: float

    @property
    def delta(self) -> float:
        return self.E1 - self.E0

    @property
    def printed_form(self) -> tuple[float, float]:
        """Coefficients ``(E0/2, -Delta/2)`` of ``alpha I + beta F`` as printed."""
        return self.E0 / 2, -self.delta / 2

    @property
    def gap_consistent_form(self) -> tuple[float, float]:
        """``((E0 + E1)/2, -Delta/2)``; the sign of ``beta`` follows the parity of the lower state."""
        return (self.E0 + self.E1) / 2, float(np.sign(self.beta)) * self.delta / 2

    def row(self) -> list:
        return [self.L, self.g, self.eps, self.E0, self.E1, self.delta, self.beta, self.parity_residual]


def exact_parity_effective(spec: ChainSpec, eps: float, V: SparseOperator | None = None) -> ParityEffectiveReport:
    """Exact SW effective Hamiltonian of ``H_top + eps V`` written as ``alpha I + beta F``.

    ``H_top`` is the ``g = 0`` chain and ``V`` defaults to ``-(1/2) sum Z``.
    """
    L = spec.L
    H_top = build_tfim(ChainSpec(L, 0.0, spec.boundary))
    if V is None:
        V = field_operator([0.0, 0.0, -0.5], L)
    g0, g1 = parity_ground_states(L)
    sub = ground_subspace(H_top)
    frame = np.stack([g0, g1], axis=1)
    sub = GroundSubspace(frame, sub.energy, sub.degeneracy_tol, sub.gap)
    heff = exact_sw(H_top, V, eps, ground=sub).matrix
    resid = float(abs(heff[0, 1]))
    H = (H_top.matrix + eps * V.matrix).toarray()
    w = np.linalg.eigvalsh(H)
    alpha = float(np.real(heff[0, 0] + heff[1, 1]) / 2)
    beta = float(np.real(heff[0, 0] - heff[1, 1]) / 2)
    return ParityEffectiveReport(L, spec.g, eps, float(w[0]), float(w[1]), alpha, beta, resid)


def write_report_csv(reports: Sequence[ParityEffectiveReport], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["L", "g", "eps", "E0", "E1", "Delta", "beta_fit", "parity_residual"])
        for r in reports:
            w.writerow([f"{x:.12g}" if isinstance(x, float) else x for x in r.row()])
