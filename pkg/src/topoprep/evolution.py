"""Trotterized Schrödinger evolution along ``H(s) = (1 - s) H_triv + s H_top``.

Each Trotter factor is applied exactly: the term lists of the model
Hamiltonians pairwise commute, so ``exp(-i c H dt)`` factorizes into closed-form
exponentials of the individual terms.
"""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from .ops import PAULI, SparseOperator, commutator_norm, embed_local

COMMUTE_TOL = 1e-10
DENSE_FALLBACK_DIM = 4096
DENSE_EIGH_DIM = 256


class GroundSubspaceError(RuntimeError):
    """Eigensolver failed to converge; carries the residuals seen."""

    def __init__(self, message: str, residuals: Sequence[float] = ()):
        super().__init__(message)
        self.residuals = list(residuals)


def _identity(x: float) -> float:
    return x


@dataclass(frozen=True)
class Schedule:
    """Interpolation ``s(t) = profile(t / T)``, run up to ``kappa * T`` in steps of ``dt``."""

    total_time: float
    dt: float = 0.1
    profile: Callable[[float], float] = _identity
    kappa: float = 1.0

    def __post_init__(self) -> None:
        if self.total_time <= 0 or self.dt <= 0:
            raise ValueError("total_time and dt must be positive")
        if self.total_time / self.dt < 1 - 1e-12:
            raise ValueError("total_time must cover at least one step")
        if not 0 < self.kappa <= 1:
            raise ValueError("kappa must lie in (0, 1]")
        if abs(self.profile(0.0)) > 1e-12 or abs(self.profile(1.0) - 1) > 1e-12:
            raise ValueError("profile must map 0 to 0 and 1 to 1")
        s = self.s_grid()
        if np.any(np.diff(s) < -1e-15):
            raise ValueError("profile must be nondecreasing")

    @property
    def n_steps(self) -> int:
        return int(round(self.kappa * self.total_time / self.dt))

    def time(self, j: int) -> float:
        return j * self.dt

    def s(self, j: int) -> float:
        return float(self.profile(min(1.0, j * self.dt / self.total_time)))

    def s_grid(self) -> np.ndarray:
        return np.array([self.s(j) for j in range(self.n_steps + 1)])


@dataclass(frozen=True)
class GroundSubspace:
    """Orthonormal columns spanning the lowest eigenspace of a Hamiltonian."""

    frame: np.ndarray
    energy: float
    degeneracy_tol: float = 1e-8
    gap: float = float("nan")

    @property
    def degeneracy(self) -> int:
        return self.frame.shape[1]

    def project(self, psi: np.ndarray) -> np.ndarray:
        return self.frame @ (self.frame.conj().T @ psi)

    def weight(self, psi: np.ndarray) -> float:
        c = self.frame.conj().T @ psi
        return float(np.real(np.vdot(c, c)))

    def coords(self, psi: np.ndarray) -> np.ndarray:
        return self.frame.conj().T @ psi


@dataclass
class Trajectory:
    times: list[float] = dataclasses.field(default_factory=list)
    s: list[float] = dataclasses.field(default_factory=list)
    eps_adia: list[float] = dataclasses.field(default_factory=list)
    overlap_ref: list[float] = dataclasses.field(default_factory=list)
    norm_drift: list[float] = dataclasses.field(default_factory=list)
    probes: dict[str, list[float]] = dataclasses.field(default_factory=dict)
    states: dict[float, np.ndarray] = dataclasses.field(default_factory=dict)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            names = sorted(self.probes)
            w.writerow(["t", "s", "eps_adia", "overlap_ref", "norm_drift", *names])
            for i, t in enumerate(self.times):
                row = [t, self.s[i], self.eps_adia[i], self.overlap_ref[i], self.norm_drift[i]]
                row += [self.probes[n][i] for n in names]
                w.writerow([f"{x:.12g}" for x in row])


# ------------------------------------------------------------------ propagators


def apply_single_site(psi: np.ndarray, u: np.ndarray, n_sites: int) -> np.ndarray:
    """Apply the same 2x2 unitary ``u`` to every qubit."""
    out = psi.reshape((2,) * n_sites)
    for j in range(n_sites):
        out = np.moveaxis(np.tensordot(u, out, axes=([1], [j])), 0, j)
    return out.reshape(-1)


class Propagator:
    """``psi -> exp(-i c H dt) psi`` for arbitrary real ``c dt``, using the term list when possible."""

    def __init__(self, op: SparseOperator):
        self.op = op
        self.mode = "dense"
        if op.field is not None:
            self.mode = "field"
            self.field = np.asarray(op.field, dtype=float)
            self._zdiag = None
            if np.allclose(self.field[:2], 0):
                self._zdiag = np.asarray(op.matrix.diagonal()).real
            return
        if op.terms and _pairwise_commuting(op.terms):
            self.mode = "terms"
            diag = np.zeros(op.dim)
            self.offdiag = []
            for t in op.terms:
                if t.diagonal:
                    diag += t.coeff * np.asarray(t.op.diagonal()).real
                elif t.kind in ("projector", "involution"):
                    self.offdiag.append(t)
                else:
                    self.mode = "dense"
                    break
            self.diag = diag
            return
        if op.dim > DENSE_FALLBACK_DIM:
            raise ValueError(f"no exact factorization for {op.name} and dim {op.dim} exceeds the dense fallback")

    def __call__(self, psi: np.ndarray, tau: float) -> np.ndarray:
        """Apply ``exp(-i tau H)``."""
        if tau == 0:
            return psi
        if self.mode == "field":
            if self._zdiag is not None:
                return np.exp(-1j * tau * self._zdiag) * psi
            n = self.field
            norm = np.linalg.norm(n)
            h = (n[0] * PAULI["X"] + n[1] * PAULI["Y"] + n[2] * PAULI["Z"]) / norm
            u = np.cos(tau * norm) * np.eye(2) - 1j * np.sin(tau * norm) * h
            return apply_single_site(psi, u, self.op.n_sites)
        if self.mode == "terms":
            out = np.exp(-1j * tau * self.diag) * psi
            for t in self.offdiag:
                theta = tau * t.coeff
                if t.kind == "projector":
                    out = out + (np.exp(-1j * theta) - 1) * (t.op @ out)
                else:
                    out = np.cos(theta) * out - 1j * np.sin(theta) * (t.op @ out)
            return out
        return sla.expm_multiply(-1j * tau * self.op.matrix, psi)


def _pairwise_commuting(terms) -> bool:
    ops = [t.op for t in terms]
    return all(commutator_norm(ops[i], ops[j]) < COMMUTE_TOL for i in range(len(ops)) for j in range(i + 1, len(ops)))


def propagator(op: SparseOperator) -> Propagator:
    """Cached on the operator; the commutation check runs once."""
    prop = op.meta.get("_propagator")
    if prop is None:
        prop = Propagator(op)
        op.meta["_propagator"] = prop
    return prop


def trotter_step(psi: np.ndarray, H_triv: SparseOperator, H_top: SparseOperator, s: float, dt: float) -> np.ndarray:
    """``exp(-i s H_top dt) exp(-i (1 - s) H_triv dt) psi``."""
    psi = propagator(H_triv)(psi, (1 - s) * dt)
    return propagator(H_top)(psi, s * dt)


# -------------------------------------------------------------- ground spaces


def interpolated(H_triv: SparseOperator, H_top: SparseOperator, s: float) -> sp.csr_matrix:
    return ((1 - s) * H_triv.matrix + s * H_top.matrix).tocsr()


def _as_matrix(H) -> sp.csr_matrix:
    return H.matrix if isinstance(H, SparseOperator) else sp.csr_matrix(H)


def _v0(dim: int) -> np.ndarray:
    # fixed start vector keeps every run bit-identical
    return np.random.default_rng(12345).standard_normal(dim)


def ground_subspace(H, k_max: int = 8, degeneracy_tol: float = 1e-8, residual_tol: float = 1e-8) -> GroundSubspace:
    """Lowest eigenspace of a Hermitian operator.

    Large operators use Lanczos with a deflation pass that confirms no further
    vector of the cluster was missed.
    """
    M = _as_matrix(H)
    dim = M.shape[0]
    if dim <= DENSE_EIGH_DIM:
        w, v = np.linalg.eigh(M.toarray())
        k = int(np.sum(w < w[0] + degeneracy_tol))
        gap = float(w[k] - w[0]) if k < dim else float("inf")
        return GroundSubspace(v[:, :k], float(w[0]), degeneracy_tol, gap)
    k = min(k_max, dim - 2)
    vals, vecs = _eigsh(M, k)
    E0 = vals[0]
    sel = vals < E0 + degeneracy_tol
    frame = vecs[:, sel]
    if np.all(sel):
        raise GroundSubspaceError(f"ground cluster has at least {k} states; raise k_max")
    gap = float(vals[~sel][0] - E0)
    frame = _complete_cluster(M, frame, E0, degeneracy_tol)
    frame, _ = np.linalg.qr(frame)
    res = [float(np.linalg.norm(M @ frame[:, i] - E0 * frame[:, i])) for i in range(frame.shape[1])]
    if max(res) > residual_tol:
        raise GroundSubspaceError("ground frame residual above tolerance", res)
    return GroundSubspace(frame, float(E0), degeneracy_tol, gap)


def _eigsh(M, k, tol=1e-13):
    try:
        vals, vecs = sla.eigsh(M, k=k, which="SA", v0=_v0(M.shape[0]), tol=tol, maxiter=20000)
    except sla.ArpackNoConvergence as exc:
        raise GroundSubspaceError("eigensolver did not converge", [np.nan] * k) from exc
    # Lanczos vectors of near-degenerate clusters are not orthogonal; Rayleigh-Ritz fixes that
    q = np.linalg.qr(vecs)[0]
    vals, y = np.linalg.eigh(q.conj().T @ (M @ q))
    return vals, q @ y


def _complete_cluster(M, frame, E0, tol):
    """Deflate the found vectors and look for further states at ``E0``."""
    dim = M.shape[0]
    shift = float(abs(E0)) + 10.0 + sla.norm(M, 1)
    for _ in range(8):
        V = frame

        def mv(x, V=V):
            return M @ x + shift * (V @ (V.conj().T @ x))

        op = sla.LinearOperator((dim, dim), matvec=mv, dtype=complex)
        vals, vecs = _eigsh(op, 2)
        extra = vecs[:, vals < E0 + tol]
        if extra.shape[1] == 0:
            return frame
        frame = np.hstack([frame, extra])
    raise GroundSubspaceError("deflation did not terminate")


def adiabaticity_error(psi: np.ndarray, sub: GroundSubspace) -> float:
    """``1 - <psi|P0|psi>`` clipped to ``[0, 1]``."""
    if psi.shape[0] != sub.frame.shape[0]:
        raise ValueError("state and frame dimensions differ")
    return float(min(1.0, max(0.0, 1.0 - sub.weight(psi))))


def subspace_overlap(psi: np.ndarray, ref: np.ndarray) -> float:
    """``|<psi|ref>|^2``."""
    return float(min(1.0, abs(np.vdot(psi, ref)) ** 2))


# ------------------------------------------------------------------- evolve


def evolve(
    H_triv: SparseOperator,
    H_top: SparseOperator,
    sched: Schedule,
    probes: Mapping[str, Callable[[np.ndarray], float]] | None = None,
    psi0: np.ndarray | None = None,
    n_samples: int = 64,
    sample_times: Sequence[float] | None = None,
    store_at: Sequence[float] = (),
    reference: np.ndarray | None = None,
    instantaneous: bool = True,
    final_subspace: GroundSubspace | None = None,
) -> tuple[np.ndarray, Trajectory]:
    """Integrate from the ground state of ``H_triv`` to time ``kappa * T``.

    ``eps_adia`` is recorded at ``n_samples`` evenly spaced steps (or at
    ``sample_times``) against the instantaneous ground space of ``H(s)``; with
    ``instantaneous=False`` only the final sample is taken, against
    ``final_subspace`` or the ground space of ``H_top``.
    """
    N = sched.n_steps
    t_end = sched.time(N)
    for t in list(store_at) + list(sample_times or []):
        if t > t_end + 1e-9 or t < 0:
            raise ValueError(f"checkpoint t={t} lies outside [0, {t_end}]")
    if psi0 is None:
        psi0 = initial_state(H_triv)
    psi = np.array(psi0, dtype=complex)
    norm0 = np.linalg.norm(psi)

    if sample_times is not None:
        sample_steps = sorted({int(round(t / sched.dt)) for t in sample_times})
    elif instantaneous:
        sample_steps = sorted({int(round(x)) for x in np.linspace(0, N, n_samples)})
    else:
        sample_steps = [N]
    store_steps = {int(round(t / sched.dt)): t for t in store_at}
    traj = Trajectory(probes={k: [] for k in (probes or {})})

    def record(j: int) -> None:
        s = sched.s(j)
        if j == N and final_subspace is not None and sched.kappa == 1:
            sub = final_subspace
        elif s == 1.0:
            sub = ground_subspace(H_top)
        else:
            sub = ground_subspace(interpolated(H_triv, H_top, s))
        traj.times.append(sched.time(j))
        traj.s.append(s)
        traj.eps_adia.append(adiabaticity_error(psi, sub))
        traj.overlap_ref.append(subspace_overlap(psi, reference) if reference is not None else float("nan"))
        traj.norm_drift.append(abs(np.linalg.norm(psi) - norm0))
        for k, f in (probes or {}).items():
            traj.probes[k].append(float(f(psi)))

    samples = set(sample_steps)
    if 0 in samples:
        record(0)
    if 0 in store_steps:
        traj.states[store_steps[0]] = psi.copy()
    for j in range(1, N + 1):
        psi = trotter_step(psi, H_triv, H_top, sched.s(j), sched.dt)
        if j in samples:
            record(j)
        if j in store_steps:
            traj.states[store_steps[j]] = psi.copy()
    return psi, traj


def initial_state(H_triv: SparseOperator) -> np.ndarray:
    """Product ground state for field Hamiltonians, otherwise the unique ground state."""
    if H_triv.field is not None:
        from .lattice import single_site_ground

        phi = single_site_ground(H_triv.field)
        psi = np.ones(1, dtype=complex)
        for _ in range(H_triv.n_sites):
            psi = np.kron(psi, phi)
        return psi
    sub = ground_subspace(H_triv)
    if sub.degeneracy != 1:
        raise ValueError("initial Hamiltonian has a degenerate ground space")
    return sub.frame[:, 0]


def field_operator(nvec: Sequence[float], n_sites: int) -> SparseOperator:
    """``sum_j n . sigma_j`` without a norm restriction (used for scaled chain fields)."""
    nvec = np.asarray(nvec, dtype=float)
    h = nvec[0] * PAULI["X"] + nvec[1] * PAULI["Y"] + nvec[2] * PAULI["Z"]
    H = sum(embed_local(sp.csr_matrix(h), [j], n_sites) for j in range(n_sites))
    return SparseOperator(H, n_sites, 2, True, field=nvec, name="field")
