"""Sparse operator plumbing for qudit lattices.

Site 0 is the most significant tensor factor, so a basis index ``x`` has the
digit of site ``s`` at weight ``d ** (n - 1 - s)``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class Term:
    """One summand ``coeff * op`` of a commuting-term Hamiltonian.

    ``kind`` is ``"projector"`` (``op**2 == op``), ``"involution"``
    (``op**2 == I``) or ``"generic"``; it selects the closed-form exponential.
    """

    coeff: float
    op: sp.csr_matrix
    kind: str
    label: str = ""

    @property
    def diagonal(self) -> bool:
        coo = self.op.tocoo()
        return bool(np.all(coo.row == coo.col))


@dataclass(frozen=True)
class SparseOperator:
    """Hamiltonian or observable on ``n_sites`` qudits of dimension ``local_dim``.

    ``terms`` (when present) sum to ``matrix`` and pairwise commute.
    ``field`` is set for uniform single-site Hamiltonians ``sum_j n . sigma_j``.
    """

    matrix: sp.csr_matrix
    n_sites: int
    local_dim: int = 2
    hermitian: bool = True
    terms: tuple[Term, ...] = ()
    field: np.ndarray | None = None
    name: str = ""
    meta: dict = dataclasses.field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        m = sp.csr_matrix(self.matrix, dtype=complex)
        if m.shape != (self.dim, self.dim):
            raise ValueError(f"matrix shape {m.shape} does not match {self.n_sites} sites of dim {self.local_dim}")
        object.__setattr__(self, "matrix", m)
        if self.hermitian:
            dev = hermitian_deviation(m)
            if dev > HERMITIAN_TOL:
                raise ValueError(f"operator flagged Hermitian deviates by {dev:.2e}")

    @property
    def dim(self) -> int:
        return self.local_dim**self.n_sites

    def __matmul__(self, other):
        return self.matrix @ other

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def expectation(self, psi: np.ndarray) -> complex:
        return complex(np.vdot(psi, self.matrix @ psi))


def hermitian_deviation(m: sp.spmatrix) -> float:
    diff = (m - m.conj().T).tocoo()
    return float(np.abs(diff.data).max(initial=0.0))


def site_weights(n_sites: int, d: int = 2) -> np.ndarray:
    return d ** (n_sites - 1 - np.arange(n_sites, dtype=np.int64))


def basis_digits(n_sites: int, d: int = 2) -> np.ndarray:
    """Array of shape ``(d**n, n)`` holding the site digits of each basis index."""
    idx = np.arange(d**n_sites, dtype=np.int64)
    return (idx[:, None] // site_weights(n_sites, d)[None, :]) % d


def embed_local(local: sp.spmatrix | np.ndarray, sites: Sequence[int], n_sites: int, d: int = 2) -> sp.csr_matrix:
    """Lift an operator on ``sites`` (in the given order) to the full register."""
    sites = list(sites)
    k = len(sites)
    if len(set(sites)) != k:
        raise ValueError("embedding sites must be distinct")
    coo = sp.coo_matrix(local)
    if coo.shape != (d**k, d**k):
        raise ValueError(f"local operator shape {coo.shape} does not act on {k} sites")
    w = site_weights(n_sites, d)
    loc_w = site_weights(k, d)
    wl = w[sites]

    def to_full(local_idx: np.ndarray) -> np.ndarray:
        digits = (local_idx[:, None] // loc_w[None, :]) % d
        return digits @ wl

    rest = [s for s in range(n_sites) if s not in sites]
    if rest:
        rest_offsets = basis_digits(len(rest), d) @ w[rest]
    else:
        rest_offsets = np.zeros(1, dtype=np.int64)
    rows = (to_full(coo.row.astype(np.int64))[:, None] + rest_offsets[None, :]).ravel()
    cols = (to_full(coo.col.astype(np.int64))[:, None] + rest_offsets[None, :]).ravel()
    vals = np.repeat(coo.data, len(rest_offsets))
    dim = d**n_sites
    return sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim))


def pauli_string(paulis: dict[int, str] | Iterable[tuple[int, str]], n_sites: int) -> sp.csr_matrix:
    """Tensor product of single-qubit Paulis, e.g. ``{0: "Z", 1: "Z"}``."""
    items = sorted(dict(paulis).items())
    if not items:
        return sp.identity(2**n_sites, dtype=complex, format="csr")
    local = np.eye(1, dtype=complex)
    for _, p in items:
        local = np.kron(local, PAULI[p])
    return embed_local(sp.csr_matrix(local), [s for s, _ in items], n_sites)


def permutation_operator(perm: Sequence[int], n_sites: int, d: int = 2) -> sp.csr_matrix:
    """Unitary moving the state of site ``s`` to site ``perm[s]``."""
    digits = basis_digits(n_sites, d)
    w = site_weights(n_sites, d)
    target = np.zeros(d**n_sites, dtype=np.int64)
    for s, t in enumerate(perm):
        target += digits[:, s] * w[t]
    src = np.arange(d**n_sites)
    return sp.csr_matrix((np.ones(d**n_sites, dtype=complex), (target, src)), shape=(d**n_sites,) * 2)


def commutator_norm(a: sp.spmatrix, b: sp.spmatrix) -> float:
    c = (a @ b - b @ a).tocoo()
    return float(np.abs(c.data).max(initial=0.0))


def export_coo(op: SparseOperator | sp.spmatrix, path: str | Path) -> None:
    """Write ``row col re im`` lines for each stored nonzero."""
    m = op.matrix if isinstance(op, SparseOperator) else op
    coo = sp.coo_matrix(m)
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        fh.write(f"# dim {coo.shape[0]}\n")
        for i in order:
            z = coo.data[i]
            fh.write(f"{coo.row[i]} {coo.col[i]} {z.real:.17g} {z.imag:.17g}\n")


def load_coo(path: str | Path) -> sp.csr_matrix:
    with open(path) as fh:
        dim = int(fh.readline().split()[2])
        lines = fh.read().split("\n")
    data = np.array([[float(x) for x in ln.split()] for ln in lines if ln.strip()]).reshape(-1, 4)
    if data.size == 0:
        return sp.csr_matrix((dim, dim), dtype=complex)
    return sp.csr_matrix(
        (data[:, 2] + 1j * data[:, 3], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(dim, dim)
    )


def normalized(psi: np.ndarray) -> np.ndarray:
    nrm = np.linalg.norm(psi)
    if nrm == 0:
        raise ValueError("cannot normalize the zero vector")
    return psi / nrm
