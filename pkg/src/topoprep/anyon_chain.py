"""Periodic anyon chains in the fusion-tree basis.

A basis state carries a site label ``a_j`` (vacuum when no anyon is present)
and a link label ``b_j`` with ``b_{j-1} x a_j -> b_j`` and ``b_0 = b_L``.
Two-site processes act on sites ``(j, j+1 mod L)``: an F-move fuses the two
site labels into a channel ``c``, the process acts within that channel, and
the inverse F-move restores the chain basis.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .anyons import CategoryData, flux_string_operator
from .evolution import GroundSubspace
from .sw import SWContext, decompose_into_strings, scalar_deviation, sw_series, tqo_order

MAX_BASIS = 200_000
PROCESSES = ("C", "A", "L", "R")


class BasisBudgetError(ValueError):
    def __init__(self, dim: int):
        super().__init__(f"fusion-tree basis has {dim} states, above the enumeration budget {MAX_BASIS}")
        self.dim = dim


@dataclass(frozen=True)
class FusionTreeBasis:
    cat: CategoryData
    L: int
    states: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]

    @property
    def dim(self) -> int:
        return len(self.states)

    def index(self, a: Sequence[int], b: Sequence[int]) -> int:
        return self._lookup[(tuple(a), tuple(b))]

    @property
    def _lookup(self) -> dict:
        cache = self.__dict__.get("_lookup_cache")
        if cache is None:
            cache = {s: i for i, s in enumerate(self.states)}
            object.__setattr__(self, "_lookup_cache", cache)
        return cache

    def vacuum_states(self) -> list[int]:
        """Indices of ``|1..1, b..b>`` ordered by ``b``."""
        ones = (0,) * self.L
        return [self.index(ones, (b,) * self.L) for b in range(self.cat.n)]


def transfer_matrix(cat: CategoryData) -> np.ndarray:
    """``M[b', b] = sum_a N^b_{b' a}``."""
    return cat.N.sum(axis=1)


def enumerate_basis(cat: CategoryData, L: int) -> FusionTreeBasis:
    if L < 2:
        raise ValueError("chain needs at least two sites")
    if np.any(cat.N > 1):
        raise NotImplementedError("fusion multiplicities above 1 are not supported")
    dim = int(round(np.trace(np.linalg.matrix_power(transfer_matrix(cat), L))))
    if dim > MAX_BASIS:
        raise BasisBudgetError(dim)
    n = cat.n
    states = []

    def grow(b0, a, b):
        if len(a) == L:
            if b[-1] == b0:
                states.append((tuple(a), tuple(b)))
            return
        prev = b[-1] if b else b0
        for x in range(n):
            for y in range(n):
                if cat.N[prev, x, y]:
                    grow(b0, a + [x], b + [y])

    for b0 in range(n):
        grow(b0, [], [])
    states.sort()
    if len(states) != dim:
        raise AssertionError(f"enumerated {len(states)} states but the transfer matrix gives {dim}")
    return FusionTreeBasis(cat, L, tuple(states))


@dataclass(frozen=True)
class ChainOperator:
    matrix: sp.csr_matrix
    basis: FusionTreeBasis
    kind: str
    label: int | None = None
    site: int | None = None

    def __matmul__(self, other):
        m = other.matrix if isinstance(other, ChainOperator) else other
        return self.matrix @ m

    @property
    def H(self) -> sp.csr_matrix:
        return self.matrix.conj().T.tocsr()


def onsite_h0(basis: FusionTreeBasis, costs: Sequence[float]) -> ChainOperator:
    """``sum_j eps_{a_j}``; the vacuum costs nothing."""
    costs = np.asarray(costs, dtype=float)
    if costs.shape != (basis.cat.n,):
        raise ValueError("one cost per label is required")
    if costs[0] != 0:
        raise ValueError("vacuum cost must be zero")
    if np.any(costs[1:] <= 0):
        raise ValueError("anyon costs must be positive")
    diag = np.array([costs[list(a)].sum() for a, _ in basis.states])
    return ChainOperator(sp.diags(diag.astype(complex), format="csr"), basis, "H0")


def _pair_amplitude(cat: CategoryData, kind: str, a: int, x: tuple[int, int], y: tuple[int, int], c: int) -> complex:
    """Amplitude of ``|x; c> -> |y; c>`` for the fused pair of site labels."""
    abar = int(cat.dual[a])
    if kind == "C":
        return np.sqrt(cat.qdim[a]) if x == (0, 0) and y == (a, abar) and c == 0 else 0.0
    if kind == "A":
        return np.sqrt(cat.qdim[a]) if x == (a, abar) and y == (0, 0) and c == 0 else 0.0
    if kind == "R":
        return 1.0 if x == (a, 0) and y == (0, a) and c == a else 0.0
    if kind == "L":
        return 1.0 if x == (0, a) and y == (a, 0) and c == a else 0.0
    raise ValueError(f"unknown process {kind!r}")


def elementary_two_site(basis: FusionTreeBasis, kind: str, a: int, site: int) -> ChainOperator:
    """Creation ``C``, annihilation ``A``, right hop ``R`` or left hop ``L`` of label ``a`` on ``(site, site+1)``.

    ``C`` creates ``a`` at ``site`` and its dual at ``site+1`` in the vacuum
    channel with amplitude ``sqrt(d_a)``; ``R`` moves ``a`` from ``site`` to
    ``site+1``. ``A`` and ``L`` are the adjoints.
    """
    cat = basis.cat
    if a == 0:
        raise ValueError("processes are defined for nontrivial labels")
    if kind not in PROCESSES:
        raise ValueError(f"unknown process {kind!r}")
    L = basis.L
    j, k = site % L, (site + 1) % L
    F = cat.F
    rows, cols, vals = [], [], []
    for col, (avec, bvec) in enumerate(basis.states):
        bl, bm, br = bvec[j - 1], bvec[j], bvec[k]  # b_{j-1}, b_j, b_{j+1}; bvec[-1] is b_0
        x = (avec[j], avec[k])
        for c in range(cat.n):
            f_in = F[bl, x[0], bm, x[1], br, c]
            if f_in == 0:
                continue
            for y0 in range(cat.n):
                for y1 in range(cat.n):
                    amp = _pair_amplitude(cat, kind, a, x, (y0, y1), c)
                    if amp == 0:
                        continue
                    for bm2 in range(cat.n):
                        f_out = F[bl, y0, bm2, y1, br, c]
                        if f_out == 0:
                            continue
                        a2 = list(avec)
                        a2[j], a2[k] = y0, y1
                        b2 = list(bvec)
                        b2[j] = bm2
                        rows.append(basis.index(a2, b2))
                        cols.append(col)
                        vals.append(np.conj(f_out) * amp * f_in)
    m = sp.csr_matrix((vals, (rows, cols)), shape=(basis.dim, basis.dim), dtype=complex)
    m.sum_duplicates()
    m.eliminate_zeros()
    if m.nnz == 0:
        warnings.warn(f"process {kind} of label {a} is inadmissible at site {site}", RuntimeWarning, stacklevel=2)
    return ChainOperator(m, basis, kind, a, site)


def ground_projection(basis: FusionTreeBasis, op: sp.spmatrix) -> np.ndarray:
    """``P0 op P0`` in the ``|1..1, b..b>`` basis."""
    idx = basis.vacuum_states()
    return op.tocsr()[idx][:, idx].toarray()


def winding_product(basis: FusionTreeBasis, a: int) -> np.ndarray:
    """``P0 A(abar)_{L-1,0} R(abar)_{L-2,L-1} ... R(abar)_{1,2} C(a)_{0,1} P0`` on the flux basis."""
    cat, L = basis.cat, basis.L
    abar = int(cat.dual[a])
    W = elementary_two_site(basis, "C", a, 0).matrix
    for j in range(1, L - 1):
        W = elementary_two_site(basis, "R", abar, j).matrix @ W
    W = elementary_two_site(basis, "A", abar, L - 1).matrix @ W
    return ground_projection(basis, W)


def chain_perturbation(
    basis: FusionTreeBasis, gamma: Mapping[int, complex], tau: Mapping[int, complex]
) -> sp.csr_matrix:
    """``sum_j sum_a gamma_a C(a) + conj(gamma_a) A(a) + tau_a L(a) + conj(tau_a) R(a)``."""
    V = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    for j in range(basis.L):
        for a, g in gamma.items():
            if g != 0:
                C = elementary_two_site(basis, "C", a, j).matrix
                V = V + g * C + np.conj(g) * C.conj().T
        for a, t in tau.items():
            if t != 0:
                Lop = elementary_two_site(basis, "L", a, j).matrix
                V = V + t * Lop + np.conj(t) * Lop.conj().T
    dev = abs(V - V.conj().T).max() if V.nnz else 0.0
    if dev > 1e-12:
        raise ValueError("assembled perturbation is not Hermitian")
    return V.tocsr()


@dataclass(frozen=True)
class ChainEffectiveReport:
    L: int
    order: int | None
    coeffs: dict[int, complex]
    scalar: complex
    residual: float
    lower_order_deviation: float

    def rows(self, cat: CategoryData):
        return [(cat.labels[a], f.real, f.imag, self.residual) for a, f in sorted(self.coeffs.items())]


def chain_effective(
    cat: CategoryData,
    L: int,
    costs: Sequence[float],
    gamma: Mapping[int, complex],
    tau: Mapping[int, complex],
) -> ChainEffectiveReport:
    """Order-``L`` SW term of ``H0 + V`` decomposed onto ``{F_a} + C I`` in the flux basis."""
    basis = enumerate_basis(cat, L)
    H0 = onsite_h0(basis, costs).matrix
    V = chain_perturbation(basis, gamma, tau)
    idx = basis.vacuum_states()
    frame = np.zeros((basis.dim, cat.n), dtype=complex)
    frame[idx, np.arange(cat.n)] = 1.0
    ground = GroundSubspace(frame, 0.0)
    ctx = SWContext.build(H0, V, depth=L, ground=ground)
    order = tqo_order(ctx, L).order
    series = sw_series(ctx, L)
    lower = max((scalar_deviation(h.matrix) for h in series[: L - 1]), default=0.0)
    strings = {a: flux_string_operator(a, cat).entries for a in range(1, cat.n)}
    dec = decompose_into_strings(series[L - 1].matrix, strings)
    return ChainEffectiveReport(L, order, dec.coeffs, dec.scalar, dec.residual, lower)


def write_report_csv(report: ChainEffectiveReport, cat: CategoryData, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", "f_L_re", "f_L_im", "residual"])
        for row in report.rows(cat):
            w.writerow([row[0]] + [f"{x:.12g}" for x in row[1:]])
