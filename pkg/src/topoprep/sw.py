"""Schrieffer-Wolff effective Hamiltonians on a degenerate ground space.

All perturbative quantities are evaluated exactly inside a compressed space:
the smallest ``H0``-invariant subspace containing ``V^k P0`` for ``k <= depth``.
Every word with at most ``depth`` factors of ``V`` acting on the ground frame
stays inside it, so compression introduces no error for orders up to ``depth``.
"""

from __future__ import annotations

import warnings
from fractions import Fraction
from math import comb, factorial
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla
from scipy.linalg import orth, qr, schur

from .evolution import GroundSubspace, _eigsh, ground_subspace
from .ops import SparseOperator

MAX_ORDER = 6
SCALAR_TOL = 1e-8


class GapCollapseError(RuntimeError):
    """Perturbed low-energy cluster is not separated from the rest of the spectrum."""


class OrderBudgetError(ValueError):
    pass


def _mat(op) -> sp.csr_matrix:
    if isinstance(op, SparseOperator):
        return op.matrix
    return sp.csr_matrix(op)


def traceless(m: np.ndarray) -> np.ndarray:
    n = m.shape[0]
    return m - np.trace(m) / n * np.eye(n)


def scalar_deviation(m: np.ndarray) -> float:
    return float(np.linalg.norm(traceless(m)))


@lru_cache(maxsize=None)
def bernoulli_number(m: int) -> Fraction:
    """Exact ``B_m`` with ``B_1 = -1/2``; float tables lose digits by ``m = 4``."""
    if m == 0:
        return Fraction(1)
    return -sum(comb(m + 1, k) * bernoulli_number(k) for k in range(m)) / (m + 1)


@lru_cache(maxsize=None)
def a_coeff(m: int) -> float:
    """``2^m B_m / m!``, generating-function coefficients of ``2x / tanh(x)``-type series."""
    return float(2**m * bernoulli_number(m) / factorial(m))


@lru_cache(maxsize=None)
def b_coeff(k: int) -> float:
    """``b_{2n-1} = 2 (2^{2n} - 1) B_{2n} / (2n)!`` for odd ``k = 2n - 1``; ``b_1 = 1/2``."""
    if k % 2 == 0:
        raise ValueError("b coefficients are defined for odd indices")
    n = (k + 1) // 2
    return float(2 * (2 ** (2 * n) - 1) * bernoulli_number(2 * n) / factorial(2 * n))


@dataclass(frozen=True)
class EffectiveHamiltonian:
    """Matrix on the ground frame, optionally with a string-operator decomposition."""

    frame_tag: str
    matrix: np.ndarray
    coeffs: Mapping[str, complex] | None = None
    scalar: complex | None = None
    residual: float | None = None

    def __post_init__(self) -> None:
        dev = float(np.abs(self.matrix - self.matrix.conj().T).max(initial=0.0))
        scale = max(1.0, float(np.abs(self.matrix).max(initial=0.0)))
        if dev > 1e-10 * scale:
            raise ValueError(f"effective Hamiltonian is not Hermitian (deviation {dev:.2e})")

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


@dataclass
class SWContext:
    """``H0``, ``V`` and the ground frame, compressed to the reachable subspace.

    ``basis`` (columns) spans the compressed space; ``P0``, ``Q0``, ``G`` and
    ``V`` are dense matrices in that basis; ``frame`` holds the ground vectors
    as coordinates. ``G = Q0 (E0 - H0)^{-1} Q0``.
    """

    basis: np.ndarray
    H0: np.ndarray
    V: np.ndarray
    E0: float
    frame: np.ndarray
    excited_energies: np.ndarray
    P0: np.ndarray
    Q0: np.ndarray
    G: np.ndarray
    depth: int
    ground: GroundSubspace
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def g(self) -> int:
        return self.frame.shape[1]

    def on_frame(self, m: np.ndarray) -> np.ndarray:
        return self.frame.conj().T @ m @ self.frame

    @classmethod
    def build(
        cls,
        H0,
        V,
        depth: int,
        ground: GroundSubspace | None = None,
        max_dim: int = 4096,
        energy_tol: float = 1e-8,
    ) -> "SWContext":
        H0m, Vm = _mat(H0), _mat(V)
        if ground is None:
            ground = ground_subspace(H0m)
        basis = _reachable_basis(H0m, Vm, ground.frame, depth, max_dim)
        H0k = basis.conj().T @ (H0m @ basis)
        Vk = basis.conj().T @ (Vm @ basis)
        H0k = (H0k + H0k.conj().T) / 2
        Vk = (Vk + Vk.conj().T) / 2
        w, U = np.linalg.eigh(H0k)
        E0 = ground.energy
        gmask = np.abs(w - E0) < max(energy_tol, 1e-6 * max(1.0, abs(E0)))
        if gmask.sum() != ground.degeneracy:
            raise GapCollapseError("compressed space does not reproduce the ground degeneracy")
        Ug, Ue = U[:, gmask], U[:, ~gmask]
        we = w[~gmask]
        P0 = Ug @ Ug.conj().T
        Q0 = Ue @ Ue.conj().T
        G = (Ue / (E0 - we)) @ Ue.conj().T
        frame = basis.conj().T @ ground.frame
        return cls(basis, H0k, Vk, E0, frame, we, P0, Q0, G, depth, ground)

    def distinct_excited(self, tol: float = 1e-8) -> np.ndarray:
        vals = np.sort(self.excited_energies)
        if vals.size == 0:
            return vals
        keep = [vals[0]]
        for v in vals[1:]:
            if v - keep[-1] > tol:
                keep.append(v)
        return np.array(keep)


def _reachable_basis(H0, V, frame, depth, max_dim) -> np.ndarray:
    """Orthonormal basis of the ``H0``-closure of ``span{V^k frame : k <= depth}``."""
    basis = np.linalg.qr(frame)[0]
    level = basis
    for _ in range(depth):
        level = V @ level
        basis, added = _extend(basis, level)
        basis = _close_under(H0, basis, added, max_dim)
        level = basis
    return basis


def _extend(basis, vecs, tol=1e-10):
    vecs = vecs - basis @ (basis.conj().T @ vecs)
    vecs = vecs - basis @ (basis.conj().T @ vecs)
    if vecs.shape[1] == 0:
        return basis, vecs[:, :0]
    q, r, _ = qr(vecs, mode="economic", pivoting=True)
    rank = int(np.sum(np.abs(np.diag(r)) > tol * max(1.0, np.abs(r).max(initial=0.0))))
    new = q[:, :rank]
    return np.hstack([basis, new]), new


def _close_under(H0, basis, added, max_dim):
    while added.shape[1]:
        if basis.shape[1] > max_dim:
            raise MemoryError(f"reachable subspace exceeds {max_dim} states")
        basis, added = _extend(basis, H0 @ added)
    return basis


# ------------------------------------------------------------------ exact SW


def exact_sw(H0, V, eps: float, ground: GroundSubspace | None = None, gap_ratio: float = 10.0) -> EffectiveHamiltonian:
    """``P0 U (H0 + eps V) U^dagger P0`` on the unperturbed frame, ``U`` the direct rotation.

    ``U = sqrt(R_P0 R_P)`` with ``R = 2P - I``; both reflections are ``-I`` off
    ``span(P0, P)``, so the square root is taken there by eigendecomposition on
    the principal branch.
    """
    H0m, Vm = _mat(H0), _mat(V)
    if ground is None:
        ground = ground_subspace(H0m)
    g = ground.degeneracy
    H = (H0m + eps * Vm).tocsr()
    vals, vecs = _lowest(H, g + 1)
    spread = vals[g - 1] - vals[0]
    gap = vals[g] - vals[g - 1]
    if gap <= 0 or (spread > 0 and gap < spread / gap_ratio) or gap < 1e-9:
        raise GapCollapseError(f"cluster spread {spread:.3e} vs gap {gap:.3e}")
    F0 = ground.frame
    Fp = vecs[:, :g]
    W = orth(np.hstack([F0, Fp]), rcond=1e-10)
    a0 = W.conj().T @ F0
    ap = W.conj().T @ Fp
    k = W.shape[1]
    R0 = 2 * a0 @ a0.conj().T - np.eye(k)
    Rp = 2 * ap @ ap.conj().T - np.eye(k)
    M = R0 @ Rp
    # M is unitary, so its complex Schur form is diagonal with a unitary eigenbasis
    T, Y = schur(M, output="complex")
    lam = np.diag(T)
    if np.any(np.abs(lam + 1) < 1e-9):
        raise GapCollapseError("perturbed cluster has a vector orthogonal to the ground space")
    U = (Y * np.sqrt(lam)) @ Y.conj().T
    # U^dagger maps the unperturbed frame into the perturbed cluster
    tilde = W @ (U.conj().T @ a0)
    Heff = tilde.conj().T @ (H @ tilde)
    Heff = (Heff + Heff.conj().T) / 2
    return EffectiveHamiltonian("ground_frame", Heff)


def _lowest(H, k):
    dim = H.shape[0]
    if dim <= 256:
        w, v = np.linalg.eigh(H.toarray())
        return w[: k + 2], v[:, : k + 2]
    vals, vecs = _eigsh(H, min(k + 4, dim - 2))
    # Lanczos can drop members of exactly degenerate levels; deflate and look again
    shift = 10.0 + float(sla.norm(H, 1))
    for _ in range(16):
        V = vecs

        def mv(x, V=V):
            return H @ x + shift * (V @ (V.conj().T @ x))

        op = sla.LinearOperator((dim, dim), matvec=mv, dtype=complex)
        w, extra = _eigsh(op, 1, tol=1e-9)
        if w[0] >= vals[k - 1] - 1e-8:
            break
        q = np.linalg.qr(np.hstack([vecs, extra]))[0]
        vals, y = np.linalg.eigh(q.conj().T @ (H @ q))
        vecs = q @ y
    return vals, vecs


def cluster_energies(H0, V, eps: float, g: int) -> np.ndarray:
    """Lowest ``g`` eigenvalues of ``H0 + eps V`` by direct diagonalization."""
    H = (_mat(H0) + eps * _mat(V)).tocsr()
    return np.sort(_lowest(H, g)[0][:g])


# ----------------------------------------------------------------- series


def self_energy_term(ctx: SWContext, n: int) -> np.ndarray:
    """``P0 (V G)^{n-1} V P0`` on the frame."""
    if n < 1:
        raise ValueError("order must be at least 1")
    if n > ctx.depth:
        raise OrderBudgetError(f"context depth {ctx.depth} is below order {n}")
    v = ctx.V @ ctx.frame
    for _ in range(n - 1):
        v = ctx.V @ (ctx.G @ v)
    return ctx.frame.conj().T @ v


def _L(ctx: SWContext, X: np.ndarray) -> np.ndarray:
    return ctx.P0 @ X @ ctx.G - ctx.G @ X @ ctx.P0


def _compositions(total: int, parts: int):
    """Ordered tuples of ``parts`` positive integers summing to ``total``."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _hat_power(S: dict[int, np.ndarray], X: np.ndarray, k: int, m: int) -> np.ndarray:
    """``sum_{n_1+...+n_k = m} [S_{n_1}, [S_{n_2}, ... [S_{n_k}, X]]]``."""
    out = np.zeros_like(X)
    for comp in _compositions(m, k):
        Y = X
        for n in reversed(comp):
            Y = S[n] @ Y - Y @ S[n]
        out = out + Y
    return out


def sw_generators(ctx: SWContext, n: int) -> dict[int, np.ndarray]:
    """Anti-Hermitian generators ``S_1 .. S_n`` of the perturbative rotation."""
    key = ("S", n)
    if key in ctx._cache:
        return ctx._cache[key]
    P0, Q0, V = ctx.P0, ctx.Q0, ctx.V
    Vd = P0 @ V @ P0 + Q0 @ V @ Q0
    Vod = P0 @ V @ Q0 + Q0 @ V @ P0
    S: dict[int, np.ndarray] = {1: _L(ctx, Vod)}
    for m in range(2, n + 1):
        acc = -_L(ctx, Vd @ S[m - 1] - S[m - 1] @ Vd)
        for j in range(1, (m - 1) // 2 + 1):
            acc = acc + a_coeff(2 * j) * _L(ctx, _hat_power(S, Vod, 2 * j, m - 1))
        S[m] = acc
    ctx._cache[key] = S
    return S


def sw_series(ctx: SWContext, n: int) -> list[EffectiveHamiltonian]:
    """Order-by-order terms ``H_eff,q`` for ``q = 1..n`` (coefficients of ``eps^q``)."""
    if n > MAX_ORDER:
        raise OrderBudgetError(f"orders above {MAX_ORDER} are not supported")
    if n > ctx.depth:
        raise OrderBudgetError(f"context depth {ctx.depth} is below order {n}")
    P0, Q0, V = ctx.P0, ctx.Q0, ctx.V
    Vod = P0 @ V @ Q0 + Q0 @ V @ P0
    S = sw_generators(ctx, max(1, n - 1))
    out = [EffectiveHamiltonian("ground_frame", ctx.on_frame(V))]
    for q in range(2, n + 1):
        acc = np.zeros_like(V)
        for j in range(1, q // 2 + 1):
            acc = acc + b_coeff(2 * j - 1) * _hat_power(S, Vod, 2 * j - 1, q - 1)
        m = ctx.on_frame(acc)
        out.append(EffectiveHamiltonian("ground_frame", (m + m.conj().T) / 2))
    return out


# ------------------------------------------------- topological-order checks


@dataclass(frozen=True)
class TQOResult:
    order: int | None
    witness: tuple[str, ...] | None
    deviation: float
    degenerate_note: str = ""


def tqo_order(ctx: SWContext, L_max: int, tol: float = SCALAR_TOL) -> TQOResult:
    """Smallest ``n`` such that some ``P0 V Z_1 V ... Z_{n-1} V P0`` is not scalar.

    ``Z_j`` ranges over ``P0``, ``Q0`` and ``G^k`` for ``k <= m*``, the number
    of distinct excited energies; higher powers of ``G`` are linear
    combinations of these on each eigenspace.
    """
    note = "" if ctx.g > 1 else "rank-one ground space: every sandwich is scalar"
    if L_max > ctx.depth:
        raise OrderBudgetError(f"context depth {ctx.depth} is below L_max {L_max}")
    mstar = len(ctx.distinct_excited())
    inserts: dict[str, np.ndarray] = {"P0": ctx.P0, "Q0": ctx.Q0}
    Gk = np.eye(ctx.G.shape[0])
    for k in range(1, mstar + 1):
        Gk = Gk @ ctx.G
        inserts[f"G^{k}"] = Gk
    names = list(inserts)
    # vectors Z_{n-1} V ... Z_1 V P0 keyed by insertion word
    level: dict[tuple[str, ...], np.ndarray] = {(): ctx.V @ ctx.frame}
    for n in range(1, L_max + 1):
        worst, witness = 0.0, None
        for word, vec in level.items():
            dev = scalar_deviation(ctx.frame.conj().T @ vec)
            if dev > worst:
                worst, witness = dev, word
        if worst > tol:
            return TQOResult(n, witness, worst, note)
        if n == L_max:
            break
        nxt = {}
        for word, vec in level.items():
            for name in names:
                nxt[word + (name,)] = ctx.V @ (inserts[name] @ vec)
        level = nxt
    return TQOResult(None, None, 0.0, note)


@dataclass(frozen=True)
class LeadingOrderReport:
    L: int
    lower_order_deviations: tuple[float, ...]
    angle: float
    fitted_constant: float
    two_b1: float
    printed_two_b1: float = 1 / 3

    @property
    def lower_orders_scalar(self) -> bool:
        return all(d < SCALAR_TOL for d in self.lower_order_deviations)

    def as_text(self) -> str:
        devs = ", ".join(f"{d:.3e}" for d in self.lower_order_deviations)
        return (
            f"L={self.L} lower_order_traceless=[{devs}] angle={self.angle:.3e} "
            f"fitted_constant={self.fitted_constant:.10f} 2*b1={self.two_b1} printed_2*b1={self.printed_two_b1:.6f}"
        )


def frobenius_angle(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return float("nan")
    c = abs(np.vdot(a, b)) / (na * nb)
    return float(np.arccos(min(1.0, c)))


def leading_order_check(ctx: SWContext, L: int | None = None) -> LeadingOrderReport:
    """Scalar orders below ``L`` and proportionality of the order-``L`` term to the self-energy."""
    if L is None:
        L = tqo_order(ctx, ctx.depth).order
        if L is None:
            raise ValueError("no nontrivial order within the context depth")
    series = sw_series(ctx, L)
    devs = tuple(scalar_deviation(h.matrix) for h in series[: L - 1])
    A = traceless(series[L - 1].matrix)
    B = traceless(self_energy_term(ctx, L))
    c = float(np.real(np.vdot(B, A) / np.vdot(B, B)))
    return LeadingOrderReport(L, devs, frobenius_angle(A, B), c, 2 * b_coeff(1))


# ----------------------------------------------------- string decomposition


@dataclass(frozen=True)
class StringDecomposition:
    coeffs: dict[str, complex]
    scalar: complex
    residual: float
    rank_deficient: bool = False


def decompose_into_strings(H: np.ndarray, strings: Mapping[str, np.ndarray], rcond: float = 1e-10) -> StringDecomposition:
    """Least-squares fit ``H ~ sum_a f_a F_a + c I`` in the Frobenius norm.

    Rank-deficient families are fitted with the minimum-norm solution, which
    splits a combined coefficient evenly among identical operators.
    """
    H = np.asarray(H)
    names = list(strings)
    cols = [np.asarray(strings[k]).reshape(-1) for k in names] + [np.eye(H.shape[0]).reshape(-1)]
    A = np.stack(cols, axis=1)
    coef, _, rank, _ = np.linalg.lstsq(A, H.reshape(-1), rcond=rcond)
    deficient = rank < A.shape[1]
    if deficient:
        warnings.warn("string family is linearly dependent; coefficients are combined", RuntimeWarning, stacklevel=2)
    resid = float(np.linalg.norm(A @ coef - H.reshape(-1)))
    return StringDecomposition(dict(zip(names, coef[:-1])), complex(coef[-1]), resid, deficient)

