"""The 12-edge rhombic honeycomb torus and the Hamiltonians defined on it.

Edges are stored 0-based; ``ONE_BASED_*`` constants use the published 1-based
numbering and are converted on construction.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .anyons import CategoryData
from .ops import (
    SparseOperator,
    Term,
    basis_digits,
    hermitian_deviation,
    embed_local,
    pauli_string,
    permutation_operator,
    PAULI,
)

ONE_BASED_ROTATION = (5, 7, 8, 6, 9, 12, 11, 10, 2, 4, 1, 3)
ONE_BASED_DUAL_LOOPS = ((1, 2), (5, 7), (9, 11))
ONE_BASED_XBAR1 = (7, 8, 11, 12)
ONE_BASED_ZBAR1 = (10, 12)
# Printed as X4 X0 X2 X12; edge 9 is the only choice closing a loop through 2, 4, 12.
ONE_BASED_XBAR2 = (2, 4, 9, 12)
ONE_BASED_ZBAR2 = (1, 2)


class LatticeError(ValueError):
    """Inconsistent incidence data."""


@dataclass(frozen=True)
class Plaquette:
    """Boundary edges in cyclic order; ``legs[k]`` meets ``boundary[k]`` and ``boundary[k+1]``."""

    boundary: tuple[int, ...]
    legs: tuple[int, ...]

    def vertex_triples(self) -> list[tuple[int, int, int]]:
        b, l = self.boundary, self.legs
        return [(b[k], b[(k + 1) % 6], l[k]) for k in range(6)]


@dataclass(frozen=True)
class HoneycombTorus:
    n_edges: int
    vertices: tuple[tuple[int, int, int], ...]
    plaquettes: tuple[Plaquette, ...]
    minimal_dual_loops: tuple[tuple[int, ...], ...]
    rotation_perm: tuple[int, ...]

    def check(self) -> None:
        """Raise :class:`LatticeError` unless all incidence invariants hold."""
        counts_v = np.zeros(self.n_edges, dtype=int)
        for v in self.vertices:
            counts_v[list(v)] += 1
        counts_p = np.zeros(self.n_edges, dtype=int)
        for p in self.plaquettes:
            counts_p[list(p.boundary)] += 1
        if np.any(counts_v != 2) or np.any(counts_p != 2):
            raise LatticeError("every edge must lie on two vertices and two plaquettes")
        if len(self.vertices) - self.n_edges + len(self.plaquettes) != 0:
            raise LatticeError("Euler characteristic of a torus must vanish")
        vset = {frozenset(v) for v in self.vertices}
        for p in self.plaquettes:
            if not {frozenset(t) for t in p.vertex_triples()} <= vset:
                raise LatticeError("plaquette corners must be lattice vertices")
        perm = self.rotation_perm
        if {frozenset(perm[e] for e in v) for v in self.vertices} != vset:
            raise LatticeError("rotation does not map vertices to vertices")
        pset = {frozenset(p.boundary) for p in self.plaquettes}
        if {frozenset(perm[e] for e in p.boundary) for p in self.plaquettes} != pset:
            raise LatticeError("rotation does not map plaquettes to plaquettes")
        if _perm_order(perm) != 6:
            raise LatticeError("rotation must have order 6")


def _perm_order(perm: Sequence[int]) -> int:
    p = list(perm)
    cur, k = list(p), 1
    while cur != list(range(len(p))):
        cur = [p[c] for c in cur]
        k += 1
    return k


def _cycles(perm: Sequence[int]) -> list[list[int]]:
    seen, out = set(), []
    for start in range(len(perm)):
        if start in seen:
            continue
        cyc, e = [], start
        while e not in seen:
            seen.add(e)
            cyc.append(e)
            e = perm[e]
        out.append(cyc)
    return out


def _six_cycles(vertices: list[frozenset]) -> list[frozenset]:
    """All edge sets of simple 6-cycles in the graph whose vertices are edge triples."""
    ends: dict[int, list[int]] = {}
    for vi, v in enumerate(vertices):
        for e in v:
            ends.setdefault(e, []).append(vi)
    found: set[frozenset] = set()

    def walk(start: int, here: int, used: list[int], visited: list[int]) -> None:
        if len(used) == 6:
            if here == start:
                found.add(frozenset(used))
            return
        for e in vertices[here]:
            if e in used:
                continue
            a, b = ends[e]
            nxt = b if a == here else a
            if nxt == start and len(used) == 5:
                walk(start, nxt, used + [e], visited)
            elif nxt not in visited:
                walk(start, nxt, used + [e], visited + [nxt])

    for s in range(len(vertices)):
        walk(s, s, [], [s])
    return sorted(found, key=sorted)


def _cyclic_order(edges: frozenset, vertices: list[frozenset]) -> list[int]:
    """Order the edges of a face so that consecutive edges share a vertex."""
    edges_left = set(edges)
    order = [min(edges_left)]
    edges_left.remove(order[0])
    while edges_left:
        last = order[-1]
        nxt = [e for e in edges_left if any({last, e} <= v for v in vertices)]
        if not nxt:
            raise LatticeError("face edges do not form a cycle")
        order.append(min(nxt))
        edges_left.remove(order[-1])
    return order


def _even_on_all(support: set[int], groups: list[frozenset]) -> bool:
    return all(len(support & g) % 2 == 0 for g in groups)


def solve_incidence(
    rotation: Sequence[int],
    dual_loops: Sequence[Sequence[int]],
    xbar: Sequence[int],
    zbar: Sequence[int],
    xbar1: Sequence[int],
    zbar1: Sequence[int],
) -> list[HoneycombTorus]:
    """Enumerate 2x2-cell honeycomb tori compatible with the published constraints.

    Inputs are 0-based. The central plaquette is the rotation orbit carrying the
    minimal dual loops; its corners receive legs from the other orbit with an
    unknown phase, and the outer faces are chosen among all 6-cycles. Every
    candidate is filtered by loop structure and logical-operator commutation.
    """
    cycles = _cycles(rotation)
    if sorted(map(len, cycles)) != [6, 6]:
        raise LatticeError("rotation must split the 12 edges into two 6-cycles")
    center = next(c for c in cycles if dual_loops[0][0] in c)
    other = next(c for c in cycles if c is not center)
    solutions = []
    for shift in range(6):
        legs = [other[(shift + k) % 6] for k in range(6)]
        corners = [frozenset((center[k], center[(k + 1) % 6], legs[k])) for k in range(6)]
        outer = [frozenset(legs[0::2]), frozenset(legs[1::2])]
        vertices = corners + outer
        faces6 = [c for c in _six_cycles(vertices) if c != frozenset(center)]
        for trio in itertools.combinations(faces6, 3):
            faces = [frozenset(center), *trio]
            counts = np.zeros(12, dtype=int)
            for f in faces:
                counts[list(f)] += 1
            if np.any(counts != 2):
                continue
            fset = set(faces)
            if {frozenset(rotation[e] for e in f) for f in faces} != fset:
                continue
            if not all(sum(set(loop) <= f for f in faces) == 2 for loop in dual_loops):
                continue
            if not (_even_on_all(set(zbar), faces) and _even_on_all(set(zbar1), faces)):
                continue
            if not (_even_on_all(set(xbar), vertices) and _even_on_all(set(xbar1), vertices)):
                continue
            if len(set(xbar1) & set(zbar1)) % 2 != 1:
                continue
            lat = _assemble(center, faces[1:], vertices, rotation, dual_loops)
            if lat is not None:
                solutions.append(lat)
    return solutions


def _assemble(center, outer_faces, vertices, rotation, dual_loops) -> HoneycombTorus | None:
    vlist = [frozenset(v) for v in vertices]
    oriented = [list(center)]
    pending = [_cyclic_order(f, vlist) for f in outer_faces]
    directed: set[tuple[int, frozenset, frozenset]] = set()

    def arrows(cycle):
        # edge k runs from the corner it shares with edge k-1 to the one it shares with edge k+1
        out = []
        for k in range(6):
            vin = next(v for v in vlist if {cycle[k - 1], cycle[k]} <= v)
            vout = next(v for v in vlist if {cycle[k], cycle[(k + 1) % 6]} <= v)
            out.append((cycle[k], vin, vout))
        return out

    directed.update(arrows(oriented[0]))
    while pending:
        for cyc in pending:
            arr = arrows(cyc)
            if any(x in directed for x in arr):
                cyc.reverse()
                arr = arrows(cyc)
                if any(x in directed for x in arr):
                    return None  # not orientable
            elif not any((e, vo, vi) in directed for e, vi, vo in arr):
                continue
            directed.update(arr)
            oriented.append(cyc)
            pending.remove(cyc)
            break
        else:
            return None  # faces do not form a connected surface
    plaquettes = []
    for cyc in oriented:
        legs = []
        for k in range(6):
            a, b = cyc[k], cyc[(k + 1) % 6]
            v = next(v for v in vlist if {a, b} <= v)
            legs.append(next(iter(v - {a, b})))
        plaquettes.append(Plaquette(tuple(cyc), tuple(legs)))
    verts = tuple(sorted(tuple(sorted(v)) for v in vlist))
    return HoneycombTorus(12, verts, tuple(plaquettes), tuple(tuple(l) for l in dual_loops), tuple(rotation))


def _zero_based(seq: Sequence[int]) -> tuple[int, ...]:
    return tuple(e - 1 for e in seq)


def build_reference_torus() -> HoneycombTorus:
    """The 12-qubit rhombic torus, with edge ``k`` (0-based) the published edge ``k + 1``."""
    sols = solve_incidence(
        _zero_based(ONE_BASED_ROTATION),
        [_zero_based(l) for l in ONE_BASED_DUAL_LOOPS],
        xbar=_zero_based(ONE_BASED_XBAR1),
        zbar=_zero_based(ONE_BASED_ZBAR2),
        xbar1=_zero_based(ONE_BASED_XBAR1),
        zbar1=_zero_based(ONE_BASED_ZBAR1),
    )
    if len(sols) != 1:
        raise LatticeError(f"expected a unique incidence structure, found {len(sols)}")
    lat = sols[0]
    lat.check()
    return lat


# ---------------------------------------------------------------- Hamiltonians


def _check_even_overlaps(lat: HoneycombTorus) -> None:
    for v in lat.vertices:
        for p in lat.plaquettes:
            if len(set(v) & set(p.boundary)) % 2:
                raise LatticeError(f"vertex {v} meets plaquette {p.boundary} in an odd number of edges")


def build_toric_code(lat: HoneycombTorus) -> SparseOperator:
    """``H = -sum_v A_v - sum_p B_p`` with ``A_v = Z^{x3}`` and ``B_p = X^{x6}``."""
    _check_even_overlaps(lat)
    n = lat.n_edges
    terms = []
    for v in lat.vertices:
        terms.append(Term(-1.0, pauli_string({e: "Z" for e in v}, n), "involution", f"A{v}"))
    for p in lat.plaquettes:
        terms.append(Term(-1.0, pauli_string({e: "X" for e in p.boundary}, n), "involution", f"B{p.boundary}"))
    H = sum(t.coeff * t.op for t in terms)
    return SparseOperator(H, n, 2, True, tuple(terms), name="toric")


def vertex_projector(cat: CategoryData, edges: Sequence[int], n_sites: int) -> sp.csr_matrix:
    digits = basis_digits(n_sites, cat.n)
    a, b, c = (digits[:, e] for e in edges)
    return sp.diags(cat.fusion[a, b, c].astype(complex), format="csr")


def plaquette_local(cat: CategoryData) -> sp.csr_matrix:
    """``B_p`` on the 12 qudits ``boundary + legs`` of one plaquette.

    ``B_p = sum_s (d_s / D^2) B_p^s`` with the amplitude of ``g -> g'`` equal to
    ``prod_k F^{l_k g_k g_(k+1)}_{s g'_(k+1) g'_k}``; inadmissible corners give 0.
    """
    n = cat.n
    F, d, D2 = cat.F, cat.qdim, cat.total_dim**2
    cfg = basis_digits(6, n)  # rows: boundary or leg configurations
    g_in = cfg[:, None, :]
    g_out = cfg[None, :, :]
    nxt = [(k + 1) % 6 for k in range(6)]
    rows, cols, vals = [], [], []
    dim6 = n**6
    for li, legs in enumerate(cfg):
        amp = np.zeros((dim6, dim6), dtype=complex)
        for s in range(n):
            prod = np.full((dim6, dim6), d[s] / D2, dtype=complex)
            for k in range(6):
                prod = prod * F[legs[k], g_in[..., k], g_in[..., nxt[k]], s, g_out[..., nxt[k]], g_out[..., k]]
            amp += prod
        # amp[g, g'] is <g'| B |g>
        gi, go = np.nonzero(np.abs(amp) > 1e-15)
        rows.append(go * dim6 + li)
        cols.append(gi * dim6 + li)
        vals.append(amp[gi, go])
    rows, cols, vals = map(np.concatenate, (rows, cols, vals))
    return sp.csr_matrix((vals, (rows, cols)), shape=(n**12, n**12))


def build_levin_wen(cat: CategoryData, lat: HoneycombTorus) -> SparseOperator:
    """String-net Hamiltonian ``-sum_v A_v - sum_p B_p`` for a self-dual category.

    ``B_p`` is set to zero outside the subspace where its six corners are
    fusion-consistent so that all terms are Hermitian commuting projectors.
    """
    if not cat.self_dual:
        raise NotImplementedError(f"category {cat.name} has non-self-dual labels")
    if np.any(cat.N > 1):
        raise NotImplementedError("fusion multiplicities above 1 are not supported")
    n = lat.n_edges
    Av = {v: vertex_projector(cat, v, n) for v in lat.vertices}
    local = plaquette_local(cat)
    terms = [Term(-1.0, Av[v], "projector", f"A{v}") for v in lat.vertices]
    for p in lat.plaquettes:
        Bp = embed_local(local, list(p.boundary) + list(p.legs), n, cat.n)
        corners = [tuple(sorted(t)) for t in p.vertex_triples()]
        for c in corners:
            Bp = Av[c] @ Bp @ Av[c]
        if hermitian_deviation(Bp) > 1e-10:
            raise ValueError(f"plaquette term of {cat.name} is not Hermitian; check the F-symbols")
        Bp.eliminate_zeros()
        terms.append(Term(-1.0, Bp.tocsr(), "projector", f"B{p.boundary}"))
    H = sum(t.coeff * t.op for t in terms)
    return SparseOperator(H, n, cat.n, True, tuple(terms), name=f"levin_wen_{cat.name}")


# ------------------------------------------------------------ field Hamiltonians


def field_theta(theta: float) -> np.ndarray:
    """``cos(theta) sum Z + sin(theta) sum X``."""
    return np.array([np.sin(theta), 0.0, np.cos(theta)])


def _disc_root(a: float, b: float) -> float:
    r2 = a * a + b * b
    if r2 > 1 + 1e-12:
        raise ValueError(f"(a, b) = ({a}, {b}) lies outside the unit disc")
    return float(np.sqrt(max(0.0, 1 - r2)))


def field_disc(a: float, b: float, sign: int) -> np.ndarray:
    """``a sum X + b sum Y +- sqrt(1 - a^2 - b^2) sum Z``."""
    return np.array([a, b, np.sign(sign) * _disc_root(a, b)])


def field_disc_x(a: float, b: float, sign: int) -> np.ndarray:
    """``+- sqrt(1 - a^2 - b^2) sum X + b sum Y + a sum Z``."""
    return np.array([np.sign(sign) * _disc_root(a, b), b, a])


def field_vector(family: str, *params) -> np.ndarray:
    if family == "theta":
        return field_theta(*params)
    if family == "disc_pm":
        return field_disc(*params)
    if family == "disc_pm_x":
        return field_disc_x(*params)
    raise ValueError(f"unknown field family {family!r}")


def single_site_ground(nvec: np.ndarray) -> np.ndarray:
    """The ``-|n|`` eigenvector of ``n . sigma`` (``|0>`` picked for ``n = 0``)."""
    nvec = np.asarray(nvec, dtype=float)
    h = nvec[0] * PAULI["X"] + nvec[1] * PAULI["Y"] + nvec[2] * PAULI["Z"]
    if np.linalg.norm(nvec) == 0:
        return np.array([1.0, 0.0], dtype=complex)
    w, v = np.linalg.eigh(h)
    phi = v[:, 0]
    k = int(np.argmax(np.abs(phi)))
    return phi * np.exp(-1j * np.angle(phi[k]))


def build_field_hamiltonian(nvec: Sequence[float], n_sites: int) -> tuple[SparseOperator, np.ndarray]:
    """``H = sum_j n . sigma_j`` and its product ground state."""
    nvec = np.asarray(nvec, dtype=float)
    if np.linalg.norm(nvec) > 1 + 1e-12:
        raise ValueError(f"field vector {nvec} has norm above 1")
    h = nvec[0] * PAULI["X"] + nvec[1] * PAULI["Y"] + nvec[2] * PAULI["Z"]
    dim = 2**n_sites
    H = sp.csr_matrix((dim, dim), dtype=complex)
    for j in range(n_sites):
        H = H + embed_local(sp.csr_matrix(h), [j], n_sites)
    phi = single_site_ground(nvec)
    psi = np.ones(1, dtype=complex)
    for _ in range(n_sites):
        psi = np.kron(psi, phi)
    return SparseOperator(H, n_sites, 2, True, (), field=nvec, name="field"), psi


# ---------------------------------------------------------------- symmetries


@dataclass(frozen=True)
class LogicalOperators:
    xbar1: sp.csr_matrix
    zbar1: sp.csr_matrix
    xbar2: sp.csr_matrix
    zbar2: sp.csr_matrix

    @property
    def xbar(self) -> sp.csr_matrix:
        return self.xbar1

    @property
    def zbar(self) -> sp.csr_matrix:
        return self.zbar2


def logical_operators(model: str, lat: HoneycombTorus) -> LogicalOperators:
    """Minimal-weight logical strings of the toric code on the reference torus."""
    if model != "toric":
        raise ValueError(f"logical operators are defined for the toric code only, not {model!r}")
    n = lat.n_edges

    def string(edges, p):
        return pauli_string({e - 1: p for e in edges}, n)

    return LogicalOperators(
        string(ONE_BASED_XBAR1, "X"), string(ONE_BASED_ZBAR1, "Z"), string(ONE_BASED_XBAR2, "X"), string(ONE_BASED_ZBAR2, "Z")
    )


def rotation_unitary(lat: HoneycombTorus, local_dim: int = 2) -> SparseOperator:
    """Permutation unitary of the pi/3 rotation."""
    U = permutation_operator(lat.rotation_perm, lat.n_edges, local_dim)
    return SparseOperator(U, lat.n_edges, local_dim, hermitian=False, name="rotation")
