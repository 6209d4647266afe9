"""Modular tensor category data and ground-space (flux basis) algebra on the torus.

Label index 0 is always the vacuum. Fusion is stored two ways:

* ``fusion[a, b, c]`` is the symmetric vertex tensor, 1 when ``a``, ``b``, ``c``
  can fuse to the vacuum;
* ``N[a, b, c]`` is the multiplicity ``N^c_{ab} = fusion[a, b, dual[c]]``.

The F-symbol array uses the index order of the written symbol,
``F[a, b, e, c, d, f] = F^{abe}_{cdf}``, which equals the basis-change matrix
element ``[F^{abc}_d]_{ef}`` (``a x b -> e``, ``e x c -> d``, ``b x c -> f``,
``a x f -> d``).
"""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

DEFAULT_TOL = 1e-10
SHIPPED = ("toric_code", "semion", "fibonacci", "doubled_semion", "doubled_fibonacci")


class CategoryShapeError(ValueError):
    """Raised when category tensors have inconsistent shapes or index ranges."""


class SingularColumnError(ValueError):
    """Raised when the Verlinde formula would divide by a vanishing ``S_{1a}``."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CategoryData:
    """Algebraic payload of a multiplicity-free anyon model."""

    name: str
    labels: tuple[str, ...]
    dual: tuple[int, ...]
    qdim: np.ndarray
    fusion: np.ndarray
    F: np.ndarray
    S: np.ndarray
    T: np.ndarray
    frobenius_schur: np.ndarray
    layers: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        for name in ("qdim", "fusion", "F", "S", "T", "frobenius_schur"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def total_dim(self) -> float:
        return float(np.sqrt(np.sum(self.qdim**2)))

    @property
    def N(self) -> np.ndarray:
        """Fusion multiplicities ``N[a, b, c] = N^c_{ab}``."""
        return self.fusion[:, :, list(self.dual)]

    @property
    def self_dual(self) -> bool:
        return all(i == d for i, d in enumerate(self.dual))

    def index(self, label: int | str | Sequence[str]) -> int:
        """Resolve a label given as index, name, or tuple of layer names."""
        if isinstance(label, (int, np.integer)):
            if not 0 <= int(label) < self.n:
                raise KeyError(f"label index {label} out of range for {self.name}")
            return int(label)
        if isinstance(label, str):
            key = label.replace(" ", "")
            if key in self.labels:
                return self.labels.index(key)
            raise KeyError(f"unknown label {label!r} for {self.name}")
        return self.index("(" + ",".join(label) + ")")


@dataclass(frozen=True)
class FluxMatrix:
    """Operator on the torus ground space written in a flux basis of labels."""

    basis_tag: str
    entries: np.ndarray

    def __post_init__(self) -> None:
        m = _frozen(np.asarray(self.entries, dtype=complex))
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise CategoryShapeError("flux matrix must be square")
        object.__setattr__(self, "entries", m)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


# ---------------------------------------------------------------- file format


def _cplx(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


def category_from_dict(d: dict) -> CategoryData:
    """Build a single-layer category from its file representation."""
    labels = tuple(d["labels"])
    n = len(labels)
    fusion = np.zeros((n, n, n), dtype=int)
    for a, b, c in d["fusion"]:
        fusion[a, b, c] = 1
    F = np.zeros((n,) * 6, dtype=complex)
    for entry in d["F"]:
        if len(entry) != 7:
            raise CategoryShapeError(f"F entry needs 6 indices and a value: {entry}")
        F[tuple(entry[:6])] = _cplx(entry[6])
    S = np.array([[_cplx(x) for x in row] for row in d["S"]])
    T = np.diag([_cplx(x) for x in d["T"]])
    qdim = np.asarray(d["qdim"], dtype=float)
    fs = np.asarray(d.get("frobenius_schur", [1] * n), dtype=float)
    dual = tuple(d.get("dual", range(n)))
    if S.shape != (n, n) or T.shape != (n, n) or qdim.shape != (n,) or len(dual) != n:
        raise CategoryShapeError(f"inconsistent tensor shapes in category {d.get('name')}")
    return CategoryData(d["name"], labels, dual, qdim, fusion, F, S, T, fs)


def category_to_dict(cat: CategoryData) -> dict:
    """Inverse of :func:`category_from_dict` (doubles are written flattened)."""
    fusion = [list(map(int, t)) for t in zip(*np.nonzero(cat.fusion))]
    F = [[*map(int, idx), [cat.F[idx].real, cat.F[idx].imag]] for idx in zip(*np.nonzero(cat.F))]
    return {
        "name": cat.name,
        "format_version": 1,
        "labels": list(cat.labels),
        "dual": list(cat.dual),
        "qdim": cat.qdim.tolist(),
        "frobenius_schur": cat.frobenius_schur.tolist(),
        "fusion": fusion,
        "F": F,
        "S": [[[z.real, z.imag] for z in row] for row in cat.S],
        "T": [[z.real, z.imag] for z in np.diag(cat.T)],
    }


def double(cat: CategoryData, name: str | None = None) -> CategoryData:
    """Drinfeld-double style product ``C x conj(C)`` with labels ``(a, b)``."""
    n = cat.n
    labels = tuple(f"({a},{b})" for a in cat.labels for b in cat.labels)
    dual = tuple(cat.dual[a] * n + cat.dual[b] for a in range(n) for b in range(n))
    fusion = np.einsum("ace,bdf->abcdef", cat.fusion, cat.fusion).reshape(n * n, n * n, n * n)
    F = np.einsum("abcdef,ghijkl->agbhcidjekfl", cat.F, cat.F.conj()).reshape((n * n,) * 6)
    return CategoryData(
        name or f"doubled_{cat.name}",
        labels,
        dual,
        np.kron(cat.qdim, cat.qdim),
        fusion,
        F,
        np.kron(cat.S, cat.S.conj()),
        np.kron(cat.T, cat.T.conj()),
        np.kron(cat.frobenius_schur, cat.frobenius_schur),
        layers=(cat.name, cat.name),
    )


def _read_json(name_or_path: str | Path) -> dict:
    path = Path(name_or_path)
    if path.suffix == ".json" and path.exists():
        return json.loads(path.read_text())
    res = resources.files("topoprep").joinpath("data", f"{name_or_path}.json")
    if not res.is_file():
        raise FileNotFoundError(f"no shipped category named {name_or_path!r}")
    return json.loads(res.read_text())


def load_category(name_or_path: str | Path, tol: float = DEFAULT_TOL) -> CategoryData:
    """Load a shipped category by name or a category file by path.

    Doubled categories are generated from their base layer and compared with the
    printed S and T matrices stored in the file.
    """
    d = _read_json(name_or_path)
    if "double_of" not in d:
        return category_from_dict(d)
    cat = double(load_category(d["double_of"], tol), name=d["name"])
    if tuple(d["labels"]) != cat.labels:
        raise CategoryShapeError(f"label order {d['labels']} differs from generated {cat.labels}")
    S_printed = np.array([[_cplx(x) for x in row] for row in d["printed_S"]])
    T_printed = np.diag([_cplx(x) for x in d["printed_T"]])
    if np.abs(S_printed - cat.S).max() > tol or np.abs(T_printed - cat.T).max() > tol:
        raise ValueError(f"generated S/T for {d['name']} disagree with the printed matrices")
    return cat


# ----------------------------------------------------------------- validation


@dataclass
class ValidationReport:
    """Pass/fail per named invariant plus the worst deviation seen for each."""

    category: str
    passed: dict[str, bool] = field(default_factory=dict)
    deviation: dict[str, float] = field(default_factory=dict)

    def record(self, name: str, dev: float, tol: float) -> None:
        self.passed[name] = bool(dev <= tol)
        self.deviation[name] = float(dev)

    @property
    def ok(self) -> bool:
        return all(self.passed.values())

    @property
    def failures(self) -> list[str]:
        return [k for k, v in self.passed.items() if not v]


def _check_shapes(cat: CategoryData) -> None:
    n = cat.n
    expected = {
        "qdim": (n,),
        "fusion": (n, n, n),
        "F": (n,) * 6,
        "S": (n, n),
        "T": (n, n),
        "frobenius_schur": (n,),
    }
    for name, shape in expected.items():
        if getattr(cat, name).shape != shape:
            raise CategoryShapeError(f"{name} has shape {getattr(cat, name).shape}, expected {shape}")
    if sorted(cat.dual) != list(range(n)) or any(cat.dual[cat.dual[a]] != a for a in range(n)):
        raise CategoryShapeError("dual is not an involution on labels")


def validate_category(cat: CategoryData, tol: float = DEFAULT_TOL) -> ValidationReport:
    """Check the defining identities of the category data.

    Shape problems raise :class:`CategoryShapeError`; identity violations are
    reported by name in the returned report.
    """
    _check_shapes(cat)
    n, d, dual = cat.n, cat.qdim, list(cat.dual)
    delta, N, S, F = cat.fusion, cat.N, cat.S, cat.F
    rep = ValidationReport(cat.name)

    sym = max(np.abs(delta - delta.transpose(p)).max() for p in itertools.permutations(range(3)))
    rep.record("fusion symmetric", sym, 0)

    dbar = delta[:, :, dual]  # dbar[i, j, m] = delta_{i j mbar}
    lhs = np.einsum("ijm,mkl->ijkl", dbar, dbar)
    rhs = np.einsum("jkm,iml->ijkl", dbar, dbar)
    rep.record("fusion associative", np.abs(lhs - rhs).max(), 0)

    vac = np.abs(delta[:, dual, 0] - np.eye(n, dtype=int)).max()
    rep.record("vacuum line", vac, 0)

    rep.record("S unitary", np.abs(S @ S.conj().T - np.eye(n)).max(), tol)
    rep.record("S symmetric", np.abs(S - S.T).max(), tol)
    rep.record("S conjugation", np.abs(S[dual, :] - S.conj()).max(), tol)

    norm_dev = 0.0
    for i, j, k in itertools.product(range(n), repeat=3):
        expect = np.sqrt(d[k] / (d[i] * d[j])) * N[i, k, j] * _indicator_sign(cat, i, j, k)
        norm_dev = max(norm_dev, abs(F[i, dual[i], 0, dual[j], j, k] - expect))
    rep.record("F normalization", norm_dev, tol)

    unit_dev = 0.0
    for a, b, c, dd in itertools.product(range(n), repeat=4):
        es = [e for e in range(n) if N[a, b, e] and N[e, c, dd]]
        fs = [f for f in range(n) if N[b, c, f] and N[a, f, dd]]
        block = F[a, b, :, c, dd, :]
        mask = np.zeros((n, n), dtype=bool)
        mask[np.ix_(es, fs)] = True
        unit_dev = max(unit_dev, np.abs(block[~mask]).max(initial=0.0))
        if len(es) != len(fs):
            unit_dev = max(unit_dev, 1.0)
            continue
        if es:
            m = block[np.ix_(es, fs)]
            unit_dev = max(unit_dev, np.abs(m @ m.conj().T - np.eye(len(es))).max())
    rep.record("F unitary", unit_dev, tol)

    rep.record("T unimodular", np.abs(np.abs(np.diag(cat.T)) - 1).max(), tol)
    rep.record("T diagonal", np.abs(cat.T - np.diag(np.diag(cat.T))).max(), tol)
    try:
        Nv, _ = verlinde_fusion(S)
        rep.record("Verlinde", np.abs(Nv - N).max(), 0)
    except SingularColumnError:
        rep.record("Verlinde", np.inf, 0)
    return rep


def _indicator_sign(cat: CategoryData, i: int, j: int, k: int) -> float:
    """Frobenius-Schur sign carried by ``F^{i ibar 1}_{jbar j k}``.

    The sign appears only for ``j = i`` and ``k = 1``; in a product category it is
    collected layer by layer.
    """
    if not cat.layers:
        return float(cat.frobenius_schur[i]) if (j == i and k == 0) else 1.0
    m = int(round(np.sqrt(cat.n)))
    sign = 1.0
    for shift in (m, 1):
        il, jl, kl = (i // shift) % m, (j // shift) % m, (k // shift) % m
        if jl == il and kl == 0:
            sign *= float(cat.frobenius_schur[il * m])
    return sign


# ------------------------------------------------------------ flux-basis algebra


def verlinde_fusion(S: np.ndarray, tol: float = 1e-12) -> tuple[np.ndarray, float]:
    """Fusion multiplicities from the S-matrix.

    Returns ``N`` with ``N[b, c, d] = N^d_{bc}`` rounded to integers, together
    with the largest distance of the unrounded values from integers.
    """
    S = np.asarray(S, dtype=complex)
    s1 = S[0]
    if np.any(np.abs(s1) < tol):
        raise SingularColumnError(f"|S_1a| below {tol} in column {int(np.argmin(np.abs(s1)))}")
    raw = np.einsum("ba,ca,da->bcd", S, S, S.conj() / s1)
    if np.abs(raw.imag).max() > 1e-8:
        raise ValueError("Verlinde sum is not real; S is not a modular S-matrix")
    rounded = np.rint(raw.real)
    return rounded.astype(int), float(np.abs(raw - rounded).max())


def flux_string_operator(a: int | str, cat: CategoryData) -> FluxMatrix:
    """String operator ``F_a`` in the flux basis: ``(F_a)_{cb} = N^c_{ab}``."""
    ia = cat.index(a)
    return FluxMatrix("flux", cat.N[ia].T.astype(complex))


def dual_basis(cat: CategoryData) -> np.ndarray:
    """Columns are the dual-basis vectors ``|a'> = sum_b conj(S_ba) |b>``."""
    return cat.S.conj().copy()


def flux_idempotents(cat: CategoryData) -> list[FluxMatrix]:
    """Projectors ``P_a = S_1a sum_b conj(S_ba) F_b`` onto the dual-basis states."""
    Fs = [flux_string_operator(b, cat).entries for b in range(cat.n)]
    out = []
    for a in range(cat.n):
        P = cat.S[0, a] * sum(np.conj(cat.S[b, a]) * Fs[b] for b in range(cat.n))
        out.append(FluxMatrix("flux", P))
    return out


_TOKEN = re.compile(r"([st])\s*(?:\^?\s*(-?\d+)|([⁻¹²³⁴⁵⁶]+))?")
_SUPERSCRIPT = str.maketrans("⁻¹²³⁴⁵⁶", "-123456")


def _parse_word(word: str | Iterable[str]) -> list[tuple[str, int]]:
    if not isinstance(word, str):
        word = " ".join(word)
    text = word.replace(" ", "")
    out: list[tuple[str, int]] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"cannot parse modular word {word!r} at position {pos}")
        power = m.group(2) or (m.group(3) or "").translate(_SUPERSCRIPT) or "1"
        if power == "-":
            power = "-1"
        out.append((m.group(1), int(power)))
        pos = m.end()
    if not out:
        raise ValueError("modular word must be nonempty")
    return out


def modular_word_unitary(word: str | Iterable[str], cat: CategoryData) -> FluxMatrix:
    """Matrix of a word in the torus mapping-class generators.

    ``word`` is read left to right, e.g. ``"t s^3 t s"`` gives ``T S^3 T S``;
    negative powers such as ``s^-1`` or ``t⁻¹`` are accepted.
    """
    gens = {"s": cat.S, "t": cat.T}
    U = np.eye(cat.n, dtype=complex)
    for g, p in _parse_word(word):
        U = U @ np.linalg.matrix_power(gens[g], p)
    return FluxMatrix("flux", U)


def rhombic_rotation(cat: CategoryData) -> np.ndarray:
    """The pi/3 rotation of a rhombic torus, ``U = T S^3 T S``."""
    return modular_word_unitary("t s3 t s", cat).entries


def symmetrized_loop_sum(a: int | str, geometry: str, cat: CategoryData) -> FluxMatrix:
    """Sum of ``F_a`` over the orbit of minimal loops under the lattice rotation."""
    Fa = flux_string_operator(a, cat).entries
    if geometry == "square":
        U, order = cat.S, 4
    elif geometry == "rhombic":
        U, order = rhombic_rotation(cat), 6
    else:
        raise ValueError(f"unknown geometry {geometry!r}")
    Uinv = np.linalg.inv(U)
    total = np.zeros_like(Fa)
    Uj, Ujinv = np.eye(cat.n, dtype=complex), np.eye(cat.n, dtype=complex)
    for _ in range(order):
        total += Uj @ Fa @ Ujinv
        Uj, Ujinv = Uj @ U, Uinv @ Ujinv
    return FluxMatrix("flux", total)
