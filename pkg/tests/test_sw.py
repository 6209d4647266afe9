from fractions import Fraction
from math import factorial

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from topoprep.evolution import GroundSubspace, field_operator, ground_subspace
from topoprep.majorana import ChainSpec, build_tfim, parity_ground_states
from topoprep.sw import (
    MAX_ORDER,
    GapCollapseError,
    OrderBudgetError,
    SWContext,
    a_coeff,
    b_coeff,
    cluster_energies,
    decompose_into_strings,
    exact_sw,
    leading_order_check,
    scalar_deviation,
    self_energy_term,
    sw_series,
    tqo_order,
)


def _series_quotient(num, den, n):
    """First ``n`` Taylor coefficients of ``num / den`` with exact rationals."""
    out = []
    rem = list(num) + [Fraction(0)] * n
    for k in range(n):
        c = rem[k] / den[0]
        out.append(c)
        for j, d in enumerate(den):
            if k + j < len(rem):
                rem[k + j] -= c * d
    return out


def _tanh_half_coeffs(n):
    # tanh(x/2) = sinh(x/2) / cosh(x/2)
    sinh = [Fraction(1, 2**k * factorial(k)) if k % 2 else Fraction(0) for k in range(n)]
    cosh = [Fraction(0) if k % 2 else Fraction(1, 2**k * factorial(k)) for k in range(n)]
    return _series_quotient(sinh, cosh, n)


def _bernoulli_gf_coeffs(n):
    # 2x / (exp(2x) - 1) = sum_m 2^m B_m x^m / m!
    num = [Fraction(1)] + [Fraction(0)] * (n - 1)
    den = [Fraction(2 ** (k + 1), factorial(k + 1)) / 2 for k in range(n)]
    return _series_quotient(num, den, n)


@pytest.mark.parametrize("k", [1, 3, 5, 7, 9])
def test_b_coeff_matches_tanh_series(k):
    assert b_coeff(k) == pytest.approx(float(_tanh_half_coeffs(12)[k]), rel=1e-12)


def test_b1_is_one_half():
    assert b_coeff(1) == 0.5


@pytest.mark.parametrize("m", range(1, 9))
def test_a_coeff_matches_generating_function(m):
    assert a_coeff(m) == pytest.approx(float(_bernoulli_gf_coeffs(10)[m]), abs=1e-14)


def test_b_coeff_even_index_rejected():
    with pytest.raises(ValueError):
        b_coeff(2)


# ------------------------------------------------------------------ helpers


def _toy(seed, n=3, g=2):
    """Diagonal ``H0`` with a ``g``-fold ground level and a random Hermitian ``V``."""
    rng = np.random.default_rng(seed)
    dim = 2**n
    levels = np.concatenate([np.zeros(g), 1 + np.sort(rng.uniform(0, 2, dim - g))])
    H0 = sp.diags(levels.astype(complex), format="csr")
    X = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    V = sp.csr_matrix((X + X.conj().T) / 4)
    frame = np.eye(dim, dtype=complex)[:, :g]
    return H0, V, GroundSubspace(frame, 0.0, gap=float(levels[g]))


# ------------------------------------------------------------------ exact SW


def test_exact_sw_at_zero_eps_is_ground_energy(toric):
    V = field_operator([0, 0, 1], toric.n_sites)
    heff = exact_sw(toric.H_top, V, 0.0, ground=toric.ground).matrix
    assert np.abs(heff - toric.ground.energy * np.eye(4)).max() < 1e-10


def test_exact_sw_reproduces_cluster_energies_toric(toric):
    V = field_operator([0, 0, 1], toric.n_sites)
    eff = exact_sw(toric.H_top, V, 1e-3, ground=toric.ground)
    assert np.abs(eff.eigenvalues - cluster_energies(toric.H_top, V, 1e-3, 4)).max() < 1e-9


def test_exact_sw_tfim_is_parity_diagonal():
    L = 6
    H = build_tfim(ChainSpec(L))
    V = field_operator([0, 0, -0.5], L)
    sub = ground_subspace(H)
    frame = np.stack(parity_ground_states(L), axis=1)
    sub = GroundSubspace(frame, sub.energy)
    heff = exact_sw(H, V, 0.05, ground=sub).matrix
    assert abs(heff[0, 1]) < 1e-10
    assert np.sort(np.diag(heff).real) == pytest.approx(cluster_energies(H, V, 0.05, 2), abs=1e-10)


def test_gap_collapse_detected():
    H0 = sp.diags([0.0, 0.0, 1.0, 1.0], format="csr")
    V = sp.diags([0.0, 0.0, -1.0, -1.0], format="csr")
    ground = GroundSubspace(np.eye(4)[:, :2], 0.0)
    with pytest.raises(GapCollapseError):
        exact_sw(H0, V, 1.0, ground=ground)


@given(st.integers(0, 2**31))
@settings(max_examples=10)
def test_exact_sw_is_hermitian_with_cluster_spectrum(seed):
    H0, V, ground = _toy(seed)
    eff = exact_sw(H0, V, 0.05, ground=ground)
    assert np.abs(eff.matrix - eff.matrix.conj().T).max() < 1e-12
    assert eff.eigenvalues == pytest.approx(cluster_energies(H0, V, 0.05, 2), abs=1e-10)


# ------------------------------------------------------------------ series


def test_series_converges_to_exact_sw():
    H0, V, ground = _toy(7)
    n = 4
    ctx = SWContext.build(H0, V, depth=n, ground=ground)
    terms = [h.matrix for h in sw_series(ctx, n)]
    errs = []
    epss = [2e-2, 1e-2, 5e-3]
    for eps in epss:
        exact = exact_sw(H0, V, eps, ground=ground).matrix
        approx = sum(eps**q * t for q, t in enumerate(terms, start=1))
        errs.append(np.abs(exact - approx).max())
    slopes = np.diff(np.log(errs)) / np.diff(np.log(epss))
    assert np.all(np.abs(slopes - (n + 1)) < 0.3)


def test_first_order_is_projected_perturbation():
    H0, V, ground = _toy(3)
    ctx = SWContext.build(H0, V, depth=2, ground=ground)
    first, second = sw_series(ctx, 2)
    assert np.abs(first.matrix - V.toarray()[:2, :2]).max() < 1e-12
    # second order is P0 V G V P0, the self-energy term
    assert np.abs(second.matrix - self_energy_term(ctx, 2)).max() < 1e-12


def test_order_budget():
    H0, V, ground = _toy(1)
    ctx = SWContext.build(H0, V, depth=2, ground=ground)
    with pytest.raises(OrderBudgetError):
        sw_series(ctx, 3)
    with pytest.raises(OrderBudgetError):
        self_energy_term(ctx, 3)
    deep = SWContext.build(H0, V, depth=MAX_ORDER + 1, ground=ground)
    with pytest.raises(OrderBudgetError):
        sw_series(deep, MAX_ORDER + 1)


# ------------------------------------------------------- topological order


def test_tqo_order_toric_z_field(toric):
    V = field_operator([0, 0, 1], toric.n_sites)
    ctx = SWContext.build(toric.H_top, V, depth=3, ground=toric.ground)
    res = tqo_order(ctx, 3)
    assert res.order == 2
    assert res.deviation > 1e-3


def test_tqo_order_toric_x_field(toric):
    V = field_operator([1, 0, 0], toric.n_sites)
    ctx = SWContext.build(toric.H_top, V, depth=4, ground=toric.ground)
    assert tqo_order(ctx, 4).order == 4


def test_tqo_rank_one_note():
    H0 = sp.diags([0.0, 1.0], format="csr")
    V = sp.csr_matrix(np.array([[0.3, 1.0], [1.0, -0.2]]))
    ctx = SWContext.build(H0, V, depth=3)
    res = tqo_order(ctx, 3)
    assert res.order is None
    assert "rank-one" in res.degenerate_note


@pytest.mark.parametrize("field,L", [([0, 0, 1], 2), ([1, 0, 0], 4)])
def test_leading_order_is_self_energy_toric(toric, field, L):
    V = field_operator(field, toric.n_sites)
    ctx = SWContext.build(toric.H_top, V, depth=L, ground=toric.ground)
    rep = leading_order_check(ctx, L)
    assert rep.lower_orders_scalar
    assert rep.angle < 1e-6
    assert rep.fitted_constant == pytest.approx(2 * b_coeff(1), abs=1e-8)
    assert "fitted_constant" in rep.as_text()


def test_leading_order_semion_z(semion_model):
    V = field_operator([0, 0, 1], semion_model.n_sites)
    ctx = SWContext.build(semion_model.H_top, V, depth=2, ground=semion_model.ground)
    rep = leading_order_check(ctx)
    assert rep.L == 2
    assert rep.angle < 1e-6


def test_toric_z_leading_term_scales_with_eps_squared(toric):
    # the splitting of the exact effective Hamiltonian tracks eps^2 at the leading order
    V = field_operator([0, 0, 1], toric.n_sites)
    splits = [scalar_deviation(exact_sw(toric.H_top, V, e, ground=toric.ground).matrix) for e in (1e-2, 5e-3)]
    assert np.log(splits[0] / splits[1]) / np.log(2) == pytest.approx(2, abs=0.05)


# ------------------------------------------------------------ decomposition


def test_decompose_recovers_coefficients():
    A = np.diag([1.0, -1.0, 1.0, -1.0])
    B = np.diag([1.0, 1.0, -1.0, -1.0])
    H = (2 - 1j) * A + 0.25 * B + 0.5 * np.eye(4)
    dec = decompose_into_strings(H, {"a": A, "b": B})
    assert dec.coeffs["a"] == pytest.approx(2 - 1j)
    assert dec.coeffs["b"] == pytest.approx(0.25)
    assert dec.scalar == pytest.approx(0.5)
    assert dec.residual < 1e-12 and not dec.rank_deficient


def test_decompose_reports_residual_outside_span():
    A = np.diag([1.0, -1.0])
    H = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert decompose_into_strings(H, {"a": A}).residual == pytest.approx(np.sqrt(2))


def test_decompose_rank_deficient_warns_and_splits():
    A = np.diag([1.0, -1.0])
    with pytest.warns(RuntimeWarning):
        dec = decompose_into_strings(3 * A, {"a": A, "a_copy": A})
    assert dec.rank_deficient
    assert dec.coeffs["a"] == pytest.approx(1.5) and dec.coeffs["a_copy"] == pytest.approx(1.5)
