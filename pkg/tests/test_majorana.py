import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from topoprep.majorana import (
    ChainSpec,
    build_tfim,
    critical_gap,
    exact_parity_effective,
    lowest_mode_energy,
    majorana_matrix,
    majorana_operators,
    mode_energies,
    parity_ground_states,
    parity_operator,
    quadratic_operator,
    sector_spectra,
    symmetry_protected_interpolation,
    write_report_csv,
)
from topoprep.ops import pauli_string


def test_chain_spec_validation():
    with pytest.raises(ValueError):
        ChainSpec(1)
    with pytest.raises(ValueError):
        ChainSpec(4, boundary="twisted")


def test_two_site_spectrum():
    w = np.linalg.eigvalsh(build_tfim(ChainSpec(2)).dense())
    assert w == pytest.approx([-0.5, -0.5, 0.5, 0.5])


def test_open_chain_ground_pair_and_gap():
    even, odd = sector_spectra(ChainSpec(8))
    # one ground state per parity sector; a single domain wall costs 1
    assert even[0] == pytest.approx(odd[0], abs=1e-12)
    w = np.sort(np.concatenate([even, odd]))
    assert w[0] == pytest.approx(-3.5)
    assert w[2] - w[0] == pytest.approx(1.0)


@given(st.integers(2, 5), st.floats(-2, 2))
def test_parity_commutes_with_chain(L, g):
    H = build_tfim(ChainSpec(L, g)).matrix
    F = parity_operator(L).matrix
    assert abs(H @ F - F @ H).max() < 1e-12


@given(st.integers(2, 5))
def test_majorana_algebra(L):
    cs = majorana_operators(L)
    eye = sp.identity(2**L, format="csr")
    for p in range(2 * L):
        for q in range(2 * L):
            anti = cs[p] @ cs[q] + cs[q] @ cs[p]
            expected = 2 * eye if p == q else 0 * eye
            assert abs(anti - expected).max() < 1e-12
    for j in range(L):
        assert abs(-1j * cs[2 * j] @ cs[2 * j + 1] - pauli_string({j: "Z"}, L)).max() < 1e-12


@given(st.integers(2, 5), st.floats(-1.5, 1.5))
def test_majorana_matrix_rebuilds_chain(L, g):
    spec = ChainSpec(L, g)
    H = quadratic_operator(majorana_matrix(spec), norm_bound=None).matrix
    assert abs(H - build_tfim(spec).matrix).max() < 1e-12


@given(st.integers(2, 6), st.floats(0, 1.5))
def test_free_fermion_ground_energy_matches_diagonalization(L, g):
    spec = ChainSpec(L, g)
    w = np.linalg.eigvalsh(build_tfim(spec).dense())
    e = mode_energies(spec)
    assert w[0] == pytest.approx(-e.sum() / 2, abs=1e-10)
    assert w[1] - w[0] == pytest.approx(e[0], abs=1e-10)


@pytest.mark.parametrize("L", [3, 4, 6, 8])
def test_lowest_mode_energy_closed_form(L):
    spec = ChainSpec(L, 1.0)
    w = np.linalg.eigvalsh(build_tfim(spec).dense())
    assert lowest_mode_energy(L) == pytest.approx(mode_energies(spec)[0], abs=1e-12)
    assert lowest_mode_energy(L) == pytest.approx(w[1] - w[0], abs=1e-10)


def test_quoted_critical_gap_value():
    assert critical_gap(4) == pytest.approx(2 * np.sin(np.pi / 9))
    with pytest.raises(ValueError):
        critical_gap(1)


def test_quadratic_operator_validation():
    with pytest.raises(ValueError):
        quadratic_operator(np.eye(4))
    with pytest.raises(ValueError):
        quadratic_operator(np.zeros((3, 3)))
    big = np.zeros((4, 4))
    big[0, 1], big[1, 0] = 2.0, -2.0
    with pytest.raises(ValueError):
        quadratic_operator(big)
    far = np.zeros((4, 4))
    far[0, 3], far[3, 0] = 0.5, -0.5
    with pytest.raises(ValueError):
        quadratic_operator(far, range_r=2)
    assert quadratic_operator(far, range_r=3).matrix.shape == (4, 4)


def test_parity_ground_states_sectors():
    g0, g1 = parity_ground_states(6)
    F = parity_operator(6)
    assert F.expectation(g0).real == pytest.approx(1.0)
    assert F.expectation(g1).real == pytest.approx(-1.0)


# ---------------------------------------------------------------- preparation


def test_interpolation_slow_keeps_parity_and_reaches_ground():
    rep = symmetry_protected_interpolation(ChainSpec(6, 1.0), T=80)
    assert rep.parity_drift < 1e-8
    assert rep.target_sector == "even"
    assert rep.final_overlap > 0.99


def test_interpolation_fast_is_diabatic_but_parity_exact():
    rep = symmetry_protected_interpolation(ChainSpec(6, 1.0), T=1)
    assert rep.parity_drift < 1e-8
    assert rep.final_overlap < 0.5


def test_interpolation_odd_sector():
    rep = symmetry_protected_interpolation(ChainSpec(5, 1.0), T=40, field_sign=1)
    assert rep.initial_parity == pytest.approx(-1.0)
    assert rep.target_sector == "odd"


def test_interpolation_rejects_zero_field():
    with pytest.raises(ValueError):
        symmetry_protected_interpolation(ChainSpec(4, 0.0), T=1)


# ------------------------------------------------------- exact effective form


@pytest.mark.parametrize("L", [4, 6])
def test_parity_effective_is_diagonal_and_matches_cluster(L):
    rep = exact_parity_effective(ChainSpec(L), 0.05)
    assert rep.parity_residual < 1e-10
    assert 2 * abs(rep.beta) == pytest.approx(rep.delta, rel=1e-6)
    alpha, beta = rep.gap_consistent_form
    assert alpha == pytest.approx(rep.alpha, abs=1e-12)
    assert beta == pytest.approx(rep.beta, rel=1e-6)
    # the printed constant is half the cluster mean, off by about E0/2
    assert rep.printed_form[0] == pytest.approx(rep.E0 / 2)
    assert abs(rep.printed_form[0] - rep.alpha) > 0.5


def test_splitting_decays_exponentially_in_length():
    eps = 0.05
    deltas = [exact_parity_effective(ChainSpec(L), eps).delta for L in (4, 6, 8)]
    # the splitting first appears at order L, so two extra sites cost eps^2
    ratios = np.array(deltas[:-1]) / np.array(deltas[1:])
    assert ratios == pytest.approx([eps**-2] * 2, rel=0.02)


def test_splitting_scales_as_eps_to_the_length():
    L = 4
    d1 = exact_parity_effective(ChainSpec(L), 0.02).delta
    d2 = exact_parity_effective(ChainSpec(L), 0.01).delta
    assert d1 / d2 == pytest.approx(2**L, rel=0.01)


def test_report_csv(tmp_path):
    reps = [exact_parity_effective(ChainSpec(L), 0.05) for L in (4, 6)]
    path = tmp_path / "parity.csv"
    write_report_csv(reps, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "L,g,eps,E0,E1,Delta,beta_fit,parity_residual"
    assert len(lines) == 3 and lines[1].startswith("4,")
