"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

The lines are also collected into the terminal summary. Criteria that the
implementation cannot meet are marked ``xfail(strict=True)`` with the
criterion asserted unchanged.
"""

import numpy as np
import pytest

from topoprep import experiments as ex
from topoprep.anyon_chain import chain_effective
from topoprep.anyons import load_category, modular_word_unitary
from topoprep.evolution import GroundSubspace, Schedule, evolve, field_operator, ground_subspace
from topoprep.lattice import build_field_hamiltonian, rotation_unitary
from topoprep.majorana import ChainSpec, build_tfim, critical_gap, parity_ground_states, sector_spectra
from topoprep.probes import analytic_effective_ground_state, flux_tomography
from topoprep.sw import SWContext, b_coeff, cluster_energies, exact_sw, leading_order_check

from conftest import record_criterion

LOOP = (0, 1)
CATEGORY = {"toric": "toric_code", "doubled_semion": "doubled_semion", "doubled_fibonacci": "doubled_fibonacci"}


def _fib_run(sign, dt):
    setup = ex.model_setup("doubled_fibonacci")
    H_triv, psi0 = build_field_hamiltonian([0.0, 0.0, float(sign)], setup.n_sites)
    _, traj = evolve(H_triv, setup.H_top, Schedule(320.0, dt), psi0=psi0, sample_times=[280.0, 320.0])
    return dict(zip(traj.times, traj.eps_adia))


def test_criterion_1_flux_table(fib_model, fib_reference):
    eff = analytic_effective_ground_state(load_category("doubled_fibonacci")).probabilities
    eff_row = (eff[0], eff[3], eff[1] + eff[2])
    tom = flux_tomography("doubled_fibonacci", LOOP, fib_model.ground, psi=fib_reference).expectations
    ref_row = (tom["(1,1)"], tom["(tau,tau)"], tom["(1,tau)+(tau,1)"])
    eff_dev = np.abs(np.subtract(eff_row, (0.5125, 0.4804, 0.0072))).max()
    ref_dev = np.abs(np.subtract(ref_row, (0.5096, 0.4838, 0.0066))).max()
    ok = eff_dev < 0.005 and ref_dev < 0.01
    record_criterion(
        "criterion 1 flux table",
        ok,
        f"effective={np.round(eff_row, 4).tolist()} (dev {eff_dev:.1e}) reference={np.round(ref_row, 4).tolist()} (dev {ref_dev:.1e})",
    )
    assert ok


def test_criterion_2_analytic_state():
    state = analytic_effective_ground_state(load_category("doubled_fibonacci")).state
    # positional comparison; the middle kets are listed in the opposite label order
    printed = np.array([0.715, 0.019 - 0.057j, 0.019 + 0.057j, 0.693])
    phase = np.vdot(state, printed)
    aligned = state * phase / abs(phase)
    dev = np.abs(aligned - printed).max()
    ok = dev < 0.01
    record_criterion("criterion 2 analytic state", ok, f"amplitudes={np.round(state, 4).tolist()} max dev {dev:.1e}")
    assert ok


def test_criterion_3_perturbed_overlap(fib_reference):
    cfg = ex.ExperimentConfig("doubled_fibonacci", "disc_pm", grid=3, sign=-1, eps=1e-3)
    rows = {r.coords: r for r in ex.perturbed_ground_comparison(cfg, reference=fib_reference)}
    overlap = rows[(0.0, 0.0)].overlap
    ok = abs(overlap - 0.9976) <= 0.003
    record_criterion("criterion 3 perturbed overlap", ok, f"|<psi_pert|psi_R>|^2={overlap:.5f}")
    assert ok


@pytest.fixture(scope="module")
def fib_runs():
    return {(sign, dt): _fib_run(sign, dt) for sign in (1, -1) for dt in (0.1, 0.01)}


def test_criterion_4_fibonacci_adiabaticity_minus_z(fib_runs):
    coarse, fine = fib_runs[-1, 0.1], fib_runs[-1, 0.01]
    final, instant = coarse[320.0], coarse[280.0]
    dt_change = abs(coarse[320.0] - fine[320.0])
    ok = 3e-4 <= final <= 3e-3 and instant >= 1e-2 and dt_change < 1e-3
    record_criterion(
        "criterion 4 (-sum Z start)",
        ok,
        f"eps(320)={final:.3e} eps_instant(280)={instant:.3e} dt change={dt_change:.1e}",
    )
    assert ok


@pytest.mark.xfail(strict=True, reason="+sum Z start reaches 9e-6 at T=320, below the stated window")
def test_criterion_4_fibonacci_adiabaticity_plus_z(fib_runs):
    coarse, fine = fib_runs[1, 0.1], fib_runs[1, 0.01]
    final, instant = coarse[320.0], coarse[280.0]
    dt_change = abs(coarse[320.0] - fine[320.0])
    ok = 3e-4 <= final <= 3e-3 and instant >= 1e-2 and dt_change < 1e-3
    record_criterion(
        "criterion 4 (+sum Z start)",
        ok,
        f"eps(320)={final:.3e} eps_instant(280)={instant:.3e} dt change={dt_change:.1e} (expected failure)",
    )
    assert ok


def test_criterion_5_toric_obstruction(toric):
    H_triv, psi0 = build_field_hamiltonian([0.0, 0.0, 1.0], toric.n_sites)
    avs = [t.op for t in toric.H_top.terms if t.label.startswith("A")]
    probes = {"av_dev": lambda psi: max(abs(np.vdot(psi, A @ psi).real + 1) for A in avs)}
    psi, traj = evolve(H_triv, toric.H_top, Schedule(120.0, 0.1), probes=probes, psi0=psi0, n_samples=16)
    weight = toric.ground.weight(psi)
    av_dev = max(traj.probes["av_dev"])
    ok = weight < 1e-6 and abs(traj.eps_adia[-1] - 1) < 1e-6 and av_dev < 1e-6
    record_criterion(
        "criterion 5 toric obstruction", ok, f"ground weight={weight:.1e} eps_adia={traj.eps_adia[-1]:.6f} max |<A_v>+1|={av_dev:.1e}"
    )
    assert ok


@pytest.mark.xfail(strict=True, reason="the quoted closed form matches no gap of the open critical chain")
def test_criterion_6_majorana_critical_gap():
    worst = 0.0
    for L in range(2, 11):
        even, _ = sector_spectra(ChainSpec(L, 1.0))
        worst = max(worst, abs((even[1] - even[0]) - critical_gap(L)))
    ok = worst < 1e-8
    record_criterion("criterion 6 Majorana critical gap", ok, f"max |gap - 2 sin(pi/(2L+1))|={worst:.3e} (expected failure)")
    assert ok


def test_criterion_7_symmetry_dimension():
    lines, ok = [], True
    for model, cat_name in CATEGORY.items():
        setup = ex.model_setup(model)
        W = modular_word_unitary("t s3 t s", load_category(cat_name)).entries
        w_mod = np.linalg.eigvals(W)
        dim = int(np.sum(np.abs(w_mod - 1) < 1e-8))
        frame = setup.ground.frame
        M = frame.conj().T @ (rotation_unitary(setup.lattice).matrix @ frame)
        w_lat = np.linalg.eigvals(M)
        # multiset distance by optimal matching of four points
        dev = max(np.abs(w_lat[:, None] - w_mod[None, :]).min(axis=1).max(), np.abs(w_mod[:, None] - w_lat[None, :]).min(axis=1).max())
        same_mult = np.array_equal(np.sort_complex(np.round(w_lat, 8)), np.sort_complex(np.round(w_mod, 8)))
        ok &= dim == 2 and dev < 1e-8 and same_mult
        lines.append(f"{model}: dim={dim} dev={dev:.1e}")
    record_criterion("criterion 7 symmetry dimension", ok, "; ".join(lines))
    assert ok


def test_criterion_8_leading_order(toric):
    lines, ok = [], True
    for axis, field, L in (("Z", [0, 0, 1], 2), ("X", [1, 0, 0], 4)):
        V = field_operator(field, toric.n_sites)
        ctx = SWContext.build(toric.H_top, V, depth=L, ground=toric.ground)
        rep = leading_order_check(ctx, L)
        ok &= rep.lower_orders_scalar and rep.angle < 1e-6
        lines.append(f"sum {axis} L={L} angle={rep.angle:.1e} fitted={rep.fitted_constant:.10f}")
    lines.append(f"2*b1={2 * b_coeff(1)} printed 1/3")
    record_criterion("criterion 8 leading-order property", ok, "; ".join(lines))
    assert ok


def test_criterion_9_chain_property():
    fib = load_category("fibonacci")
    lines, ok = [], True
    gamma, tau = 0.3, 0.2
    for L in (3, 4):
        base = chain_effective(fib, L, [0.0, 1.0], {1: gamma}, {1: tau})
        ok &= base.residual < 1e-8
        worst = 0.0
        for lam in (0.5, 2.0, 3.0):
            scaled = chain_effective(fib, L, [0.0, 1.0], {1: lam * gamma}, {1: lam * tau})
            ok &= scaled.residual < 1e-8
            worst = max(worst, abs(scaled.coeffs[1] / (lam**L * base.coeffs[1]) - 1))
        ok &= worst < 1e-8
        lines.append(f"L={L} f_L={base.coeffs[1].real:.6g} residual={base.residual:.1e} scaling dev={worst:.1e}")
    record_criterion("criterion 9 chain property", ok, "; ".join(lines))
    assert ok


def test_criterion_10_exact_sw_oracle():
    eps = 1e-3
    lines, ok = [], True
    for model in ex.LATTICE_MODELS:
        setup = ex.model_setup(model)
        V = field_operator([0.0, 0.0, 1.0], setup.n_sites)
        heff = exact_sw(setup.H_top, V, eps, ground=setup.ground)
        dev = np.abs(heff.eigenvalues - cluster_energies(setup.H_top, V, eps, setup.ground.degeneracy)).max()
        ok &= dev < 1e-8
        lines.append(f"{model} dev={dev:.1e}")
    L = 6
    H = build_tfim(ChainSpec(L))
    V = field_operator([0.0, 0.0, -0.5], L)
    sub = ground_subspace(H)
    heff = exact_sw(H, V, eps, ground=GroundSubspace(np.stack(parity_ground_states(L), axis=1), sub.energy))
    dev = np.abs(heff.eigenvalues - cluster_energies(H, V, eps, 2)).max()
    ok &= dev < 1e-8
    lines.append(f"majorana dev={dev:.1e}")
    record_criterion("criterion 10 exact SW oracle", ok, "; ".join(lines))
    assert ok
