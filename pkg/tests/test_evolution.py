import numpy as np
import pytest
import scipy.linalg as la
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from topoprep.evolution import (
    GroundSubspace,
    Schedule,
    adiabaticity_error,
    evolve,
    field_operator,
    ground_subspace,
    initial_state,
    interpolated,
    propagator,
    subspace_overlap,
    trotter_step,
)
from topoprep.experiments import reference_state
from topoprep.lattice import build_field_hamiltonian, rotation_unitary
from topoprep.ops import SparseOperator, Term, pauli_string


def toy_commuting(n=4):
    """Commuting involutions and a projector on a ring of ``n`` qubits."""
    terms = [Term(-0.7, pauli_string({j: "X", (j + 1) % n: "X"}, n), "involution", f"XX{j}") for j in range(n)]
    Pz = (sp.identity(2**n, format="csr") + pauli_string({j: "Z" for j in range(n)}, n)) / 2
    terms.append(Term(0.4, Pz.tocsr(), "projector", "parity"))
    H = sum(t.coeff * t.op for t in terms)
    return SparseOperator(H, n, 2, True, tuple(terms), name="toy")


# ------------------------------------------------------------------ schedule


def test_schedule_validation():
    with pytest.raises(ValueError):
        Schedule(0.0)
    with pytest.raises(ValueError):
        Schedule(1.0, dt=2.0)
    with pytest.raises(ValueError):
        Schedule(1.0, kappa=0.0)
    with pytest.raises(ValueError):
        Schedule(1.0, profile=lambda x: 1 - x)
    with pytest.raises(ValueError):
        Schedule(1.0, dt=0.1, profile=lambda x: x if x in (0.0, 1.0) else 1 - x)


def test_schedule_grid():
    sch = Schedule(1.0, 0.25, kappa=0.5)
    assert sch.n_steps == 2
    assert sch.s_grid() == pytest.approx([0, 0.25, 0.5])
    assert Schedule(1.0, 0.1, profile=lambda x: x**2).s(5) == pytest.approx(0.25)


# ------------------------------------------------------------------ propagators


@given(st.floats(-3, 3), st.integers(0, 2**4 - 1))
def test_term_propagator_matches_expm(tau, seed):
    H = toy_commuting()
    psi = np.random.default_rng(seed).normal(size=16) + 1j * np.random.default_rng(seed + 1).normal(size=16)
    exact = la.expm(-1j * tau * H.dense()) @ psi
    assert propagator(H).mode == "terms"
    assert np.abs(propagator(H)(psi, tau) - exact).max() < 1e-10


@given(st.floats(-2, 2), st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)))
def test_field_propagator_matches_expm(tau, n):
    H = field_operator(n, 3)
    psi = np.random.default_rng(7).normal(size=8) + 0j
    exact = la.expm(-1j * tau * H.dense()) @ psi
    assert np.abs(propagator(H)(psi, tau) - exact).max() < 1e-10


def test_noncommuting_terms_use_dense_fallback():
    terms = (Term(1.0, pauli_string({0: "X"}, 2), "involution"), Term(1.0, pauli_string({0: "Z"}, 2), "involution"))
    H = SparseOperator(sum(t.op for t in terms), 2, 2, True, terms)
    psi = np.array([1, 0, 0, 0], dtype=complex)
    assert propagator(H).mode == "dense"
    assert np.abs(propagator(H)(psi, 0.3) - la.expm(-0.3j * H.dense()) @ psi).max() < 1e-12


def test_trotter_step_limits(toric):
    H_triv, psi0 = build_field_hamiltonian([0, 0, -1], 12)
    out = trotter_step(psi0, H_triv, toric.H_top, 0.0, 0.37)
    assert abs(abs(np.vdot(psi0, out)) - 1) < 1e-12
    g = toric.ground.frame[:, 0]
    out = trotter_step(g, H_triv, toric.H_top, 1.0, 0.1)
    assert np.abs(out - np.exp(12j * 0.1) * g).max() < 1e-12


# ------------------------------------------------------------------ ground spaces


def test_ground_subspace_toric(toric):
    sub = toric.ground
    assert sub.degeneracy == 4 and sub.energy == pytest.approx(-12)
    assert np.abs(sub.frame.conj().T @ sub.frame - np.eye(4)).max() < 1e-10
    H = toric.H_top.matrix
    for k in range(4):
        assert np.linalg.norm(H @ sub.frame[:, k] + 12 * sub.frame[:, k]) < 1e-8


def test_ground_subspace_field_and_interpolation(toric):
    H_triv, _ = build_field_hamiltonian([0.3, 0, -np.sqrt(0.91)], 12)
    sub = ground_subspace(H_triv)
    assert sub.degeneracy == 1 and sub.energy == pytest.approx(-12)
    mid = ground_subspace(interpolated(build_field_hamiltonian([0, 0, -1], 12)[0], toric.H_top, 0.5))
    assert mid.degeneracy == 1 and mid.gap > 1e-4


def test_initial_state_is_product_ground_state():
    H, psi = build_field_hamiltonian([0.6, 0, 0.8], 5)
    assert np.abs(initial_state(H) - psi).max() == 0


def test_adiabaticity_error_and_overlap_limits(toric):
    sub = toric.ground
    v = sub.frame @ np.array([0.5, 0.5, 0.5, 0.5])
    assert adiabaticity_error(v, sub) == pytest.approx(0, abs=1e-12)
    w = np.zeros(4096, dtype=complex)
    w[1] = 1  # one Z flip violates two vertex terms
    assert adiabaticity_error(w, sub) == pytest.approx(1)
    assert subspace_overlap(v, v) == pytest.approx(1)
    assert subspace_overlap(w, sub.frame[:, 0]) == pytest.approx(0)
    with pytest.raises(ValueError):
        adiabaticity_error(np.ones(3), sub)


# ------------------------------------------------------------------ evolve


def test_evolve_starts_in_ground_space_and_checks_checkpoints(toric):
    H_triv, _ = build_field_hamiltonian([0, 0, -1], 12)
    psi, traj = evolve(H_triv, toric.H_top, Schedule(2.0, 0.1), n_samples=3, store_at=(1.0,))
    assert traj.eps_adia[0] == pytest.approx(0, abs=1e-12)
    assert traj.times == pytest.approx([0, 1.0, 2.0])
    assert 1.0 in traj.states
    with pytest.raises(ValueError):
        evolve(H_triv, toric.H_top, Schedule(2.0, 0.1), store_at=(3.0,))
    with pytest.raises(ValueError):
        evolve(H_triv, toric.H_top, Schedule(2.0, 0.1, kappa=0.5), sample_times=(1.5,))


def test_trajectory_csv(toric, tmp_path):
    H_triv, _ = build_field_hamiltonian([0, 0, -1], 12)
    probes = {"zbar": lambda psi: np.vdot(psi, pauli_string({0: "Z", 1: "Z"}, 12) @ psi).real}
    _, traj = evolve(H_triv, toric.H_top, Schedule(1.0, 0.1), probes=probes, n_samples=2)
    traj.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "t,s,eps_adia,overlap_ref,norm_drift,zbar"
    assert len(lines) == 3


def test_z_start_conserves_vertex_terms_and_rotation(toric, lattice):
    H_triv, _ = build_field_hamiltonian([0, 0, -1], 12)
    avs = [t.op for t in toric.H_top.terms if t.label.startswith("A")]
    U = rotation_unitary(lattice).matrix
    probes = {
        "av_dev": lambda psi: max(abs(np.vdot(psi, A @ psi).real - 1) for A in avs),
        "rot": lambda psi: abs(np.vdot(psi, U @ psi)),
    }
    _, traj = evolve(H_triv, toric.H_top, Schedule(6.0, 0.1), probes=probes, n_samples=7)
    assert max(traj.probes["av_dev"]) < 1e-6
    assert min(traj.probes["rot"]) == pytest.approx(1, abs=1e-10)


@pytest.mark.slow
def test_norm_drift_over_3200_steps(fib_model):
    H_triv, _ = build_field_hamiltonian([0, 0, -1], 12)
    _, traj = evolve(H_triv, fib_model.H_top, Schedule(320.0, 0.1), instantaneous=False, final_subspace=fib_model.ground)
    assert traj.norm_drift[-1] < 1e-8


def test_semion_reference_overlap_identity(semion_model):
    # the reference is the normalized ground projection of the same run
    ref = reference_state("doubled_semion")
    H_triv, _ = build_field_hamiltonian([0, 0, -1], 12)
    psi, traj = evolve(
        H_triv, semion_model.H_top, Schedule(120.0, 0.1), reference=ref, instantaneous=False, final_subspace=semion_model.ground
    )
    assert traj.overlap_ref[-1] == pytest.approx(1 - traj.eps_adia[-1], abs=1e-10)
