"""Infinite-system TEBD engine and its observables."""

import numpy as np
import pytest

from mpssteer import evolve as ev, manifolds as mf, mps as mm, operators as ops
from mpssteer.errors import DimensionMismatch, TruncationOverflow

POINT = (-0.7, 2.2)


def test_from_uniform_is_canonical_with_zero_self_fidelity():
    m = mf.pxp_mps(POINT)
    state = ev.from_uniform(m, chi_max=8)
    state.check()
    K = mm.cell_chain(state.site_tensors())
    I = np.einsum("asb,csb->ac", K, K.conj())
    assert np.max(np.abs(I - np.eye(I.shape[0]))) < 1e-12
    assert ev.fidelity_density(m, state) < 1e-12


def test_product_state_has_zero_entropy():
    state = ev.from_uniform(mf.pxp_mps((-np.pi / 2, np.pi)), chi_max=8)
    assert max(ev.entanglement_entropy(state)) < 1e-12


def test_entangled_state_has_positive_entropy():
    state = ev.from_uniform(mf.pxp_mps((-1.0, 1.2)), chi_max=8)
    assert max(ev.entanglement_entropy(state)) > 0.1


def test_zero_time_gate_is_the_identity():
    dens = mf.pxp_hamiltonian_density(1.0, 1.0)
    gate = ev.gate_matrix(dens, 2, 2, 0.0)
    assert np.allclose(gate, np.eye(16), atol=1e-14)
    m = mf.pxp_mps(POINT)
    state = ev.from_uniform(m, chi_max=8)
    ev.itebd_step(state, dens, 0.0)
    assert ev.fidelity_density(m, state) < 1e-10


def test_gate_rejects_terms_wider_than_the_window():
    wide = ops.LocalOperator(5, np.eye(32), offset=0)
    dens = ops.OperatorDensity([(wide, 1.0)], unit_cell=2)
    with pytest.raises(DimensionMismatch):
        ev.gate_matrix(dens, 2, 2, 0.1)


def test_fidelity_density_matches_the_mixed_transfer_spectrum():
    a = mf.pxp_mps((-0.6, 2.8))
    b = mf.pxp_mps((-0.55, 2.7))
    state = ev.from_uniform(b, chi_max=4)
    eta = mm.mixed_cell_eigval(a.tensors, b.tensors)
    assert abs(ev.fidelity_density(a, state) - (-np.log(abs(eta)))) < 1e-10


def test_static_evolution_matches_the_dense_propagator():
    dens = mf.pxp_hamiltonian_density(1.0, 1.0)
    m = mf.pxp_mps(POINT)
    t_final, dt = 0.2, 1e-4
    state = ev.from_uniform(m, chi_max=16)
    rows = ev.run_itebd(state, lambda t: dens, t_final, dt,
                        target_at=lambda t: m, record_every=500)
    f_itebd = rows[-1, 1]

    # short-time ring overlap: the light cone stays well inside l = 12
    l = 12
    psi0 = mm.finite_state_vector(m, l)
    psi0 = psi0 / np.linalg.norm(psi0)
    H = ops.realize_on_finite_chain(dens, l)
    vals, vecs = np.linalg.eigh(H)
    psit = vecs @ (np.exp(-1j * vals * t_final) * (vecs.conj().T @ psi0))
    f_dense = -np.log(abs(np.vdot(psi0, psit)) ** 2) / l
    assert abs(f_itebd - f_dense) < 2e-4 * max(1.0, abs(f_dense))
    assert rows[-1, 4] < 1e-10  # no truncation at chi = 16


def test_truncation_overflow_is_raised_at_small_chi():
    m = mf.ising_mps(mf.ISING_SEED.array())
    dens = mf.tlfim_density(1.0, 0.4, 1.0)
    state = ev.from_uniform(m, chi_max=2)
    with pytest.raises(TruncationOverflow):
        ev.run_itebd(state, lambda t: dens, 2.0, 1e-2)


def test_run_itebd_record_layout():
    dens = mf.pxp_hamiltonian_density(1.0, 1.0)
    state = ev.from_uniform(mf.pxp_mps(POINT), chi_max=16)
    rows = ev.run_itebd(state, lambda t: dens, 0.05, 1e-3, record_every=10)
    assert rows.shape[1] == 5
    assert rows[0, 0] == 0.0
    assert abs(rows[-1, 0] - 0.05) < 1e-12
    assert np.all(np.diff(rows[:, 0]) > 0)
