"""Uniform-MPS transfer machinery against dense finite-chain oracles."""

import numpy as np
import pytest

from mpssteer import manifolds as mf, mps as mm, operators as ops
from mpssteer.errors import DimensionMismatch

POINT = (-0.7, 2.2)


def _dense_expectation(m, density, l):
    psi = mm.finite_state_vector(m, l)
    psi = psi / np.linalg.norm(psi)
    H = ops.realize_on_finite_chain(density, l)
    # per unit cell
    return np.vdot(psi, H @ psi).real / (l // density.unit_cell)


def test_cell_chain_matches_kron_of_a_product_state():
    up = np.zeros((1, 2, 1), dtype=complex)
    up[0, 1, 0] = 1.0
    down = np.zeros((1, 2, 1), dtype=complex)
    down[0, 0, 0] = 1.0
    K = mm.cell_chain([up, down])
    # site 0 most significant: |up down> at index binary 10 = 2
    assert K.shape == (1, 4, 1)
    assert np.allclose(K[0, :, 0], [0, 0, 1, 0])


def test_transfer_matrix_of_normalized_state_has_unit_eigenvalue():
    m = mf.pxp_mps(POINT)
    T = mm.transfer_from_chain(mm.cell_chain(m.tensors))
    assert abs(np.max(np.abs(np.linalg.eigvals(T))) - 1.0) < 1e-12


def test_expectation_matches_dense_ring():
    m = mf.pxp_mps(POINT)
    dens = mf.pxp_hamiltonian_density(0.8, 1.3)
    val = mm.expectation(m, dens)
    dense = _dense_expectation(m, dens, 12)
    assert abs(val - dense) < 1e-8


def test_connected_two_point_matches_dense_ring():
    m = mf.pxp_mps(POINT)
    tobj = mm.build_transfer_objects(m)
    o1 = ops.OperatorDensity([(ops.pauli_site(ops.SZ, 0), 1.0)], unit_cell=2)
    o2 = ops.OperatorDensity([(ops.pauli_site(ops.SX, 1), 1.0)], unit_cell=2)
    val = mm.connected_two_point(tobj, o1, o2)
    # dense connected correlator per cell on a ring, extrapolated in 1/l
    vals = []
    ls = [12, 14, 16]
    for l in ls:
        psi = mm.finite_state_vector(m, l)
        psi = psi / np.linalg.norm(psi)
        h2psi = ops.apply_density_to_vector(o2, psi, l)
        h1psi = ops.apply_density_to_vector(o1, psi, l)
        cells = l // 2
        conn = (np.vdot(h1psi, h2psi)
                - np.vdot(psi, h1psi) * np.vdot(psi, h2psi))
        vals.append(conn.real / cells)
    fit = np.polyfit(1.0 / np.array(ls), vals, 1)
    assert abs(val.real - fit[1]) < 1e-6


def test_tangent_gram_matches_dense_derivative_overlap():
    # checks the rescaling of derivative tensors for a state whose
    # transfer eigenvalue is far from one
    man = mf.ising_manifold()
    x = mf.ISING_SEED.array()
    m = man.mps(x)
    tobj = mm.build_transfer_objects(m)
    tangents = man.tangents(x)
    val = mm.tangent_overlaps(tobj, tangents[0]).real

    vals = []
    ls = [8, 10, 12]
    for l in ls:
        psi, dpsi = mm.finite_state_vector(m, l, dtensors=tangents[0])
        n2 = np.vdot(psi, psi).real
        psin = psi / np.sqrt(n2)
        dp = dpsi / np.sqrt(n2)
        dp = dp - np.vdot(psin, dp) * psin
        vals.append(np.vdot(dp, dp).real / l)
    fit = np.polyfit(1.0 / np.array(ls), vals, 1)
    # ring wrap corrections limit the extrapolation accuracy here; the
    # tolerance still pins the overall normalization to four digits
    assert abs(val - fit[1]) < 1e-4 * max(1.0, abs(val))


def test_tangent_density_overlap_matches_dense():
    # ring finite-size corrections decay with the subleading transfer
    # eigenvalue, so the linear 1/l fit needs a short correlation length
    man = mf.pxp_manifold()
    x = np.array([-0.6, 2.8])
    m = man.mps(x)
    tobj = mm.build_transfer_objects(m)
    tang = man.tangent_along(x, np.array([0.3, -0.8]))
    dens = mf.pxp_hamiltonian_density(1.0, 1.0)
    val = mm.tangent_overlaps(tobj, tang, dens)

    ls = [12, 14, 16]
    vals = []
    for l in ls:
        psi, dpsi = mm.finite_state_vector(m, l, dtensors=tang)
        n2 = np.vdot(psi, psi).real
        psin, dp = psi / np.sqrt(n2), dpsi / np.sqrt(n2)
        dp = dp - np.vdot(psin, dp) * psin
        Hpsi = ops.apply_density_to_vector(dens, psin, l)
        Hpsi = Hpsi - np.vdot(psin, Hpsi) * psin
        vals.append(np.vdot(dp, Hpsi) / (l // 2))
    fit = np.polyfit(1.0 / np.array(ls), np.array(vals).imag, 1)
    assert abs(val.imag - fit[1]) < 1e-6
    assert abs(val.real) < 1e-10 and abs(np.mean(np.real(vals))) < 1e-10


def test_mixed_cell_eigval_is_one_for_identical_states():
    m = mf.pxp_mps(POINT)
    eta = mm.mixed_cell_eigval(m.tensors, m.tensors)
    assert abs(abs(eta) - 1.0) < 1e-12


def test_mixed_cell_eigval_below_one_for_distinct_states():
    a = mf.pxp_mps(POINT)
    b = mf.pxp_mps((-0.9, 2.6))
    assert abs(mm.mixed_cell_eigval(a.tensors, b.tensors)) < 1.0 - 1e-4


def test_operator_insertion_requires_matching_unit_cell():
    tobj = mm.build_transfer_objects(mf.pxp_mps(POINT))
    dens = ops.OperatorDensity([(ops.pauli_site(ops.SZ), 1.0)], unit_cell=1)
    with pytest.raises(DimensionMismatch):
        mm.operator_insertion(tobj, dens)
