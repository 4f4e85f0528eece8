"""Parent Hamiltonians: annihilation, gaps, and the generic construction."""

import numpy as np
import pytest

from mpssteer import manifolds as mf, mps as mm, operators as ops
from mpssteer import parent as par
from mpssteer.errors import DimensionMismatch, ParentUndefined


def test_closed_form_parent_annihilates_the_generating_state():
    for point in ((-0.7, 2.2), (0.9, 1.1), (-1.3, 0.4)):
        p = par.pxp_parent(*point)
        res = par.annihilation_residual(mf.pxp_mps(point), p)
        assert abs(res) < 1e-12


def test_parent_couplings_undefined_branches():
    with pytest.raises(ParentUndefined):
        par.pxp_parent_couplings(np.pi / 2, 2.2)   # cos(theta) -> 0
    with pytest.raises(ParentUndefined):
        par.pxp_parent_couplings(0.0, 2.2)         # tan(theta) -> 0, b -> 0


def test_squared_density_matches_dense_h_squared():
    point = (-0.7, 2.2)
    p = par.pxp_parent(*point)
    m = mf.pxp_mps(point)
    l = 8
    psi = mm.finite_state_vector(m, l)
    psi = psi / np.linalg.norm(psi)
    H = ops.realize_on_finite_chain(p.total_density(), l)
    dense = np.vdot(psi, H @ H @ psi).real / l
    via_density = np.real(
        mm.expectation(mm.build_transfer_objects(m), p.squared_density())) / 2
    assert abs(dense - via_density) < 1e-10


def test_parent_has_a_unique_gapped_zero_ground_state():
    # uniqueness holds in the blockaded subspace; configurations with
    # adjacent up spins are annihilated trivially by the dressed terms
    point = (-0.7, 2.2)
    p = par.pxp_parent(*point)
    l = 8
    H = ops.realize_on_finite_chain(p.total_density(), l, constrained=True)
    vals, vecs = np.linalg.eigh(H)
    assert abs(vals[0]) < 1e-10
    assert vals[1] > 1e-6
    psi = mm.finite_state_vector(mf.pxp_mps(point), l)
    psi = ops.project_to_constrained(psi, l)
    psi = psi / np.linalg.norm(psi)
    assert abs(abs(np.vdot(vecs[:, 0], psi)) - 1.0) < 1e-10


def test_parent_time_derivative_matches_finite_differences():
    theta = np.array([-0.7, 2.2])
    v = np.array([0.6, -0.4])
    dens = par.pxp_parent_time_derivative(theta, v)
    l, h = 6, 1e-6
    Hd = ops.realize_on_finite_chain(dens, l)
    Hp = ops.realize_on_finite_chain(
        par.pxp_parent(*(theta + h * v)).total_density(), l)
    Hm = ops.realize_on_finite_chain(
        par.pxp_parent(*(theta - h * v)).total_density(), l)
    assert np.max(np.abs(Hd - (Hp - Hm) / (2 * h))) < 1e-7


def test_general_parent_annihilates_the_ising_seed():
    m = mf.ising_mps(mf.ISING_SEED.array())
    for lam in (None,) + tuple(par.LAMBDA_PRESETS.values()):
        p = par.general_parent(m, 3, lam)
        assert abs(par.annihilation_residual(m, p)) < 1e-12
    assert p.free_params == (4,)  # chi^2 = 4 complement in d^3 = 8


def test_general_parent_validates_its_inputs():
    m = mf.ising_mps(mf.ISING_SEED.array())
    with pytest.raises(DimensionMismatch):
        par.general_parent(m, 2)          # chi^2 not below d^support
    with pytest.raises(DimensionMismatch):
        par.general_parent(m, 3, (1.0, 2.0))
    with pytest.raises(ValueError):
        par.general_parent(m, 3, (1.0, -1.0, 1.0, 1.0))


def test_general_parent_dense_ground_state_is_the_mps():
    m = mf.ising_mps(mf.ISING_SEED.array())
    p = par.general_parent(m, 3, par.LAMBDA_PRESETS["ascending"])
    H = ops.realize_on_finite_chain(p.total_density(), 8)
    vals, vecs = np.linalg.eigh(H)
    assert abs(vals[0]) < 1e-10
    assert vals[1] > 1e-6
    psi = mm.finite_state_vector(m, 8)
    psi = psi / np.linalg.norm(psi)
    assert abs(abs(np.vdot(vecs[:, 0], psi)) - 1.0) < 1e-10
