"""Parametrized MPS families, trajectories, and the variational flow."""

import numpy as np
import pytest

from mpssteer import manifolds as mf, mps as mm, operators as ops
from mpssteer.errors import SingularPoint


def test_pxp_singular_only_when_both_angles_hit_half_pi():
    man = mf.pxp_manifold()
    with pytest.raises(SingularPoint):
        man.validate((np.pi / 2, np.pi / 2))
    with pytest.raises(SingularPoint):
        man.validate((-np.pi / 2, 3 * np.pi / 2))
    man.validate((np.pi / 2, 2.0))  # one angle alone is fine
    man.validate((-0.7, np.pi / 2))


def test_pxp_mps_is_the_period_two_product_state_at_the_endpoints():
    # theta = (-pi/2, pi): every second site up, the rest down
    m = mf.pxp_mps((-np.pi / 2, np.pi))
    psi = mm.finite_state_vector(m, 6)
    psi = psi / np.linalg.norm(psi)
    k = int(np.argmax(np.abs(psi)))
    assert abs(abs(psi[k]) - 1.0) < 1e-12
    assert k in (0b101010, 0b010101)


def test_manifold_accepts_points_and_arrays():
    man = mf.pxp_manifold()
    p = mf.ManifoldPoint((-0.7, 2.2))
    a = np.array([-0.7, 2.2])
    ka = mm.cell_chain(man.mps(p).tensors)
    kb = mm.cell_chain(man.mps(a).tensors)
    assert np.allclose(ka, kb)


def test_tangent_along_matches_finite_difference_of_tensors():
    man = mf.pxp_manifold()
    x = np.array([-0.7, 2.2])
    v = np.array([0.4, -1.1])
    h = 1e-6
    tang = man.tangent_along(x, v)
    for c in range(2):
        fd = (man.mps(x + h * v).tensors[c] - man.mps(x - h * v).tensors[c]) \
            / (2 * h)
        assert np.max(np.abs(tang[c] - fd)) < 1e-7


def test_control_densities_are_dressed_sublattice_flips():
    a1, a2 = mf.pxp_control_densities()
    (op1, c1), = a1.canonical_terms()
    (op2, c2), = a2.canonical_terms()
    # the dressed window starts one site left of the flipped site
    assert ((op1.offset + 1) % 2, (op2.offset + 1) % 2) == (0, 1)
    assert op1.support == 3 and op2.support == 3
    assert np.allclose(op1.matrix, ops.kron_all(ops.P_DOWN, ops.SX, ops.P_DOWN))


def test_circle_trajectory_connects_the_two_product_points():
    traj = mf.circle_trajectory(tau=2.0)
    assert traj.horizon == 2.0
    assert np.allclose(traj.point_at(0.0).params, (-np.pi / 2, np.pi))
    assert np.allclose(traj.point_at(2.0).params, (-np.pi / 2, 0.0),
                       atol=1e-12)


def test_circle_tangent_is_the_derivative_of_the_point():
    traj = mf.circle_trajectory(tau=1.3)
    h = 1e-6
    for t in (0.2, 0.71):
        fd = (np.array(traj.point_at(t + h).params)
              - np.array(traj.point_at(t - h).params)) / (2 * h)
        assert np.allclose(traj.tangent_at(t), fd, atol=1e-7)


def test_deformed_trajectory_reduces_to_the_circle_at_zero():
    circ = mf.circle_trajectory()
    defo = mf.deformed_trajectory(0.0, 0.0)
    for t in (0.0, 0.3, 0.77, 1.0):
        assert np.allclose(circ.point_at(t).params, defo.point_at(t).params)
        assert np.allclose(circ.tangent_at(t), defo.tangent_at(t), atol=1e-12)


def test_deformation_keeps_the_endpoints_and_shifts_the_midpoint():
    traj = mf.deformed_trajectory(0.05, -0.02)
    circ = mf.circle_trajectory()
    # the deformation vanishes at both ends of the sweep
    assert np.allclose(traj.point_at(0.0).params, circ.point_at(0.0).params)
    assert np.allclose(traj.point_at(1.0).params, circ.point_at(1.0).params,
                       atol=1e-12)
    # midpoint radius shrinks by 2*eps1 toward the singular center
    th1, th2 = traj.point_at(0.5).params
    assert abs(th1 - (-np.pi * 0.05)) < 1e-12
    assert abs(th2 - np.pi / 2) < 1e-12


def test_trajectory_file_round_trip(tmp_path):
    traj = mf.deformed_trajectory(0.03, -0.04)
    path = tmp_path / "traj.tsv"
    traj.to_file(path)
    back = mf.Trajectory.from_file(path)
    for t in (0.1, 0.5, 0.9):
        assert np.allclose(back.point_at(t).params, traj.point_at(t).params,
                           atol=1e-8)
        assert np.allclose(back.tangent_at(t), traj.tangent_at(t), atol=1e-5)


def test_tlfim_density_realizes_the_ising_hamiltonian():
    dens = mf.tlfim_density(1.0, 0.4, 1.0)
    l = 4
    H = ops.realize_on_finite_chain(dens, l)
    # independent construction, site 0 least significant
    def site(mat, i):
        return np.kron(np.eye(2 ** (l - i - 1)),
                       np.kron(ops._bitorder(mat, 1), np.eye(2 ** i)))
    Hm = sum(site(ops.SZ, i) @ site(ops.SZ, (i + 1) % l) for i in range(l))
    Hm = Hm + 0.4 * sum(site(ops.SZ, i) for i in range(l))
    Hm = Hm + 1.0 * sum(site(ops.SX, i) for i in range(l))
    assert np.allclose(H, Hm, atol=1e-12)


def test_tdvp_velocity_matches_dense_projection():
    man = mf.ising_manifold()
    dens = mf.tlfim_density(1.0, 0.4, 1.0)
    x = mf.ISING_SEED.array()
    v = mf.tdvp_velocity(man, dens, x)

    l = 10
    m = man.mps(x)
    A = ops.realize_on_finite_chain(dens, l)
    psi = mm.finite_state_vector(m, l)
    n2 = np.vdot(psi, psi).real
    psin = psi / np.sqrt(n2)
    dpn = []
    for tb in man.tangents(x):
        _, dp = mm.finite_state_vector(m, l, dtensors=tb)
        dp = dp / np.sqrt(n2)
        dpn.append(dp - np.vdot(psin, dp) * psin)
    G = np.array([[np.vdot(a, b).real for b in dpn] for a in dpn])
    Apsi = A @ psin
    Apsi = Apsi - np.vdot(psin, Apsi) * psin
    b = np.array([np.vdot(a, -1j * Apsi).real for a in dpn])
    v_dense = np.linalg.lstsq(G, b, rcond=1e-10)[0]
    assert np.max(np.abs(v - v_dense)) < 1e-4 * max(1.0, np.max(np.abs(v)))


def test_tdvp_flow_stays_on_the_manifold_and_is_smooth():
    man = mf.ising_manifold()
    dens = mf.tlfim_density(1.0, 0.4, 1.0)
    traj = mf.tdvp_flow(man, dens, mf.ISING_SEED, 0.01, 20)
    assert traj.horizon == pytest.approx(0.2)
    xs = np.array([traj.point_at(t).params for t in np.linspace(0, 0.2, 9)])
    assert np.all(np.abs(np.diff(xs, axis=0)) < 0.2)
