"""Concrete parametrized MPS manifolds, trajectories and the TDVP projector.

Two chi=2 families are shipped: the blockaded two-angle ansatz with a
two-site unit cell (parameters theta_1 on even sites, theta_2 on odd
sites) and a one-site transverse-longitudinal-field Ising ansatz with
four real parameters. The architecture is generic: a `Manifold` bundles
the tensor map, tangent tensors and a validity check, and `tdvp_flow`
works for any of them.
"""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from . import linalg, mps as mps_mod, operators as ops
from .errors import IllConditionedTangent, SingularPoint

SINGULAR_TOL = 1e-6
FD_STEP = 1e-6
TDVP_COND_MAX = 1e10
SAMPLES_PER_UNIT_TIME = 2000


@dataclass(frozen=True)
class ManifoldPoint:
    """Point in manifold parameter space."""

    params: tuple

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))

    def array(self):
        return np.array(self.params)


@dataclass(frozen=True)
class Manifold:
    """A parametrized family of uniform MPS.

    `mps_fn` maps a parameter array to a UniformMPS; `tangent_fn` returns
    a list (one entry per parameter) of per-cell derivative tensor lists;
    `validate_fn` raises SingularPoint on excluded parameter values.
    """

    name: str
    dim: int
    mps_fn: callable
    tangent_fn: callable
    validate_fn: callable = None

    def validate(self, x):
        if self.validate_fn is not None:
            self.validate_fn(_param_array(x))

    def mps(self, x):
        x = _param_array(x)
        self.validate(x)
        return self.mps_fn(x)

    def tangents(self, x):
        """Per-parameter derivative tensors at x."""
        x = _param_array(x)
        self.validate(x)
        return self.tangent_fn(x)

    def tangent_along(self, x, xdot):
        """Derivative tensors of t -> mps(x + t*xdot) at t=0."""
        basis = self.tangents(x)
        n_cell = len(basis[0])
        out = []
        for c in range(n_cell):
            out.append(sum(v * basis[j][c] for j, v in enumerate(xdot)))
        return out


def _param_array(x):
    if isinstance(x, ManifoldPoint):
        return x.array()
    return np.asarray(x, dtype=float)


def _near_half_pi(theta):
    return abs(((theta - np.pi / 2) + np.pi / 2) % np.pi - np.pi / 2) < SINGULAR_TOL


def _pxp_validate(x):
    if _near_half_pi(x[0]) and _near_half_pi(x[1]):
        raise SingularPoint(
            f"(theta1, theta2)={tuple(x)} is the excluded singular point"
        )


def _pxp_tensor(theta):
    # rows/cols are the chi=2 bond indices; physical index 0=down, 1=up
    t = np.zeros((2, 2, 2), dtype=complex)
    t[0, 0, 0] = np.cos(theta)
    t[0, 1, 1] = 1j * np.sin(theta)
    t[1, 0, 0] = 1.0
    return t


def _pxp_dtensor(theta):
    t = np.zeros((2, 2, 2), dtype=complex)
    t[0, 0, 0] = -np.sin(theta)
    t[0, 1, 1] = 1j * np.cos(theta)
    return t


def pxp_mps(point):
    """Blockaded two-angle ansatz: chi=2, two-site unit cell."""
    x = point.array() if isinstance(point, ManifoldPoint) else np.asarray(point)
    _pxp_validate(x)
    return mps_mod.UniformMPS([_pxp_tensor(x[0]), _pxp_tensor(x[1])])


def _pxp_tangents(x):
    zero = np.zeros((2, 2, 2), dtype=complex)
    return [
        [_pxp_dtensor(x[0]), zero],
        [zero, _pxp_dtensor(x[1])],
    ]


def pxp_manifold():
    return Manifold("pxp", 2, lambda x: pxp_mps(x), _pxp_tangents, _pxp_validate)


def _ising_tensor(x):
    a, b, c, d = x
    t = np.zeros((2, 2, 2), dtype=complex)
    t[0, 1, 0] = np.cos(d) * np.cos(b) * np.exp(1j * a / 2)
    t[0, 1, 1] = np.cos(d) * np.sin(b) * np.exp(-1j * a / 2)
    t[1, 0, 0] = np.sin(d) * np.sin(b) * np.exp(1j * (c - a / 2))
    t[1, 0, 1] = np.sin(d) * np.cos(b) * np.exp(1j * (c + a / 2))
    return t


def ising_mps(point):
    """Four-parameter chi=2 ansatz with one-site translational invariance."""
    x = point.array() if isinstance(point, ManifoldPoint) else np.asarray(point)
    return mps_mod.UniformMPS([_ising_tensor(x)])


def _fd_tangents(tensor_fn, x, h=FD_STEP):
    out = []
    for j in range(len(x)):
        xp = np.array(x, dtype=float)
        xm = np.array(x, dtype=float)
        xp[j] += h
        xm[j] -= h
        out.append((tensor_fn(xp) - tensor_fn(xm)) / (2 * h))
    return out


def _ising_tangents(x):
    return [[d] for d in _fd_tangents(_ising_tensor, x)]


def ising_manifold():
    return Manifold("tlfim", 4, lambda x: ising_mps(x), _ising_tangents)


ISING_SEED = ManifoldPoint((0.2607, 0.9, 4.888, 0.4308))
ISING_PERIOD = 2.097


def pxp_control_densities():
    """The two sublattice generators: dressed sigma-x per unit cell.

    The first density acts on the sublattice of cell offset 0 (the
    theta_1 sites), the second on cell offset 1; this pairing makes the
    first amplitude the coefficient multiplying theta_1-dot in the
    closed-form optimum.
    """
    sx_a = ops.dress_with_projectors(ops.pauli_site(ops.SX, offset=0))
    sx_b = ops.dress_with_projectors(ops.pauli_site(ops.SX, offset=1))
    return [
        ops.OperatorDensity([(sx_a, 1.0)], unit_cell=2),
        ops.OperatorDensity([(sx_b, 1.0)], unit_cell=2),
    ]


def pxp_hamiltonian_density(c1=1.0, c2=1.0):
    a1, a2 = pxp_control_densities()
    return a1.scaled(c1) + a2.scaled(c2)


def tlfim_density(J=1.0, h_z=0.4, h_x=1.0):
    """sum_i (J sz_i sz_{i+1} + h_z sz_i + h_x sx_i), one-site unit cell."""
    zz = ops.LocalOperator(2, ops.kron_all(ops.SZ, ops.SZ))
    dens = ops.OperatorDensity(unit_cell=1)
    dens.add(zz, J)
    dens.add(ops.pauli_site(ops.SZ), h_z)
    dens.add(ops.pauli_site(ops.SX), h_x)
    return dens


def tlfim_zy_density():
    """The symmetrized two-site z-y correction density (unit amplitude)."""
    zy = ops.LocalOperator(
        2, ops.kron_all(ops.SZ, ops.SY) + ops.kron_all(ops.SY, ops.SZ)
    )
    return ops.OperatorDensity([(zy, 0.5)], unit_cell=1)


class Trajectory:
    """Time-parametrized curve in manifold parameter space.

    Evaluation is pure; instances are immutable after construction. The
    tangent is the analytic derivative when available and a central
    finite difference of `point_at` otherwise.
    """

    def __init__(self, point_fn, tangent_fn=None, horizon=1.0,
                 family_params=None):
        self._point_fn = point_fn
        self._tangent_fn = tangent_fn
        self.horizon = float(horizon)
        self.family_params = dict(family_params or {})

    def point_at(self, t):
        return ManifoldPoint(tuple(np.atleast_1d(self._point_fn(t))))

    def tangent_at(self, t):
        if self._tangent_fn is not None:
            return np.atleast_1d(np.asarray(self._tangent_fn(t), dtype=float))
        h = FD_STEP
        xp = np.atleast_1d(self._point_fn(t + h))
        xm = np.atleast_1d(self._point_fn(t - h))
        return (xp - xm) / (2 * h)

    @property
    def dim(self):
        return len(self.point_at(0.0).params)

    @classmethod
    def from_samples(cls, ts, xs, horizon=None, family_params=None):
        ts = np.asarray(ts, dtype=float)
        xs = np.asarray(xs, dtype=float)
        spline = CubicSpline(ts, xs, axis=0)
        dspline = spline.derivative()
        return cls(
            point_fn=lambda t: spline(t),
            tangent_fn=lambda t: dspline(t),
            horizon=horizon if horizon is not None else ts[-1],
            family_params=family_params,
        )

    def sample(self, n=None):
        if n is None:
            n = max(2, int(round(SAMPLES_PER_UNIT_TIME * self.horizon)) + 1)
        ts = np.linspace(0.0, self.horizon, n)
        xs = np.array([self.point_at(t).params for t in ts])
        return ts, xs

    def to_file(self, path):
        ts, xs = self.sample()
        dxs = np.array([self.tangent_at(t) for t in ts])
        dim = xs.shape[1]
        cols = ["t"] + [f"x{i+1}" for i in range(dim)] + \
            [f"xdot{i+1}" for i in range(dim)]
        data = np.column_stack([ts, xs, dxs])
        header = "\t".join(cols)
        np.savetxt(path, data, fmt="%.12e", delimiter="\t",
                   header=header, comments="# ")

    @classmethod
    def from_file(cls, path):
        data = np.atleast_2d(np.loadtxt(path))
        dim = (data.shape[1] - 1) // 2
        return cls.from_samples(data[:, 0], data[:, 1:1 + dim])


def circle_trajectory(T_schedule=None, tau=1.0):
    """Quarter-turn angle trajectory between the two period-2 product points.

    theta_1 = (pi/2)(sin(pi T) - 1), theta_2 = (pi/2)(cos(pi T) + 1) with
    the default linear schedule T(t) = t/tau.
    """
    if T_schedule is None:
        def point(t):
            T = t / tau
            return np.array([np.pi / 2 * (np.sin(np.pi * T) - 1),
                             np.pi / 2 * (np.cos(np.pi * T) + 1)])

        def tangent(t):
            T = t / tau
            return np.array([np.pi ** 2 / 2 * np.cos(np.pi * T),
                             -np.pi ** 2 / 2 * np.sin(np.pi * T)]) / tau

        return Trajectory(point, tangent, horizon=tau)

    def point(t):
        T = T_schedule(t)
        return np.array([np.pi / 2 * (np.sin(np.pi * T) - 1),
                         np.pi / 2 * (np.cos(np.pi * T) + 1)])

    return Trajectory(point, None, horizon=tau)


def deformed_trajectory(eps1, eps2, tau=1.0):
    """Circle trajectory with a time-periodic radius deformation.

    d(t) = 1 - eps1 (1 - cos 2 pi t) - eps2 (1 - cos 4 pi t) multiplies
    the circle radius; eps1 = eps2 = 0 reduces exactly to the circle.
    """
    def radius(t):
        return 1 - eps1 * (1 - np.cos(2 * np.pi * t)) \
            - eps2 * (1 - np.cos(4 * np.pi * t))

    def dradius(t):
        return -2 * np.pi * eps1 * np.sin(2 * np.pi * t) \
            - 4 * np.pi * eps2 * np.sin(4 * np.pi * t)

    def point(t):
        T = t / tau
        d = radius(T)
        return np.array([np.pi / 2 * (d * np.sin(np.pi * T) - 1),
                         np.pi / 2 * (d * np.cos(np.pi * T) + 1)])

    def tangent(t):
        T = t / tau
        d, dd = radius(T), dradius(T)
        return np.array([
            np.pi / 2 * (dd * np.sin(np.pi * T) + d * np.pi * np.cos(np.pi * T)),
            np.pi / 2 * (dd * np.cos(np.pi * T) - d * np.pi * np.sin(np.pi * T)),
        ]) / tau

    return Trajectory(point, tangent, horizon=tau,
                      family_params={"eps1": eps1, "eps2": eps2})


def tdvp_velocity(manifold, hamiltonian_density, x):
    """Parameter velocity of the variational flow at x.

    Solves Re<d_j psi|d_t psi>_c = Im<d_j psi|A|psi>_c for xdot via the
    (pseudo-inverted) tangent Gram matrix.
    """
    x = np.asarray(x, dtype=float)
    tobj = mps_mod.build_transfer_objects(manifold.mps(x))
    tangents = manifold.tangents(x)
    ins_bra = [mps_mod.tangent_insertion(tobj, dt, layer="bra")
               for dt in tangents]
    ins_ket = [mps_mod.tangent_insertion(tobj, dt, layer="ket")
               for dt in tangents]
    A_ins = mps_mod.operator_insertion(tobj, hamiltonian_density)
    n = manifold.dim
    G = np.zeros((n, n))
    b = np.zeros(n)
    for j in range(n):
        b[j] = mps_mod.connected_cross(tobj, ins_bra[j], A_ins).imag
        for k in range(j, n):
            val = mps_mod.connected_cross(tobj, ins_bra[j], ins_ket[k]).real
            G[j, k] = val
            G[k, j] = val
    vals = np.linalg.eigvalsh(G)
    # eigenvalues below the relative cutoff count as an exact kernel and
    # are pseudo-inverted away; anything between the cutoff and 1/cond_max
    # of the top eigenvalue means a genuinely ill-conditioned metric
    kept = vals[vals > 1e-12 * max(vals[-1], 0.0)]
    if kept.size and kept[0] > 0 and kept[-1] / kept[0] > TDVP_COND_MAX:
        raise IllConditionedTangent(
            f"Gram condition number {kept[-1] / kept[0]:.3e} exceeds "
            f"{TDVP_COND_MAX:.0e}"
        )
    return linalg.pinv_psd(G) @ b


def tdvp_flow(manifold, hamiltonian_density, x0, dt, steps):
    """Integrate the variational flow with classical 4th-order Runge-Kutta.

    Returns a sampled Trajectory (cubic spline through the step points).
    Every evaluation validates the manifold point, so the flow raises
    rather than stepping onto an excluded point.
    """
    x0 = x0.array() if isinstance(x0, ManifoldPoint) else np.asarray(x0, float)

    def f(x):
        return tdvp_velocity(manifold, hamiltonian_density, x)

    ts = [0.0]
    xs = [x0.copy()]
    x = x0.copy()
    for step in range(steps):
        k1 = f(x)
        k2 = f(x + 0.5 * dt * k1)
        k3 = f(x + 0.5 * dt * k2)
        k4 = f(x + dt * k3)
        x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        ts.append((step + 1) * dt)
        xs.append(x.copy())
    return Trajectory.from_samples(np.array(ts), np.array(xs),
                                   horizon=steps * dt)
