"""Leakage-minimizing control solver.

The instantaneous leakage of a steered MPS trajectory,

    delta^2 = (1/l) | (d_t + i A(c)) |psi> |^2,

is a quadratic polynomial in the control amplitudes c once expressed
through connected correlators per site. This module builds that
quadratic, minimizes it, evaluates the rescaled (angle) leakage, and
scans directions and parameter regions.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import linalg, mps as mps_mod
from .errors import OrthogonalSubspaces, SingularPoint, ZeroTangent
from .manifolds import pxp_control_densities, pxp_manifold

D_PINV_CUTOFF = 1e-12


@dataclass
class ControlSet:
    """Hermitian generator densities with optional labels."""

    generators: list
    labels: list = None

    def __post_init__(self):
        for g in self.generators:
            for op, coeff in g.terms:
                if abs(coeff.imag if isinstance(coeff, complex) else 0) > 1e-12 \
                        or not op.is_hermitian():
                    raise ValueError("control generators must be Hermitian")
        if self.labels is None:
            self.labels = [f"c{i+1}" for i in range(len(self.generators))]

    def __len__(self):
        return len(self.generators)


def pxp_controls():
    return ControlSet(pxp_control_densities(), labels=["c1", "c2"])


def tlfim_controls(include_zy=False):
    """The three Ising coupling generators, optionally with the z-y term."""
    from .manifolds import tlfim_density, tlfim_zy_density

    gens = [tlfim_density(1, 0, 0), tlfim_density(0, 1, 0),
            tlfim_density(0, 0, 1)]
    labels = ["J", "h_z", "h_x"]
    if include_zy:
        gens.append(tlfim_zy_density())
        labels.append("zy")
    return ControlSet(gens, labels=labels)


@dataclass
class SteeringSolution:
    """Control schedule with leakage diagnostics along a trajectory."""

    times: np.ndarray
    amplitudes: np.ndarray    # shape (n_times, n_controls)
    leakage: np.ndarray       # delta^2(t)
    rescaled: np.ndarray      # Delta^2(t)

    def __post_init__(self):
        if np.any(self.leakage < -1e-10):
            raise ValueError("negative leakage")
        if np.any(self.rescaled < -1e-10) or np.any(self.rescaled > 1 + 1e-10):
            raise ValueError("rescaled leakage outside [0, 1]")


def _ensure_tobj(mps):
    if isinstance(mps, mps_mod.UniformMPS):
        return mps_mod.build_transfer_objects(mps)
    return mps


def leakage_quadratic(mps, tangent, controls):
    """Quadratic coefficients of delta^2(c) = c.D.c/2 + e.c + const per site.

    Parameters
    ----------
    mps : UniformMPS or TransferObjects
    tangent : list of derivative tensors (one per unit-cell tensor)
    controls : ControlSet

    Returns
    -------
    D : (n, n) real symmetric PSD matrix, D_er = <{A_e, A_r}>_c per site
    e : (n,) real vector, e_e = 2 Im <psi| A_e |d_t psi>_c per site
    const : real scalar, Re <d_t psi | d_t psi>_c per site
    """
    tobj = _ensure_tobj(mps)
    sites = tobj.sites
    ket_t = mps_mod.tangent_insertion(tobj, tangent, layer="ket")
    bra_t = mps_mod.tangent_insertion(tobj, tangent, layer="bra")
    a_ins = [mps_mod.operator_insertion(tobj, g) for g in controls.generators]
    n = len(a_ins)
    D = np.zeros((n, n))
    e = np.zeros(n)
    for i in range(n):
        e[i] = 2 * mps_mod.connected_cross(tobj, a_ins[i], ket_t).imag / sites
        for j in range(i, n):
            val = (mps_mod.connected_cross(tobj, a_ins[i], a_ins[j])
                   + mps_mod.connected_cross(tobj, a_ins[j], a_ins[i])).real
            D[i, j] = D[j, i] = val / sites
    const = mps_mod.connected_cross(tobj, bra_t, ket_t).real / sites
    return D, e, const


def quadratic_value(D, e, const, c):
    c = np.asarray(c, dtype=float)
    return float(0.5 * c @ D @ c + e @ c + const)


def optimal_controls(D, e):
    """Minimizer c = -pinv(D) e; kernel directions of D get zero amplitude."""
    return -linalg.pinv_psd(D, rel_cutoff=D_PINV_CUTOFF) @ np.asarray(e)


def closed_form_pxp_controls(theta1, theta2, dtheta1, dtheta2):
    """Closed-form optimal sublattice amplitudes for the two-angle ansatz.

    Evaluates the explicit trigonometric minimizer of the per-site
    leakage quadratic along (theta1(t), theta2(t)).
    """
    out = []
    for (ta, tb, da, db) in ((theta1, theta2, dtheta1, dtheta2),
                             (theta2, theta1, dtheta2, dtheta1)):
        f = (29 + 3 * np.cos(4 * ta) + 32 * np.cos(2 * ta) * np.cos(2 * tb)
             + 6 * np.cos(4 * tb) * np.sin(2 * ta) ** 2)
        if abs(f) < 1e-12:
            raise SingularPoint("closed-form denominator vanishes")
        num = (-2 * da * (9 + 6 * np.cos(2 * ta) + np.cos(4 * ta)) * np.cos(tb)
               - 8 * da * np.cos(2 * ta) * np.cos(3 * tb) * np.sin(ta) ** 2
               + db * (2 * np.sin(2 * ta) + 7 * np.sin(4 * ta)) * np.sin(tb)
               + 8 * db * np.cos(ta) * np.sin(ta) ** 3 * np.sin(3 * tb))
        out.append(2 * num / f)
    return tuple(out)


def tangent_norm_per_site(mps, tangent):
    tobj = _ensure_tobj(mps)
    ket_t = mps_mod.tangent_insertion(tobj, tangent, layer="ket")
    bra_t = mps_mod.tangent_insertion(tobj, tangent, layer="bra")
    return mps_mod.connected_cross(tobj, bra_t, ket_t).real / tobj.sites


def rescaled_leakage(mps, tangent, controls, c):
    """Delta^2 = delta^2 / (|d_t psi|^2 / l), the squared sine of the angle
    between the desired tangent and the generated motion. Lies in [0, 1]."""
    tobj = _ensure_tobj(mps)
    D, e, const = leakage_quadratic(tobj, tangent, controls)
    if const < 1e-14:
        raise ZeroTangent("tangent norm per site below 1e-14")
    val = quadratic_value(D, e, const, c) / const
    return float(min(max(val, 0.0), 1.0)) if -1e-10 < val < 1 + 1e-10 else val


def rescale_to_exact_projection(mps, tangent, controls, c):
    """Rescale a leakage solution so the generated motion has the full
    tangent norm: c_P = omega c with
    omega = <d_t psi|d_t psi>_c / <A A>_c at A = sum_e c_e A_e."""
    tobj = _ensure_tobj(mps)
    c = np.asarray(c, dtype=float)
    D, e, const = leakage_quadratic(tobj, tangent, controls)
    # <A A>_c per site is the full quadratic-form value c.D.c / 2
    aa = 0.5 * c @ D @ c
    if aa < 1e-14:
        raise OrthogonalSubspaces("<A A>_c below 1e-14")
    omega = const / aa
    return omega * c


def steering_tableau(tobj, tangent_basis, controls):
    """Direction-independent pieces of the leakage quadratic at one point.

    Returns (D, Ehat, Gram) per site, where for a tangent x_dot = v the
    quadratic is c.D.c/2 + (Ehat @ v).c + v.Gram.v / ... all per site:
    e(v) = Ehat @ v and const(v) = v.Gram.v.
    """
    sites = tobj.sites
    kets = [mps_mod.tangent_insertion(tobj, dt, layer="ket")
            for dt in tangent_basis]
    bras = [mps_mod.tangent_insertion(tobj, dt, layer="bra")
            for dt in tangent_basis]
    a_ins = [mps_mod.operator_insertion(tobj, g) for g in controls.generators]
    n, m = len(a_ins), len(tangent_basis)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            val = (mps_mod.connected_cross(tobj, a_ins[i], a_ins[j])
                   + mps_mod.connected_cross(tobj, a_ins[j], a_ins[i])).real
            D[i, j] = D[j, i] = val / sites
    Ehat = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            Ehat[i, j] = 2 * mps_mod.connected_cross(
                tobj, a_ins[i], kets[j]).imag / sites
    Gram = np.zeros((m, m))
    for i in range(m):
        for j in range(m):
            Gram[i, j] = mps_mod.connected_cross(tobj, bras[i], kets[j]).real \
                / sites
    Gram = (Gram + Gram.T) / 2
    return D, Ehat, Gram


def direction_scan(point, controls, grid=64, manifold=None):
    """Optimal controls and rescaled leakage versus tangent direction.

    The tangent is (cos phi, sin phi, ...) in parameter space over a
    uniform grid of phi in [0, 2 pi); best/worst angles are reported
    mod pi (the leakage is invariant under phi -> phi + pi).
    Only two-parameter manifolds are scanned.
    """
    if grid < 8:
        raise ValueError("grid must be at least 8")
    if manifold is None:
        manifold = pxp_manifold()
    if manifold.dim != 2:
        raise ValueError("direction scan requires a two-parameter manifold")
    x = point.array() if hasattr(point, "array") else np.asarray(point, float)
    tobj = mps_mod.build_transfer_objects(manifold.mps(x))
    basis = manifold.tangents(x)
    D, Ehat, Gram = steering_tableau(tobj, basis, controls)
    Dinv = linalg.pinv_psd(D, rel_cutoff=D_PINV_CUTOFF)
    phis = np.linspace(0.0, 2 * np.pi, grid, endpoint=False)
    cs = np.zeros((grid, len(controls)))
    delta2 = np.zeros(grid)
    rescaled = np.zeros(grid)
    for k, phi in enumerate(phis):
        v = np.array([np.cos(phi), np.sin(phi)])
        e = Ehat @ v
        const = v @ Gram @ v
        c = -Dinv @ e
        cs[k] = c
        delta2[k] = quadratic_value(D, e, const, c)
        rescaled[k] = delta2[k] / const if const > 1e-14 else np.nan
    finite = np.isfinite(rescaled)
    best = np.argmin(np.where(finite, rescaled, np.inf))
    worst = np.argmax(np.where(finite, rescaled, -np.inf))
    return {
        "phi": phis,
        "controls": cs,
        "delta2": delta2,
        "rescaled": rescaled,
        "phi_best": float(phis[best] % np.pi),
        "phi_worst": float(phis[worst] % np.pi),
    }


def _landscape_point(args):
    x, controls, grid = args
    try:
        scan = direction_scan(np.asarray(x), controls, grid=grid)
    except SingularPoint:
        return (np.nan, np.nan, np.nan, np.nan)
    r = scan["rescaled"]
    finite = np.isfinite(r)
    if not np.any(finite):
        return (np.nan, np.nan, np.nan, np.nan)
    return (
        float(np.min(r[finite])), scan["phi_best"],
        float(np.max(r[finite])), scan["phi_worst"],
    )


def leakage_landscape(region, resolution, controls, grid=64, jobs=1):
    """Direction-scan summaries on a rectangular parameter grid.

    Parameters
    ----------
    region : (theta1_min, theta1_max, theta2_min, theta2_max)
    resolution : int or (n1, n2), points per axis (>= 2)
    controls : ControlSet
    grid : angles per direction scan
    jobs : data-parallel worker count (grid points are independent)

    Returns
    -------
    dict with axes theta1, theta2 and (n1, n2) grids delta2_min,
    phi_best, delta2_max, phi_worst. Singular points hold NaN.
    """
    n1, n2 = (resolution, resolution) if np.isscalar(resolution) else resolution
    if n1 < 2 or n2 < 2:
        raise ValueError("resolution must be at least 2 per axis")
    t1 = np.linspace(region[0], region[1], n1)
    t2 = np.linspace(region[2], region[3], n2)
    tasks = [((a, b), controls, grid) for a in t1 for b in t2]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_landscape_point, tasks, chunksize=8))
    else:
        results = [_landscape_point(t) for t in tasks]
    out = np.array(results).reshape(n1, n2, 4)
    return {
        "theta1": t1,
        "theta2": t2,
        "delta2_min": out[:, :, 0],
        "phi_best": out[:, :, 1],
        "delta2_max": out[:, :, 2],
        "phi_worst": out[:, :, 3],
    }


def solve_trajectory(trajectory, controls, n_times=201, manifold=None,
                     rescale=False):
    """Optimal control schedule along a trajectory.

    Returns a SteeringSolution sampled at n_times uniform times; with
    `rescale` the amplitudes are post-scaled to the exact-projection
    convention (leakage columns still report the unrescaled optimum).
    """
    if manifold is None:
        manifold = pxp_manifold()
    ts = np.linspace(0.0, trajectory.horizon, n_times)
    n = len(controls)
    amps = np.zeros((n_times, n))
    d2 = np.zeros(n_times)
    r2 = np.zeros(n_times)
    for k, t in enumerate(ts):
        x = trajectory.point_at(t).array()
        xdot = trajectory.tangent_at(t)
        tobj = mps_mod.build_transfer_objects(manifold.mps(x))
        tangent = manifold.tangent_along(x, xdot)
        D, e, const = leakage_quadratic(tobj, tangent, controls)
        c = optimal_controls(D, e)
        d2[k] = max(quadratic_value(D, e, const, c), 0.0)
        r2[k] = min(max(d2[k] / const, 0.0), 1.0) if const > 1e-14 else 0.0
        if rescale:
            aa = 0.5 * c @ D @ c
            if aa > 1e-14:
                c = (const / aa) * c
        amps[k] = c
    return SteeringSolution(times=ts, amplitudes=amps, leakage=d2,
                            rescaled=r2)
