"""Counter-diabatic baselines: trace-CD and ground-state CD.

Both methods minimize a quadratic cost in the control amplitudes built
from the transition operator G = d_t H_p + i [A, H_p]. Trace-CD weights
all states equally: the cost is the constrained-subspace trace of G^2
per unit cell, evaluated in the thermodynamic limit with the golden-
ratio transfer matrices. Ground-state CD weights by the steered state:
the cost is <psi| G^2 |psi> per unit cell, evaluated with the dominant
transfer fixed points (plain one-point contractions; no pseudo-inverse
is needed).

In both cases the pair sum over relative positions is truncated to the
window where the commutator structure contributes; terms constant in
the controls are dropped, as they do not affect the minimizer.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from . import linalg, manifolds as mf, mps as mps_mod, operators as ops, parent as par

PHI = (1.0 + np.sqrt(5.0)) / 2.0
T0_TILDE = np.array([[1.0, 1.0], [1.0, 0.0]])
TZ_TILDE = np.array([[-1.0, -1.0], [1.0, 0.0]])
E_MAX = np.array([PHI, 1.0]) / np.sqrt(2.0 + PHI)
# per-site transfer matrices of the down/up projectors
M_DOWN = (T0_TILDE - TZ_TILDE) / 2.0
M_UP = (T0_TILDE + TZ_TILDE) / 2.0


def constrained_trace(pattern):
    """Normalized thermodynamic trace of a {1, sigma_z} string.

    `pattern` is an iterable over "1"/"z" (identity or sigma_z factors
    on consecutive sites). Returns the trace per constrained-subspace
    dimension, <e|prod T~|e> / phi^len.
    """
    M = np.eye(2)
    n = 0
    for p in pattern:
        if p in ("1", "0", 0, "id", 1):
            M = M @ T0_TILDE
        elif p in ("z", "Z", 3):
            M = M @ TZ_TILDE
        else:
            raise ValueError(f"pattern entry {p!r} is not '1' or 'z'")
        n += 1
    return float(E_MAX @ M @ E_MAX / PHI ** n)


def _diag_rows(k):
    """All window weights as a (2^k, 2) array of row vectors."""
    V = E_MAX[None, :]
    for _ in range(k):
        # new site appended as the fastest (least significant) index,
        # i.e. to the right of the existing window
        V = np.stack([V @ M_DOWN, V @ M_UP], axis=1).reshape(-1, 2)
    return V


def window_trace_row(matrix, k):
    """Row vector representing the open-ended constrained trace of a window."""
    diag = np.diagonal(matrix)
    return diag @ _diag_rows_cached(k)


@lru_cache(maxsize=32)
def _diag_rows_cached(k):
    return _diag_rows(k)


@lru_cache(maxsize=32)
def _diag_cols_cached(k):
    """All window weights as a (2, 2^k) array of column vectors.

    Column s holds M_{s_1} ... M_{s_k} |e>; the per-site transfer
    matrices are not symmetric, so right factors cannot be obtained by
    transposing `_diag_rows`.
    """
    V = E_MAX[:, None]
    for _ in range(k):
        # new site prepended on the left becomes the most significant index
        V = np.concatenate([M_DOWN @ V, M_UP @ V], axis=1)
    return V


def window_constrained_trace(matrix, k):
    """Normalized thermodynamic constrained trace of a k-site window operator."""
    return complex(window_trace_row(matrix, k) @ E_MAX / PHI ** k)


def _pair_constrained_trace(g1, g2):
    """Normalized trace of the product of two placed local operators."""
    s1, e1 = g1.offset, g1.offset + g1.support
    s2, e2 = g2.offset, g2.offset + g2.support
    if s2 >= e1 or s1 >= e2:
        # disjoint supports: factor through identity transfer on the gap
        left, right = (g1, g2) if s1 <= s2 else (g2, g1)
        gap = right.offset - (left.offset + left.support)
        r = window_trace_row(left.matrix, left.support)
        c = _diag_cols_cached(right.support) @ np.diagonal(right.matrix)
        mid = np.linalg.matrix_power(T0_TILDE, gap)
        tot = left.support + gap + right.support
        return complex(r @ mid @ c / PHI ** tot)
    start, end = min(s1, s2), max(e1, e2)
    win = end - start
    prod = _sparse_embed(g1, start, win) @ _sparse_embed(g2, start, win)
    diag = prod.diagonal()
    row = diag @ _diag_rows_cached(win)
    return complex(row @ E_MAX / PHI ** win)


def _sparse_embed(g, window_start, window_len):
    """Sparse matrix of a placed operator padded with identities."""
    left = g.offset - window_start
    right = window_len - left - g.support
    return sp.kron(sp.kron(sp.identity(2 ** left), sp.csr_matrix(g.matrix)),
                   sp.identity(2 ** right), format="csr")


@dataclass
class CDProblem:
    """A steering task phrased for the counter-diabatic solvers."""

    controls: object            # steering.ControlSet
    trajectory: object          # manifolds.Trajectory
    parent_at: callable         # t -> OperatorDensity (H_p per cell)
    parent_dt_at: callable      # t -> OperatorDensity (d_t H_p per cell)
    mps_at: callable            # t -> UniformMPS
    unit_cell: int


def pxp_cd_problem(trajectory, controls=None):
    from .steering import pxp_controls

    if controls is None:
        controls = pxp_controls()

    def parent_at(t):
        x = trajectory.point_at(t).params
        return par.pxp_parent(x[0], x[1]).total_density()

    def parent_dt_at(t):
        x = trajectory.point_at(t).params
        v = trajectory.tangent_at(t)
        return par.pxp_parent_time_derivative(x, v)

    def mps_at(t):
        return mf.pxp_mps(trajectory.point_at(t).params)

    return CDProblem(controls=controls, trajectory=trajectory,
                     parent_at=parent_at, parent_dt_at=parent_dt_at,
                     mps_at=mps_at, unit_cell=2)


def _overlaps(a, b):
    return a.offset < b.offset + b.support and b.offset < a.offset + a.support


def g_densities(problem, t):
    """The transition-operator components [G_0, G_1, ..., G_n] per cell.

    G = G_0 + sum_eta c_eta G_eta with G_0 = d_t H_p and
    G_eta = i sum_shifts [A_eta, h] over all overlapping placements.
    """
    cell = problem.unit_cell
    h_terms = problem.parent_at(t).canonical_terms()
    out = [problem.parent_dt_at(t)]
    max_sup = max(op.support for op, _ in h_terms)
    for gen in problem.controls.generators:
        dens = ops.OperatorDensity(unit_cell=cell)
        for a_op, a_coeff in gen.canonical_terms():
            reach = (a_op.support + max_sup) // cell + 1
            for s in range(-reach, reach + 1):
                a_shift = a_op.shifted(s * cell)
                for h_op, h_coeff in h_terms:
                    if not _overlaps(a_shift, h_op):
                        continue
                    comm = ops.commutator(a_shift, h_op)
                    dens.add(comm, 1j * a_coeff * h_coeff)
        out.append(dens)
    return out


def _pair_window_cells(problem, t):
    """Relative-cell truncation window of the pair sum, from the supports."""
    cell = problem.unit_cell
    l_a = max(op.support for g in problem.controls.generators
              for op, _ in g.terms)
    l_h = max(op.support for op, _ in
              problem.parent_at(t).canonical_terms())
    return -(-(l_a + l_h - 2) // cell)


def _pair_matrix(gs, pair_value, window):
    """B[alpha, beta] = sum over cell shifts and term pairs of pair_value.

    Only the upper triangle is computed; the lower is filled with the
    same real part, which is all the quadratic minimization uses.
    """
    n = len(gs)
    terms = [g.canonical_terms() for g in gs]
    cell_shifts = range(-window, window + 1)
    B = np.zeros((n, n))
    for a in range(n):
        for b in range(a, n):
            acc = 0.0
            for g1, c1 in terms[a]:
                for delta in cell_shifts:
                    for g2, c2 in terms[b]:
                        val = pair_value(g1, g2.shifted(delta * gs[a].unit_cell))
                        acc += (c1 * c2 * val).real
            B[a, b] = acc
            B[b, a] = acc
    return B


def _minimize_quadratic(B):
    """Minimizer of sum_{ab} x_a x_b B_ab with x = (1, c)."""
    M = (B[1:, 1:] + B[1:, 1:].T).real / 2
    L = (B[0, 1:] + B[1:, 0]).real
    return -0.5 * linalg.pinv_psd(M) @ L, M, L, B[0, 0].real


def trace_cd_quadratic(problem, t):
    """(Hessian/2, linear, const) of the per-cell trace cost Tr[G^2]."""
    gs = g_densities(problem, t)
    B = _pair_matrix(gs, _pair_constrained_trace, _pair_window_cells(problem, t))
    _, M, L, const = _minimize_quadratic(B)
    return M, L, const


def trace_cd_controls(problem, t):
    """Controls minimizing the constrained trace of G^2 per unit cell."""
    gs = g_densities(problem, t)
    B = _pair_matrix(gs, _pair_constrained_trace, _pair_window_cells(problem, t))
    c, _, _, _ = _minimize_quadratic(B)
    return c


def _gs_pair_value(tobj):
    cell = tobj.sites
    K = tobj.K

    def value(g1, g2):
        s1, e1 = g1.offset, g1.offset + g1.support
        s2, e2 = g2.offset, g2.offset + g2.support
        c1a = s1 // cell
        c1b = -(-e1 // cell)
        c2a = s2 // cell
        c2b = -(-e2 // cell)

        def transfer(op_sparse, n):
            chain = mps_mod.cell_chain([K] * n)
            D = chain.shape[1]
            a, b = chain.shape[0], chain.shape[2]
            Km = chain.transpose(1, 0, 2).reshape(D, a * b)
            tmp = (op_sparse @ Km).reshape(D, a, b)
            E = np.tensordot(chain.conj(), tmp, axes=([1], [0]))
            return E.transpose(2, 0, 3, 1).reshape(a * a, b * b)

        def block(g, ca, cb):
            n = cb - ca
            return transfer(_sparse_embed(g, ca * cell, n * cell), n)

        if c2a >= c1b or c1a >= c2b:
            # disjoint cell windows: factor through the bare transfer on
            # the gap (disjoint supports commute, so spatial order works)
            lo, la, lb = (g1, c1a, c1b) if c1a <= c2a else (g2, c2a, c2b)
            hi, ha, hb = (g2, c2a, c2b) if c1a <= c2a else (g1, c1a, c1b)
            E1 = block(lo, la, lb)
            E2 = block(hi, ha, hb)
            mid = np.linalg.matrix_power(tobj.T, ha - lb)
            return (tobj.L @ E1 @ mid @ E2 @ tobj.R) / tobj.lr
        ca, cb = min(c1a, c2a), max(c1b, c2b)
        win = (cb - ca) * cell
        prod = _sparse_embed(g1, ca * cell, win) @ _sparse_embed(g2, ca * cell, win)
        E = transfer(prod, cb - ca)
        return (tobj.L @ E @ tobj.R) / tobj.lr

    return value


def gs_cd_quadratic(problem, t):
    """(Hessian/2, linear, const) of the per-cell cost <psi|G^2|psi>."""
    gs = g_densities(problem, t)
    tobj = mps_mod.build_transfer_objects(problem.mps_at(t))
    B = _pair_matrix(gs, _gs_pair_value(tobj), _pair_window_cells(problem, t))
    _, M, L, const = _minimize_quadratic(B)
    return M, L, const


def gs_cd_controls(problem, t):
    """Controls minimizing <psi|G^2|psi> per unit cell."""
    gs = g_densities(problem, t)
    tobj = mps_mod.build_transfer_objects(problem.mps_at(t))
    B = _pair_matrix(gs, _gs_pair_value(tobj), _pair_window_cells(problem, t))
    c, _, _, _ = _minimize_quadratic(B)
    return c


def g_expectation(problem, t, c):
    """<psi|G|psi> per cell; vanishes under the zero-energy convention."""
    gs = g_densities(problem, t)
    tobj = mps_mod.build_transfer_objects(problem.mps_at(t))
    total = gs[0]
    for coeff, dens in zip(c, gs[1:]):
        total = total + dens.scaled(coeff)
    val = 0.0
    for op, coeff in total.canonical_terms():
        dens = ops.OperatorDensity([(op, coeff)], problem.unit_cell)
        val += mps_mod.expectation(tobj, dens)
    return val


def cd_schedule(problem, method, n_times=100):
    """Sampled control schedule along the trajectory for one CD method.

    Uses a midpoint grid: the parent construction can be undefined at
    isolated trajectory points (vanishing or diverging couplings), and
    the midpoint rule keeps the samples away from round-fraction times
    where such points typically sit.
    """
    solver = {"trace-cd": trace_cd_controls, "gs-cd": gs_cd_controls}[method]
    h = problem.trajectory.horizon
    ts = (np.arange(n_times) + 0.5) * (h / n_times)
    amps = np.array([solver(problem, t) for t in ts])
    return ts, amps
