"""Parent Hamiltonians: frustration-free local densities annihilating an MPS.

Two constructions: a closed form for the two-angle blockaded ansatz
(densities a*sy~ + b*P~ + (a^2/b)*n~ with projector-dressed operators),
and a generic null-space construction valid for any uniform MPS with
chi^2 < d^l_s: the density is W' Lambda W'^dagger built from the
orthogonal complement of the windowed MPS vectors.
"""

from dataclasses import dataclass, field

import numpy as np

from . import mps as mps_mod, operators as ops
from .errors import DimensionMismatch, ParentUndefined

NULLSPACE_CUTOFF = 1e-10
B_TOL = 1e-9

LAMBDA_PRESETS = {
    "uniform": (1.0, 1.0, 1.0, 1.0),
    "ascending": (1.0, 2.0, 3.0, 4.0),
    "spiked": (1.0, 1.0, 1.0, 16.0),
}


@dataclass
class ParentHamiltonian:
    """Sum of one Hermitian PSD density per unit-cell position."""

    densities: list          # LocalOperator, offsets spread over the cell
    unit_cell: int
    support: int
    free_params: tuple = ()

    def total_density(self):
        dens = ops.OperatorDensity(unit_cell=self.unit_cell)
        for op in self.densities:
            dens.add(op, 1.0)
        return dens

    def squared_density(self):
        """Density of H_p^2 restricted to overlapping pairs.

        Exact for expectation values on the annihilated MPS, where all
        non-overlapping (and all other) contributions vanish; used for
        the frustration-free check <H_p^2> = 0.
        """
        dens = ops.OperatorDensity(unit_cell=self.unit_cell)
        for a in self.densities:
            for b in self.densities:
                for cells in range(-(self.support // self.unit_cell + 1),
                                   self.support // self.unit_cell + 2):
                    off = b.offset + cells * self.unit_cell
                    if off >= a.offset + a.support or \
                            a.offset >= off + b.support:
                        continue
                    prod = ops.product(a, b.shifted(cells * self.unit_cell))
                    dens.add(prod, 1.0)
        return dens


def _dressed(mat, offset):
    return ops.dress_with_projectors(ops.LocalOperator(1, mat, offset))


def pxp_parent_couplings(theta1, theta2):
    """The (a, b) pairs for the two sublattices with a = 1, b > 0.

    b on the theta_i sublattice is |tan(theta_i) / cos(theta_j)| with
    j the other angle; undefined when it vanishes or diverges.
    """
    out = []
    for ta, tb in ((theta1, theta2), (theta2, theta1)):
        if abs(np.cos(tb)) < B_TOL or abs(np.cos(ta)) < B_TOL:
            raise ParentUndefined("parent coupling diverges (cos -> 0)")
        b = np.tan(ta) / np.cos(tb)
        if abs(b) < B_TOL:
            raise ParentUndefined("parent coupling vanishes (b -> 0)")
        # |a| = 1; its sign rides along with the b > 0 branch choice so
        # the density still annihilates the state
        out.append((np.sign(b), abs(b)))
    return out


def pxp_parent_density_matrix(a, b):
    """Dressed 3-site density a sy~ + b P~ + (a^2/b) n~ (center at site 1)."""
    return (a * ops.kron_all(ops.P_DOWN, ops.SY, ops.P_DOWN)
            + b * ops.kron_all(ops.P_DOWN, ops.P_DOWN, ops.P_DOWN)
            + (a * a / b) * ops.kron_all(ops.P_DOWN, ops.N_UP, ops.P_DOWN))


def pxp_parent(theta1, theta2):
    """Closed-form parent Hamiltonian of the two-angle blockaded ansatz.

    One density per sublattice; the density centered on a theta_i site
    carries coupling b_i = |tan(theta_i)/cos(theta_j)| (ground-state
    sign branch, overall scale a_i = 1).
    """
    (a1, b1), (a2, b2) = pxp_parent_couplings(theta1, theta2)
    h1 = ops.LocalOperator(3, pxp_parent_density_matrix(a1, b1), offset=-1)
    h2 = ops.LocalOperator(3, pxp_parent_density_matrix(a2, b2), offset=0)
    return ParentHamiltonian(densities=[h1, h2], unit_cell=2, support=3,
                             free_params=(a1, b1, a2, b2))


def pxp_parent_time_derivative(theta, thetadot):
    """Exact d/dt of the parent density along (theta(t)) as a density.

    d h / d b = P~ - (a^2/b^2) n~ with a held at 1; b follows the chain
    rule of b_i = |tan(theta_i)/cos(theta_j)|.
    """
    t1, t2 = theta
    d1, d2 = thetadot
    (a1, b1), (a2, b2) = pxp_parent_couplings(t1, t2)
    dens = ops.OperatorDensity(unit_cell=2)
    for (ta, tb, da, db_other, a, b, offset) in (
            (t1, t2, d1, d2, a1, b1, -1),
            (t2, t1, d2, d1, a2, b2, 0)):
        raw = np.tan(ta) / np.cos(tb)
        sign = 1.0 if raw >= 0 else -1.0
        bdot = sign * (da / (np.cos(ta) ** 2 * np.cos(tb))
                       + db_other * np.tan(ta) * np.tan(tb) / np.cos(tb))
        dmat = (ops.kron_all(ops.P_DOWN, ops.P_DOWN, ops.P_DOWN)
                - (a * a / b ** 2) * ops.kron_all(ops.P_DOWN, ops.N_UP,
                                                  ops.P_DOWN))
        dens.add(ops.LocalOperator(3, dmat, offset=offset), bdot)
    return dens


def windowed_mps_vectors(mps, support):
    """Matrix of windowed MPS vectors, one row per boundary-index pair.

    Row (a, b) holds the window amplitudes (M^{s_1} ... M^{s_ls})_{a b};
    offsetting the window start cycles the unit cell.
    """
    chains = []
    n = mps.unit_cell
    for start in range(n):
        tensors = [mps.tensors[(start + k) % n] for k in range(support)]
        K = mps_mod.cell_chain(tensors)
        chains.append(K.transpose(0, 2, 1).reshape(-1, K.shape[1]))
    return chains


def general_parent(mps, support, lam=None):
    """Null-space parent Hamiltonian for an arbitrary uniform MPS.

    For each unit-cell position, the density is W' diag(lam) W'^dagger
    where the rows of W' span the orthogonal complement of the windowed
    MPS vectors on `support` sites. Requires chi^2 < d^support.
    """
    d = mps.d
    chi = mps.chi
    dim = d ** support
    if chi * chi >= dim:
        raise DimensionMismatch(
            f"chi^2 = {chi * chi} must be smaller than d^support = {dim}"
        )
    densities = []
    wdims = []
    for offset, V in enumerate(windowed_mps_vectors(mps, support)):
        _, svals, vh = np.linalg.svd(V, full_matrices=True)
        rank = int(np.sum(svals > NULLSPACE_CUTOFF * max(svals[0], 1e-300)))
        W = vh[rank:]
        wdims.append(W.shape[0])
        if lam is None:
            lam_vec = np.ones(W.shape[0])
        else:
            lam_vec = np.asarray(lam, dtype=float)
            if lam_vec.shape != (W.shape[0],):
                raise DimensionMismatch(
                    f"need {W.shape[0]} lambda values, got {lam_vec.size}"
                )
            if np.any(lam_vec <= 0):
                raise ValueError("lambda values must be positive")
        # columns of W.T are the complement kets; h = sum_k lam_k |w_k><w_k|
        h = (W.T * lam_vec) @ W.conj()
        densities.append(ops.LocalOperator(support, h, offset=offset))
    return ParentHamiltonian(densities=densities, unit_cell=mps.unit_cell,
                             support=support,
                             free_params=tuple(wdims))


def annihilation_residual(mps, parent):
    """Per-site expectation of H_p^2 on the MPS (zero when frustration-free)."""
    tobj = mps_mod.build_transfer_objects(mps)
    return mps_mod.expectation(tobj, parent.squared_density()) / parent.unit_cell
