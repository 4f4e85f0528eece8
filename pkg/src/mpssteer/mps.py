"""Uniform infinite MPS machinery.

Transfer matrices, dominant fixed points, the channel pseudo-inverse and
thermodynamic-limit connected correlators per unit cell. All correlators
are assembled by one generic routine that places "insertions" (operator
windows, ket-derivative tensors, bra-derivative tensors) on whole-cell
windows and resums the separated contributions through the transfer
pseudo-inverse.

Index conventions: MPS tensors are (chi_left, d, chi_right); transfer
matrices act on merged (ket_aux, bra_aux) indices, built as
kron(ket, conj(bra)); (L| is a row fixed point, |R) a column one.
Merged physical indices of a multi-site window put the leftmost site in
the most significant position, matching `operators.kron_all`.
"""

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import DimensionMismatch


@dataclass
class UniformMPS:
    """Translation-invariant infinite MPS with a finite unit cell."""

    tensors: list

    def __post_init__(self):
        self.tensors = [np.asarray(t, dtype=complex) for t in self.tensors]
        for i, t in enumerate(self.tensors):
            t_next = self.tensors[(i + 1) % len(self.tensors)]
            if t.shape[2] != t_next.shape[0]:
                raise DimensionMismatch("bond dimensions do not chain")

    @property
    def unit_cell(self):
        return len(self.tensors)

    @property
    def d(self):
        return self.tensors[0].shape[1]

    @property
    def chi(self):
        return self.tensors[0].shape[0]

    def scaled(self, factor):
        return UniformMPS([factor * t for t in self.tensors])

    def phase_rotated(self, alpha):
        return self.scaled(np.exp(1j * alpha))


def cell_chain(tensors):
    """Contract the unit-cell tensors into one (chi, D, chi) tensor.

    The merged physical index has the leftmost site most significant.
    """
    K = tensors[0]
    for t in tensors[1:]:
        K = np.einsum("asb,btc->astc", K, t).reshape(
            K.shape[0], K.shape[1] * t.shape[1], t.shape[2]
        )
    return K


def cell_chain_derivative(tensors, dtensors):
    """Derivative of `cell_chain` via the product rule."""
    if len(dtensors) != len(tensors):
        raise DimensionMismatch("dtensors length mismatch")
    out = None
    for i in range(len(tensors)):
        mod = [dtensors[i] if j == i else tensors[j] for j in range(len(tensors))]
        term = cell_chain(mod)
        out = term if out is None else out + term
    return out


def transfer_from_chain(K, B=None):
    """Transfer matrix sum_s K^s (x) conj(B^s) as a (chi^2, chi^2) matrix."""
    if B is None:
        B = K
    a, s, b = K.shape
    c, _, d = B.shape
    M = (K.transpose(0, 2, 1).reshape(a * b, s)
         @ B.conj().transpose(1, 0, 2).reshape(s, c * d))
    return M.reshape(a, b, c, d).transpose(0, 2, 1, 3).reshape(a * c, b * d)


def operator_transfer(kets, bras, opmat=None):
    """Window transfer matrix with an operator sandwiched between the layers.

    `kets`/`bras` are lists of cell-chain tensors (one per window cell);
    `opmat` acts on the merged physical index of the whole window
    (row = bra index, col = ket index). With no operator the physical
    indices are traced against each other.
    """
    K = cell_chain(kets)
    B = cell_chain(bras)
    if opmat is None:
        return transfer_from_chain(K, B)
    a, s, b = K.shape
    Kop = (opmat @ K.transpose(1, 0, 2).reshape(s, a * b)).reshape(s, a, b)
    return transfer_from_chain(Kop.transpose(1, 0, 2), B)


@dataclass
class TransferObjects:
    """Unit-cell transfer matrix with fixed points and pseudo-inverse."""

    mps: UniformMPS
    T: np.ndarray
    L: np.ndarray
    R: np.ndarray
    lam: complex
    Tinv: np.ndarray
    K: np.ndarray  # cell chain of the (rescaled) tensors
    scale: float = 1.0  # per-tensor factor applied by the rescaling

    @property
    def lr(self):
        return self.L @ self.R

    @property
    def sites(self):
        return self.mps.unit_cell

    @property
    def projector(self):
        return np.outer(self.R, self.L) / self.lr


def build_transfer_objects(mps):
    """Fixed points and channel pseudo-inverse of the cell transfer matrix.

    The dominant eigenvalue is normalized to one by rescaling the
    tensors; the rescaled MPS is stored on the returned object.
    """
    K = cell_chain(mps.tensors)
    T = transfer_from_chain(K)
    lam, R = linalg.dominant_eigenpair(T, side="right")
    if abs(lam.imag) > 1e-10 * abs(lam) or lam.real <= 0:
        raise DimensionMismatch(f"transfer eigenvalue {lam} is not positive")
    lam = lam.real
    n = mps.unit_cell
    scale = lam ** (-1.0 / (2 * n))
    mps = mps.scaled(scale)
    K = K * lam ** (-0.5)
    T = T / lam
    _, L = linalg.dominant_eigenpair(T, side="left")
    _, R = linalg.dominant_eigenpair(T, side="right")
    # fix phases so (L|R) is real positive
    lr = L @ R
    L = L * (abs(lr) / lr)
    P = np.outer(R, L) / (L @ R)
    Tinv = linalg.pseudo_inverse_on_complement(T, P)
    return TransferObjects(mps=mps, T=T, L=L, R=R, lam=1.0, Tinv=Tinv, K=K,
                           scale=scale)


@dataclass
class Insertion:
    """One extensive density to be placed on whole-cell windows."""

    n_cells: int = 1
    op: np.ndarray = None        # acts on the merged window physical index
    ket_deriv: np.ndarray = None  # replacement cell chain for the ket layer
    bra_deriv: np.ndarray = None  # replacement cell chain for the bra layer


def operator_insertion(tobj, density):
    """Insertion for an operator density (unit cell must match the MPS)."""
    if density.unit_cell != tobj.sites:
        raise DimensionMismatch("density unit cell does not match the MPS")
    opmat, n_cells = density.window_matrix()
    return Insertion(n_cells=n_cells, op=opmat)


def tangent_insertion(tobj, dtensors, layer="ket"):
    """Insertion replacing one cell chain with its parameter derivative.

    `dtensors` are derivatives of the caller's (unrescaled) tensors; they
    pick up the same per-tensor factor as the stored rescaled cell.
    """
    dK = cell_chain_derivative(tobj.mps.tensors,
                               [d * tobj.scale for d in dtensors])
    if layer == "ket":
        return Insertion(n_cells=1, ket_deriv=dK)
    return Insertion(n_cells=1, bra_deriv=dK)


_EMBED_CACHE = {}


def _embed_cells(opmat, pos, span, window, d_cell):
    # keyed on the array's identity: the hot paths re-embed the same
    # control-density window matrices at every trajectory point
    key = (id(opmat), pos, span, window, d_cell)
    hit = _EMBED_CACHE.get(key)
    if hit is not None and hit[0] is opmat:
        return hit[1]
    left = np.eye(d_cell ** pos)
    right = np.eye(d_cell ** (window - pos - span))
    out = np.kron(np.kron(left, opmat), right)
    if len(_EMBED_CACHE) > 256:
        _EMBED_CACHE.clear()
    _EMBED_CACHE[key] = (opmat, out)
    return out


def _single_transfer(tobj, ins):
    kets = [tobj.K] * ins.n_cells
    bras = [tobj.K] * ins.n_cells
    if ins.ket_deriv is not None:
        kets[0] = ins.ket_deriv
    if ins.bra_deriv is not None:
        bras[0] = ins.bra_deriv
    return operator_transfer(kets, bras, ins.op)


def _joint_transfer(tobj, X, Y, k):
    """Transfer matrix of X at cell 0 and Y at cell k on the union window."""
    w0 = min(0, k)
    w1 = max(X.n_cells, k + Y.n_cells)
    W = w1 - w0
    d_cell = tobj.K.shape[1]
    kets = [tobj.K] * W
    bras = [tobj.K] * W
    for ins, pos in ((X, -w0), (Y, k - w0)):
        if ins.ket_deriv is not None:
            kets[pos] = ins.ket_deriv
        if ins.bra_deriv is not None:
            bras[pos] = ins.bra_deriv
    op = None
    if X.op is not None:
        op = _embed_cells(X.op, -w0, X.n_cells, W, d_cell)
    if Y.op is not None:
        op_y = _embed_cells(Y.op, k - w0, Y.n_cells, W, d_cell)
        op = op_y if op is None else op @ op_y
    return operator_transfer(kets, bras, op)


def _value(tobj, E):
    return (tobj.L @ E @ tobj.R) / tobj.lr


def connected_cross(tobj, X, Y):
    """Extensive part, per unit cell, of the connected correlator <X Y>_c.

    X is placed to the left of Y in the operator product. Overlapping
    placements are evaluated on joint windows with the disconnected
    product subtracted once per placement; separated placements resum
    into the transfer pseudo-inverse.
    """
    EX = _single_transfer(tobj, X)
    EY = _single_transfer(tobj, Y)
    xbar = _value(tobj, EX)
    ybar = _value(tobj, EY)
    total = (tobj.L @ EX @ (tobj.Tinv @ (EY @ tobj.R))) / tobj.lr
    total += (tobj.L @ EY @ (tobj.Tinv @ (EX @ tobj.R))) / tobj.lr
    for k in range(-Y.n_cells + 1, X.n_cells):
        total += _value(tobj, _joint_transfer(tobj, X, Y, k)) - xbar * ybar
    return total


def expectation(tobj, density):
    """Expectation value of a density per unit cell.

    Accepts a UniformMPS or prebuilt TransferObjects. Real for Hermitian
    densities; the (tiny) imaginary part is dropped.
    """
    if isinstance(tobj, UniformMPS):
        tobj = build_transfer_objects(tobj)
    val = _value(tobj, _single_transfer(tobj, operator_insertion(tobj, density)))
    return float(val.real)


def connected_two_point(tobj, o1, o2):
    """Extensive part per unit cell of <O1 O2>_c for two densities."""
    if isinstance(tobj, UniformMPS):
        tobj = build_transfer_objects(tobj)
    X = operator_insertion(tobj, o1)
    Y = operator_insertion(tobj, o2)
    return connected_cross(tobj, X, Y)


def tangent_overlaps(tobj, dtensors, density=None):
    """Extensive part per cell of <d_t psi| density |psi>_c.

    With `density=None` returns the tangent Gram term
    <d_t psi | d_t psi>_c instead.
    """
    if isinstance(tobj, UniformMPS):
        tobj = build_transfer_objects(tobj)
    X = tangent_insertion(tobj, dtensors, layer="bra")
    if density is None:
        Y = tangent_insertion(tobj, dtensors, layer="ket")
    else:
        Y = operator_insertion(tobj, density)
    return connected_cross(tobj, X, Y)


def mixed_cell_eigval(tensors_ket, tensors_bra):
    """Dominant eigenvalue of the mixed cell transfer <bra cell|ket cell>."""
    E = transfer_from_chain(cell_chain(tensors_ket), cell_chain(tensors_bra))
    vals = np.linalg.eigvals(E)
    return vals[np.argmax(np.abs(vals))]


def finite_state_vector(mps, l, dtensors=None):
    """Exact periodic-chain state vector (oracle helper).

    Basis integers carry site i in bit i. With `dtensors` also returns
    the tangent vector (sum over sites of single-tensor replacements).
    """
    n = mps.unit_cell
    if l % n != 0:
        raise DimensionMismatch("l must be a multiple of the unit cell")
    chi = mps.chi
    d = mps.d
    V = np.eye(chi, dtype=complex)[None, :, :]
    dV = np.zeros_like(V) if dtensors is not None else None
    for site in range(l):
        M = mps.tensors[site % n]
        W = np.einsum("tab,bsc->stac", V, M)
        W = W.reshape(-1, chi, chi)
        if dtensors is not None:
            dM = dtensors[site % n]
            dW = np.einsum("tab,bsc->stac", dV, M) + \
                np.einsum("tab,bsc->stac", V, dM)
            dV = dW.reshape(-1, chi, chi)
        V = W
    psi = np.einsum("taa->t", V)
    if dtensors is not None:
        return psi, np.einsum("taa->t", dV)
    return psi
