"""Local operator algebra on spin-1/2 chains.

Conventions
-----------
Physical basis order is (down, up): index 0 is the down state, index 1
is up. Bit i of a basis-state integer holds the state of site i
(1 = up), so the blockade constraint "no two adjacent up spins" reads
"no adjacent set bits". With this ordering

    sigma_z = diag(-1, +1),  P = |down><down| = diag(1, 0),
    n = |up><up| = diag(0, 1),

i.e. sigma_z gives +1 on the up state, matching the transfer-matrix
trace conventions used in the counter-diabatic cost functions.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, SizeLimit

D_PHYS = 2

ID2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, 1j], [-1j, 0]], dtype=complex)
SZ = np.array([[-1, 0], [0, 1]], dtype=complex)
P_DOWN = np.array([[1, 0], [0, 0]], dtype=complex)
N_UP = np.array([[0, 0], [0, 1]], dtype=complex)
SPLUS = np.array([[0, 0], [1, 0]], dtype=complex)   # |up><down|
SMINUS = SPLUS.T.conj()

MAX_SITES_CONSTRAINED = 16
MAX_SITES_FULL = 12


@dataclass(frozen=True)
class LocalOperator:
    """Dense operator on `support` consecutive sites starting at `offset`."""

    support: int
    matrix: np.ndarray
    offset: int = 0

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (D_PHYS ** self.support,) * 2:
            raise DimensionMismatch(
                f"matrix shape {m.shape} does not match support {self.support}"
            )
        object.__setattr__(self, "matrix", m)

    def is_hermitian(self, tol=1e-12):
        return np.max(np.abs(self.matrix - self.matrix.conj().T)) <= tol

    def shifted(self, sites):
        return LocalOperator(self.support, self.matrix, self.offset + sites)

    def scaled(self, factor):
        return LocalOperator(self.support, factor * self.matrix, self.offset)


def kron_all(*mats):
    """Kronecker product, site 0 leftmost (most significant factor first)."""
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def pauli_site(mat, offset=0):
    return LocalOperator(1, mat, offset)


def dress_with_projectors(op):
    """Sandwich an operator between down-projectors on the adjacent sites.

    Returns P (x) op (x) P with support grown by two and offset shifted
    left by one site.
    """
    return LocalOperator(
        op.support + 2, kron_all(P_DOWN, op.matrix, P_DOWN), op.offset - 1
    )


def embed(op, start, window_start, window_len):
    """Dense matrix of `op` placed at absolute site `start` inside a window."""
    left = start - window_start
    right = window_len - left - op.support
    if left < 0 or right < 0:
        raise DimensionMismatch("operator does not fit in the window")
    return kron_all(np.eye(2 ** left), op.matrix, np.eye(2 ** right))


def commutator(a, b, relative_offset=None):
    """Commutator [a, b] embedded on the union of the supports.

    `relative_offset` is the displacement of b's leftmost site relative
    to a's; by default the stored offsets are used. Disjoint supports
    give an exactly zero operator on the union window.
    """
    if relative_offset is None:
        relative_offset = b.offset - a.offset
    a_start, b_start = 0, relative_offset
    start = min(a_start, b_start)
    end = max(a_start + a.support, b_start + b.support)
    win = end - start
    am = embed(a, a_start, start, win)
    bm = embed(b, b_start, start, win)
    return LocalOperator(win, am @ bm - bm @ am, a.offset + start)


def product(a, b, relative_offset=None):
    """Operator product a*b embedded on the union of the supports."""
    if relative_offset is None:
        relative_offset = b.offset - a.offset
    a_start, b_start = 0, relative_offset
    start = min(a_start, b_start)
    end = max(a_start + a.support, b_start + b.support)
    win = end - start
    am = embed(a, a_start, start, win)
    bm = embed(b, b_start, start, win)
    return LocalOperator(win, am @ bm, a.offset + start)


@dataclass
class OperatorDensity:
    """Translation-invariant sum of local terms, one copy per unit cell.

    The density represents sum_j sum_k coeff_k * Op_k(offset_k + j*unit_cell)
    over all cells j of an infinite (or periodic) chain.
    """

    terms: list = field(default_factory=list)
    unit_cell: int = 1
    _window_cache: tuple = field(default=None, repr=False, compare=False)

    def add(self, op, coeff=1.0):
        self.terms.append((op, coeff))
        self._window_cache = None
        return self

    def scaled(self, factor):
        return OperatorDensity(
            [(op, coeff * factor) for op, coeff in self.terms], self.unit_cell
        )

    def __add__(self, other):
        if other.unit_cell != self.unit_cell:
            raise DimensionMismatch("unit cells differ")
        return OperatorDensity(self.terms + other.terms, self.unit_cell)

    def canonical_terms(self):
        """Terms shifted by whole cells so each offset lies in [0, unit_cell)."""
        out = []
        for op, coeff in self.terms:
            cells = op.offset // self.unit_cell
            out.append((op.shifted(-cells * self.unit_cell), coeff))
        return out

    def window_matrix(self):
        """Dense matrix of one cell's worth of terms on a whole-cell window.

        Returns (matrix, n_cells): all canonical terms embedded on a
        window of n_cells unit cells starting at site 0. Cached until
        the term list changes; callers must not mutate the matrix.
        """
        if self._window_cache is not None:
            return self._window_cache
        terms = self.canonical_terms()
        if not terms:
            return np.zeros((1, 1), dtype=complex), 1
        end = max(op.offset + op.support for op, _ in terms)
        n_cells = max(1, -(-end // self.unit_cell))
        win = n_cells * self.unit_cell
        mat = np.zeros((2 ** win, 2 ** win), dtype=complex)
        for op, coeff in terms:
            mat += coeff * embed(op, op.offset, 0, win)
        self._window_cache = (mat, n_cells)
        return self._window_cache

    def max_support(self):
        return max((op.support for op, _ in self.terms), default=1)


def fibonacci_basis(l, periodic=True):
    """Bit-masks of length-l spin strings with no adjacent up-up pair.

    Ordered by increasing integer value with site 0 as the least
    significant bit. Periodic chains also exclude the cyclic pair
    (site l-1, site 0).
    """
    states = []
    for s in range(2 ** l):
        if s & (s >> 1):
            continue
        if periodic and l > 1 and (s & 1) and (s >> (l - 1)) & 1:
            continue
        states.append(s)
    return np.array(states, dtype=np.int64)


def _site_rotation_perm(l, shift):
    """Basis permutation that moves site i to site (i + shift) mod l."""
    idx = np.arange(2 ** l)
    out = np.zeros_like(idx)
    for i in range(l):
        bit = (idx >> i) & 1
        out |= bit << ((i + shift) % l)
    return out


def _dense_full(density, l, boundary):
    dim = 2 ** l
    H = np.zeros((dim, dim), dtype=complex)
    terms = density.canonical_terms()
    n_cells = l // density.unit_cell if boundary == "periodic" else \
        -(-l // density.unit_cell)
    for op, coeff in terms:
        k = op.support
        # op placed on sites 0..k-1 in bit-integer convention
        base = np.kron(np.eye(2 ** (l - k)), _bitorder(op.matrix, k))
        for c in range(n_cells):
            site = c * density.unit_cell + op.offset
            if boundary == "open" and (site < 0 or site + k > l):
                continue
            site = site % l
            if site == 0:
                H += coeff * base
            else:
                perm = _site_rotation_perm(l, site)
                H[np.ix_(perm, perm)] += coeff * base
    return H


def _dense_constrained(density, l, boundary):
    basis = fibonacci_basis(l, periodic=(boundary == "periodic"))
    index = {int(s): k for k, s in enumerate(basis)}
    dim = len(basis)
    H = np.zeros((dim, dim), dtype=complex)
    terms = density.canonical_terms()
    n_cells = l // density.unit_cell if boundary == "periodic" else \
        -(-l // density.unit_cell)
    for op, coeff in terms:
        k = op.support
        mat = _bitorder(op.matrix, k)
        rows, cols = np.nonzero(mat)
        for c in range(n_cells):
            site = c * density.unit_cell + op.offset
            if boundary == "open" and (site < 0 or site + k > l):
                continue
            site = site % l
            wrapped = [(site + j) % l for j in range(k)]
            win = np.zeros(len(basis), dtype=np.int64)
            for j, sj in enumerate(wrapped):
                win |= ((basis >> sj) & 1) << j
            for r, cc in zip(rows, cols):
                val = coeff * mat[r, cc]
                for s_idx in np.nonzero(win == cc)[0]:
                    s_new = int(basis[s_idx])
                    for j, sj in enumerate(wrapped):
                        s_new &= ~(1 << sj)
                        s_new |= ((int(r) >> j) & 1) << sj
                    t_idx = index.get(s_new)
                    if t_idx is not None:
                        H[t_idx, s_idx] += val
    return H


def realize_on_finite_chain(density, l, boundary="periodic", constrained=False):
    """Dense matrix of a density on a finite chain.

    In the constrained case the matrix lives in the Fibonacci subspace
    (basis from `fibonacci_basis`); otherwise on the full 2^l space.
    """
    if boundary not in ("periodic", "open"):
        raise ValueError("boundary must be 'periodic' or 'open'")
    limit = MAX_SITES_CONSTRAINED if constrained else MAX_SITES_FULL
    if l > limit:
        raise SizeLimit(f"l={l} exceeds limit {limit}")
    if boundary == "periodic" and l % density.unit_cell != 0:
        raise DimensionMismatch("l must be a multiple of the unit cell")
    if constrained:
        return _dense_constrained(density, l, boundary)
    return _dense_full(density, l, boundary)


def project_to_constrained(vec, l, periodic=True):
    """Restrict a full 2^l state vector to the Fibonacci subspace basis."""
    basis = fibonacci_basis(l, periodic=periodic)
    return np.asarray(vec)[basis]


def apply_density_to_vector(density, vec, l, boundary="periodic"):
    """Apply a density to a full 2^l state vector (oracle helper)."""
    vec = np.asarray(vec, dtype=complex)
    out = np.zeros_like(vec)
    terms = density.canonical_terms()
    n_cells = l // density.unit_cell if boundary == "periodic" else \
        -(-l // density.unit_cell)
    for op, coeff in terms:
        k = op.support
        mat = _bitorder(op.matrix, k)
        for c in range(n_cells):
            site = c * density.unit_cell + op.offset
            if boundary == "open" and (site < 0 or site + k > l):
                continue
            site = site % l
            if site + k <= l:
                # axes (high bits, op window, low bits); site 0 is the LSB
                v = vec.reshape(2 ** (l - site - k), 2 ** k, 2 ** site)
                w = np.einsum("ab,jbk->jak", mat, v)
                out += coeff * w.reshape(-1)
            else:
                # rotate sites so the operator window sits on bits 0..k-1
                u = vec[_site_rotation_perm(l, site)]
                w = u.reshape(2 ** (l - k), 2 ** k) @ mat.T
                out += coeff * w.reshape(-1)[_site_rotation_perm(l, l - site)]
    return out


def _bitorder(mat, k):
    """Reorder a kron-built window matrix to site-0-least-significant bits.

    `kron_all` makes site 0 the most significant factor, while basis
    integers keep site 0 in the least significant bit; this flips the
    site order of the window matrix.
    """
    t = mat.reshape((2,) * (2 * k))
    perm = tuple(range(k - 1, -1, -1)) + tuple(range(2 * k - 1, k - 1, -1))
    return t.transpose(perm).reshape(2 ** k, 2 ** k)
