"""Time-evolution engines for verifying steered protocols.

Infinite-system TEBD on a two-supersite unit cell in Schmidt-decomposed
(canonical) form, with first-order Trotter steps and exact gate
exponentials; a dense finite-chain propagator as an oracle; and the
fidelity-density / entanglement observables used to compare methods.

Generators with terms wider than two sites are handled by blocking
`block` physical sites into one supersite, after which every term fits
inside a two-supersite gate window.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm, svd

from . import mps as mps_mod, operators as ops
from .errors import DimensionMismatch, TruncationOverflow

TRUNCATION_MAX_PER_STEP = 1e-6
SCHMIDT_CUTOFF = 1e-14
FIDELITY_CAP = 1e3


@dataclass
class EvolvingState:
    """Canonical (Vidal-form) infinite MPS on a two-supersite unit cell.

    The state reads ... lamB GA lamA GB lamB ... with diagonal Schmidt
    vectors on the bonds; `block` physical sites are merged into one
    supersite of dimension d**block.
    """

    gammas: list            # two (chi_l, D, chi_r) tensors
    lams: list              # two Schmidt vectors: lams[0] after gammas[0]
    block: int              # physical sites per supersite
    d: int                  # physical dimension per site
    chi_max: int
    truncation_error: float = 0.0

    @property
    def sites_per_cell(self):
        return 2 * self.block

    def check(self, tol=1e-10):
        for lam in self.lams:
            if np.any(lam < -tol) or np.any(np.diff(lam) > tol):
                raise ValueError("Schmidt values must be nonnegative descending")
            if abs(np.sum(lam ** 2) - 1.0) > tol:
                raise ValueError("Schmidt spectrum not normalized")

    def site_tensors(self):
        """Right-canonical supersite tensors (G lam form), bond-0 leading."""
        a = self.gammas[0] * self.lams[0][None, None, :]
        b = self.gammas[1] * self.lams[1][None, None, :]
        return [a, b]

    def cell_chain(self):
        return mps_mod.cell_chain(self.site_tensors())


def _fixed_point_factor(T, side, chi):
    """Hermitian square-root factor of the dominant transfer fixed point."""
    _, vec = mps_mod.linalg.dominant_eigenpair(T, side=side)
    m = vec.reshape(chi, chi)
    m = (m + m.conj().T) / 2
    vals, U = np.linalg.eigh(m)
    if vals[np.argmax(np.abs(vals))] < 0:
        vals = -vals
    vals = np.clip(vals, 0.0, None)
    root = np.sqrt(vals)
    if side == "left":
        # l = X^dag X with X = sqrt(vals) U^dag
        return (U * root).conj().T
    return U * root


def canonical_from_tensor(M, chi_max, block, d):
    """Vidal-form two-supersite state from one uniform supersite tensor."""
    chi = M.shape[0]
    T = mps_mod.transfer_from_chain(M)
    eta = np.linalg.eigvals(T)
    M = M / np.sqrt(np.max(np.abs(eta)))
    T = mps_mod.transfer_from_chain(M)
    X = _fixed_point_factor(T, "left", chi)
    Y = _fixed_point_factor(T, "right", chi)
    U, s, Vh = svd(X @ Y)
    keep = s > SCHMIDT_CUTOFF * s[0]
    U, s, Vh = U[:, keep], s[keep], Vh[keep]
    lam = s / np.linalg.norm(s)
    Xi = np.linalg.pinv(X, rcond=1e-12)
    Yi = np.linalg.pinv(Y, rcond=1e-12)
    # gamma carries norm(s) so that gamma * lam matches the transform by
    # the unnormalized Schmidt values (keeps the tensors right-canonical)
    gamma = np.einsum("ab,bsc,cd->asd", Vh @ Yi, M, Xi @ U) * np.linalg.norm(s)
    state = EvolvingState(gammas=[gamma.copy(), gamma.copy()],
                          lams=[lam.copy(), lam.copy()],
                          block=block, d=d, chi_max=chi_max)
    # one bare sweep re-resolves the two bonds after the rank truncation
    return state


def from_uniform(umps, chi_max, block=None):
    """Canonical evolving state from a uniform MPS, blocking the unit cell."""
    if block is None:
        block = umps.unit_cell
    if block % umps.unit_cell != 0:
        raise DimensionMismatch("block must be a multiple of the unit cell")
    reps = block // umps.unit_cell
    K = mps_mod.cell_chain(list(umps.tensors) * reps)
    return canonical_from_tensor(K, chi_max, block, umps.d)


def gate_matrix(density, block, d, dt):
    """Exact exponential exp(-i dt h) of the per-cell generator window.

    Every canonical term must fit inside two supersites (2*block sites).
    """
    window = 2 * block
    dim = d ** window
    h = np.zeros((dim, dim), dtype=complex)
    for op, coeff in density.canonical_terms():
        if op.offset + op.support > window:
            raise DimensionMismatch(
                f"term on sites [{op.offset}, {op.offset + op.support}) "
                f"exceeds the {window}-site gate window"
            )
        h = h + coeff * ops.embed(op, op.offset, 0, window)
    return expm(-1j * dt * h)


def _apply_gate(state, gate, bond):
    """Apply a two-supersite gate across `bond` (0: GA-GB, 1: GB-GA)."""
    i, j = (0, 1) if bond == 0 else (1, 0)
    lam_out = state.lams[j]
    lam_mid = state.lams[i]
    gi, gj = state.gammas[i], state.gammas[j]
    D = gi.shape[1]
    theta = np.einsum("a,asb,b,btc,c->astc", lam_out, gi, lam_mid, gj,
                      lam_out, optimize=True)
    chi_l = theta.shape[0]
    chi_r = theta.shape[3]
    th = theta.reshape(chi_l, D * D, chi_r)
    th = np.einsum("st,atb->asb", gate, th)
    mat = th.reshape(chi_l * D, D * chi_r)
    U, s, Vh = svd(mat, full_matrices=False, lapack_driver="gesvd")
    norm2 = np.sum(s ** 2)
    keep = min(state.chi_max, int(np.sum(s > SCHMIDT_CUTOFF * s[0])))
    discarded = float(np.sum(s[keep:] ** 2) / norm2)
    if discarded > TRUNCATION_MAX_PER_STEP:
        raise TruncationOverflow(
            f"discarded Schmidt weight {discarded:.2e} exceeds "
            f"{TRUNCATION_MAX_PER_STEP:.0e} in one step; raise chi_max"
        )
    state.truncation_error += discarded
    U, s, Vh = U[:, :keep], s[:keep], Vh[:keep]
    lam_new = s / np.linalg.norm(s)
    inv_out = np.where(lam_out > SCHMIDT_CUTOFF, 1.0 / lam_out, 0.0)
    gi_new = np.einsum("a,asb->asb", inv_out,
                       U.reshape(chi_l, D, keep))
    gj_new = np.einsum("asb,b->asb", Vh.reshape(keep, D, chi_r), inv_out)
    state.gammas[i] = gi_new
    state.gammas[j] = gj_new
    state.lams[i] = lam_new
    return state


def itebd_step(state, density, dt):
    """First-order Trotter step of the per-cell generator density."""
    gate = gate_matrix(density, state.block, state.d, dt)
    _apply_gate(state, gate, 0)
    _apply_gate(state, gate, 1)
    return state


def entanglement_entropy(state):
    """Von Neumann entropies of the two unit-cell bonds."""
    out = []
    for lam in state.lams:
        p = lam ** 2
        p = p[p > 1e-30]
        out.append(float(-np.sum(p * np.log(p))))
    return tuple(out)


def fidelity_density(target, state):
    """-(1/l) log |<target|state>|^2 from the mixed transfer spectrum.

    `target` is a UniformMPS; both states are normalized internally.
    The value is clipped to [0, FIDELITY_CAP].
    """
    sites = state.sites_per_cell
    if sites % target.unit_cell != 0:
        raise DimensionMismatch("unit cells are incompatible after blocking")
    reps = sites // target.unit_cell
    Kt = mps_mod.cell_chain(list(target.tensors) * reps)
    Tt = mps_mod.transfer_from_chain(Kt)
    eta_t = np.max(np.abs(np.linalg.eigvals(Tt)))
    Kt = Kt / np.sqrt(eta_t)
    Ks = state.cell_chain()
    mixed = mps_mod.transfer_from_chain(Ks, Kt)
    eta = np.max(np.abs(np.linalg.eigvals(mixed)))
    if eta <= 0:
        return FIDELITY_CAP
    f = -2.0 * np.log(eta) / sites
    return float(min(max(f, 0.0), FIDELITY_CAP))


def run_itebd(state, density_at, t_final, dt, target_at=None, record_every=10):
    """Evolve with a time-dependent generator, recording observables.

    `density_at(t)` returns the per-cell generator density; `target_at(t)`
    (optional) the instantaneous target UniformMPS for the fidelity
    column. Returns a record array with columns t, f, S1, S2, trunc.
    """
    rows = []

    def record(t):
        f = fidelity_density(target_at(t), state) if target_at else 0.0
        s1, s2 = entanglement_entropy(state)
        rows.append((t, f, s1, s2, state.truncation_error))

    n_steps = int(round(t_final / dt))
    record(0.0)
    for k in range(n_steps):
        t_mid = (k + 0.5) * dt
        itebd_step(state, density_at(t_mid), dt)
        if (k + 1) % record_every == 0 or k == n_steps - 1:
            record((k + 1) * dt)
    return np.array(rows)


def dense_evolve(density_at, l, psi0, t_final, dt, boundary="periodic",
                 constrained=False, store_every=None):
    """4th-order commutator-free propagation of i d_t psi = A(t) psi.

    `density_at(t)` returns the generator as an OperatorDensity; the
    dense realization reuses the finite-chain builders (and their size
    limits). Returns (times, states) including the initial state.
    """
    c1 = 0.5 - np.sqrt(3) / 6
    c2 = 0.5 + np.sqrt(3) / 6
    a1 = 0.25 - np.sqrt(3) / 6
    a2 = 0.25 + np.sqrt(3) / 6

    def mat(t):
        return ops.realize_on_finite_chain(density_at(t), l,
                                           boundary=boundary,
                                           constrained=constrained)

    n_steps = int(round(t_final / dt))
    psi = np.array(psi0, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    times = [0.0]
    states = [psi.copy()]
    for k in range(n_steps):
        t = k * dt
        A1 = mat(t + c1 * dt)
        A2 = mat(t + c2 * dt)
        psi = expm(-1j * dt * (a1 * A1 + a2 * A2)) @ (
            expm(-1j * dt * (a2 * A1 + a1 * A2)) @ psi)
        if store_every is None or (k + 1) % store_every == 0 \
                or k == n_steps - 1:
            times.append((k + 1) * dt)
            states.append(psi.copy())
    return np.array(times), np.array(states)
