"""Dense complex linear algebra primitives.

Everything here operates on plain numpy arrays. Matrices stay small
(transfer matrices are at most chi^2 x chi^2 with chi <= 64), so dense
decompositions are used throughout, with a shifted power iteration as a
fallback for the dominant eigenpair.
"""

import numpy as np
import scipy.linalg

from .errors import DegenerateSpectrum, SingularComplement

DEGENERACY_TOL = 1e-10
DENSE_EIG_MAX = 64 ** 2


def dominant_eigenpair(M, side="right"):
    """Dominant eigenvalue and eigenvector of a square matrix.

    Parameters
    ----------
    M : (n, n) ndarray
    side : "right" or "left"
        "left" returns v with v @ M = lam * v.

    Returns
    -------
    lam : complex
    v : (n,) ndarray, unit 2-norm

    Raises
    ------
    DegenerateSpectrum
        If the two largest eigenvalue moduli differ by less than
        DEGENERACY_TOL relative to the largest.
    """
    M = np.asarray(M)
    n, m = M.shape
    if n != m:
        raise ValueError("matrix must be square")
    A = M.T if side == "left" else M
    if n <= DENSE_EIG_MAX:
        vals, vecs = np.linalg.eig(A)
        order = np.argsort(-np.abs(vals))
        lam = vals[order[0]]
        if n > 1:
            gap = abs(lam) - abs(vals[order[1]])
            if abs(lam) == 0 or gap < DEGENERACY_TOL * abs(lam):
                raise DegenerateSpectrum(
                    f"dominant eigenvalue modulus gap {gap:.3e} below tolerance"
                )
        v = vecs[:, order[0]]
    else:
        lam, v = _power_iteration(A)
    v = v / np.linalg.norm(v)
    return lam, v


def _power_iteration(A, tol=1e-14, maxiter=100000):
    """Shifted power iteration for the dominant eigenpair of a large matrix."""
    n = A.shape[0]
    rng = np.random.default_rng(0)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    # Shift by the spectral-radius bound to damp oscillating subdominant modes.
    shift = np.linalg.norm(A, np.inf)
    lam = 0.0
    for _ in range(maxiter):
        w = A @ v + shift * v
        nw = np.linalg.norm(w)
        if nw == 0:
            raise DegenerateSpectrum("power iteration collapsed to zero vector")
        w /= nw
        lam_new = w @ (A @ w) / (w @ w)
        if abs(lam_new - lam) < tol * max(1.0, abs(lam_new)):
            v = w
            lam = lam_new
            break
        v, lam = w, lam_new
    res = np.linalg.norm(A @ v - lam * v)
    if res > 1e-10 * max(1.0, abs(lam)):
        raise DegenerateSpectrum(
            f"power iteration failed to converge (residual {res:.3e})"
        )
    return lam, v


def pseudo_inverse_on_complement(M, P):
    """Inverse of (1 - M) restricted to the complement of a projector.

    Returns Q (1 - Q M Q)^{-1} Q with Q = 1 - P. The result annihilates
    the range of P from both sides.

    Parameters
    ----------
    M : (n, n) ndarray
    P : (n, n) ndarray
        Idempotent projector (P @ P == P to 1e-12).

    Raises
    ------
    SingularComplement
        If (1 - Q M Q) is numerically singular.
    """
    M = np.asarray(M, dtype=complex)
    P = np.asarray(P, dtype=complex)
    if np.max(np.abs(P @ P - P)) > 1e-10:
        raise ValueError("P is not an idempotent projector")
    n = M.shape[0]
    Q = np.eye(n) - P
    core = np.eye(n) - Q @ M @ Q
    # Condition check on the complement: core must be invertible there.
    try:
        inv = scipy.linalg.solve(core, Q)
    except scipy.linalg.LinAlgError as exc:
        raise SingularComplement(str(exc)) from exc
    resid = np.linalg.norm(core @ inv - Q)
    if not np.isfinite(resid) or resid > 1e-8 * max(1.0, np.linalg.norm(Q)):
        raise SingularComplement(f"complement solve residual {resid:.3e}")
    return Q @ inv


def hermitian_check(M, tol=1e-12):
    """True if M equals its conjugate transpose elementwise within tol."""
    M = np.asarray(M)
    return np.max(np.abs(M - M.conj().T)) <= tol


def pinv_psd(D, rel_cutoff=1e-12):
    """Pseudo-inverse of a symmetric PSD matrix with a relative eigenvalue cutoff.

    Kernel directions (eigenvalues below rel_cutoff times the largest)
    are mapped to zero, so the kernels of D and the result coincide.
    """
    D = np.asarray(D)
    vals, vecs = np.linalg.eigh((D + D.conj().T) / 2)
    top = np.max(np.abs(vals)) if vals.size else 0.0
    inv = np.where(np.abs(vals) > rel_cutoff * max(top, 1e-300), 1.0 / vals, 0.0)
    return (vecs * inv) @ vecs.conj().T
