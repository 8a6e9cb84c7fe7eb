"""Small dense symmetric linear algebra used by the estimator.

Cyclic Jacobi eigensolver, SPD inverse square root, exact joint
diagonalization (EJD) of a pair of symmetric matrices, vec operators, the
duplication matrix, the eigenstructure Jacobian and the repeated-eigenvalue
helpers.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln

from .series import NumericalError, ValidationError

SPD_RTOL = 1e-12
EIGENGAP_WARN = 1e-3


class DegenerateWarning(UserWarning):
    """Eigenvalue ratios too close for the demixing rotation to be identified."""


@dataclass
class EigDecomp:
    values: np.ndarray    # ascending
    vectors: np.ndarray   # columns matched to values
    sweeps: int = 0
    ties: bool = False


def _fix_signs(O):
    """Make the first nonzero entry of each column (scanning rows) nonnegative."""
    O = O.copy()
    for c in range(O.shape[1]):
        col = O[:, c]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size and col[nz[0]] < 0:
            O[:, c] = -col
    return O


def jacobi_eigh(S, max_sweeps=100) -> EigDecomp:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Eigenvalues ascending (stable sort, so repeated values keep input order);
    eigenvectors signed so the first row is nonnegative.
    """
    A = np.array(S, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError("jacobi_eigh needs a square matrix")
    n = A.shape[0]
    scale = max(np.linalg.norm(A), np.finfo(float).tiny)
    if np.abs(A - A.T).max() > 1e-10 * scale:
        raise ValidationError("matrix is not symmetric")
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    tol = 1e-14 * scale
    sweeps = 0
    mask = ~np.eye(n, dtype=bool)
    off = np.sqrt(np.sum(A[mask] ** 2))
    while off > tol:
        if sweeps >= max_sweeps:
            raise NumericalError(f"Jacobi did not converge in {max_sweeps} sweeps (off={off:.3e})")
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2 * apq)
                if theta == 0:
                    t = 1.0
                else:
                    t = np.sign(theta) / (abs(theta) + np.hypot(theta, 1.0))
                c = 1 / np.sqrt(t * t + 1)
                s = t * c
                Ap, Aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * Ap - s * Aq
                A[:, q] = s * Ap + c * Aq
                Ap, Aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * Ap - s * Aq
                A[q, :] = s * Ap + c * Aq
                A[p, q] = A[q, p] = 0.0
                Vp, Vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * Vp - s * Vq
                V[:, q] = s * Vp + c * Vq
        off = np.sqrt(np.sum(A[mask] ** 2))
    vals = np.diag(A).copy()
    order = np.argsort(vals, kind="stable")
    vals, V = vals[order], V[:, order]
    gaps = np.diff(vals)
    ties = bool(np.any(gaps <= 1e-12 * scale)) if n > 1 else False
    return EigDecomp(vals, _fix_signs(V), sweeps, ties)


def inv_sqrt_spd(C) -> np.ndarray:
    """Symmetric ``C^(-1/2)``; raises if C is not (numerically) positive definite."""
    e = jacobi_eigh(C)
    lo, hi = e.values[0], e.values[-1]
    if hi <= 0 or lo <= SPD_RTOL * hi:
        raise ValidationError(f"matrix is not positive definite (min eigenvalue {lo:.3e})")
    O = e.vectors
    W = (O / np.sqrt(e.values)) @ O.T
    return 0.5 * (W + W.T)


@dataclass
class EjdResult:
    B: np.ndarray
    W: np.ndarray
    Q: np.ndarray
    lam: np.ndarray
    eigengap: float
    sign_matrix: np.ndarray
    degenerate: bool = False
    sign_ambiguous: bool = False


def _relative_gaps(vals):
    if vals.size < 2:
        return np.array([np.inf])
    a, b = vals[:-1], vals[1:]
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), np.finfo(float).tiny)
    return (b - a) / denom


def ejd(C0, C1, warn=True) -> EjdResult:
    """Exact joint diagonalization: ``B = Q W`` with ``W = C0^(-1/2)``.

    Rows of Q are the eigenvectors of ``W C1 W`` in ascending eigenvalue
    order, each flipped so the diagonal of Q is nonnegative.  Then
    ``B C0 B^T = I`` and ``B C1 B^T = diag(lam)``.
    """
    C0 = np.asarray(C0, dtype=float)
    C1 = np.asarray(C1, dtype=float)
    W = inv_sqrt_spd(C0)
    M = W @ (0.5 * (C1 + C1.T)) @ W
    e = jacobi_eigh(0.5 * (M + M.T))
    Q0 = e.vectors.T
    diag = np.diag(Q0)
    signs = np.where(diag < 0, -1.0, 1.0)
    ambiguous = bool(np.any(np.abs(diag) < 1e-12))
    Q = signs[:, None] * Q0
    gaps = _relative_gaps(e.values)
    gap = float(gaps.min())
    degenerate = gap < EIGENGAP_WARN
    if degenerate and warn:
        warnings.warn(f"EJD eigenvalue ratios nearly repeated (relative gap {gap:.2e})",
                      DegenerateWarning, stacklevel=2)
    return EjdResult(Q @ W, W, Q, e.values, gap, np.diag(signs), degenerate, ambiguous)


# ---------------------------------------------------------------------------
# vec operators and the duplication matrix
# ---------------------------------------------------------------------------

def vec(A) -> np.ndarray:
    """Column-major stacking of all entries."""
    return np.asarray(A).ravel(order="F")


def vec_d(A) -> np.ndarray:
    return np.diag(np.asarray(A)).copy()


def vec_s(A) -> np.ndarray:
    """Lower-triangular entries, column by column."""
    A = np.asarray(A)
    n = A.shape[0]
    return np.concatenate([A[c:, c] for c in range(n)])


def _vech_index(n):
    """Map (row, col) with row >= col to its position in vec_s."""
    idx = {}
    k = 0
    for c in range(n):
        for r in range(c, n):
            idx[(r, c)] = k
            k += 1
    return idx


def duplication(n) -> np.ndarray:
    """Zero-one ``D`` with ``D vec_s(A) = vec(A + A^T - dg(A))``."""
    idx = _vech_index(n)
    D = np.zeros((n * n, n * (n + 1) // 2))
    for c in range(n):
        for r in range(n):
            D[c * n + r, idx[(max(r, c), min(r, c))]] = 1.0
    return D


def pinv(A, rtol: Optional[float] = None) -> np.ndarray:
    """Moore-Penrose inverse via the SVD, singular values below ``rtol * s_max`` dropped."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if rtol is None:
        rtol = max(A.shape) * np.finfo(float).eps
    return np.linalg.pinv(A, rcond=rtol)


def eigen_jacobian(S, gap_tol=1e-8) -> np.ndarray:
    """Derivative of (eigenvalues, vec(eigenvectors)) with respect to vec_s(S).

    Rows ``(o_i^T kron o_i^T) D`` for each eigenvalue, then
    ``(o_i^T kron (lam_i I - S)^+) D`` for each eigenvector.  The
    pseudoinverse is assembled from the spectral decomposition,
    ``sum_{k != i} o_k o_k^T / (lam_i - lam_k)``, which is exact when the
    eigenvalues are simple.
    """
    S = np.asarray(S, dtype=float)
    n = S.shape[0]
    e = jacobi_eigh(S)
    lam, O = e.values, e.vectors
    scale = max(np.linalg.norm(S, 2), np.finfo(float).tiny)
    if n > 1 and np.diff(lam).min() <= gap_tol * scale:
        raise ValidationError("eigenvalues are not pairwise distinct; Jacobian undefined")
    D = duplication(n)
    rows = [np.kron(O[:, i], O[:, i]) @ D for i in range(n)]
    for i in range(n):
        diff = lam[i] - lam
        inv = np.where(np.arange(n) == i, 0.0, 1.0 / np.where(diff == 0, 1.0, diff))
        Pi = (O * inv) @ O.T
        rows.append(np.kron(O[:, i][None, :], Pi) @ D)
    return np.vstack([np.atleast_2d(r) for r in rows])


# ---------------------------------------------------------------------------
# repeated eigenvalues
# ---------------------------------------------------------------------------

def b_constant(basis, j, d, tol=1e-10, max_terms=10_000) -> float:
    """``b = sum_z rho(z)^2`` for the lag correlations of octave-``j`` coefficients.

    The ratio of integrals defining rho(z) is invariant under the change of
    variable ``y = 2^j x``, so ``j`` only fixes which octave is meant.
    """
    from .dwt import lag_correlations

    if j < 0:
        raise ValidationError("octave must be nonnegative")
    total = 1.0
    small = 0
    z = 1
    block = 16
    while z <= max_terms:
        lags = np.arange(z, min(z + block, max_terms + 1))
        rho = lag_correlations(basis, d, lags)
        for r in rho:
            term = 2 * r * r
            total += term
            small = small + 1 if term < tol * total else 0
            if small >= 2:
                return total
        z = lags[-1] + 1
        block = min(2 * block, 256)
    raise NumericalError(f"b series did not converge within {max_terms} terms")


def multigammaln(t, q) -> float:
    """log of the multivariate gamma function Gamma_q(t)."""
    i = np.arange(1, q + 1)
    return q * (q - 1) / 4 * np.log(np.pi) + float(np.sum(gammaln(t - (i - 1) / 2)))


def repeated_eig_density(a, lambda_star, b, q=None) -> float:
    """Limiting density of the q eigenvalue fluctuations around a repeated eigenvalue.

    The fluctuation block is a symmetric Gaussian matrix with diagonal
    variance ``2 b lambda*^2`` and off-diagonal variance ``b lambda*^2``;
    its ordered eigenvalues ``a_1 < ... < a_q`` have density

        c_q exp(-sum a_i^2 / (4 b lambda*^2)) prod_{l<i} (a_i - a_l)

    with ``c_q`` fixed so the density integrates to one over the ordered cone.
    """
    a = np.asarray(a, dtype=float)
    q = a.size if q is None else q
    if q < 2 or a.size != q:
        raise ValidationError("need q >= 2 ordered values")
    if lambda_star <= 0 or b < 1:
        raise ValidationError("need lambda_star > 0 and b >= 1")
    sigma2 = b * lambda_star ** 2
    vdm = 1.0
    for i in range(q):
        for l in range(i):
            vdm *= a[i] - a[l]
    if vdm <= 0:
        return 0.0
    return float(np.exp(_log_norm_const(q, sigma2) - np.sum(a ** 2) / (4 * sigma2)) * vdm)


def _log_norm_const(q, sigma2):
    # Mehta integral with exponent 1/2:
    # int_{R^q} prod|x_i-x_j| e^{-|x|^2/2} = (2 pi)^{q/2} prod_j Gamma(1+j/2)/Gamma(3/2)
    j = np.arange(1, q + 1)
    log_mehta = q / 2 * np.log(2 * np.pi) + float(np.sum(gammaln(1 + j / 2) - gammaln(1.5)))
    scale = 0.5 * np.log(2 * sigma2)           # x = sqrt(2 sigma2) y
    log_z = log_mehta + (q + q * (q - 1) / 2) * scale - float(gammaln(q + 1))
    return -log_z
