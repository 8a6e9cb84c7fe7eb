"""Daubechies filters, the Mallat pyramid and wavelet-variance statistics.

The pyramid keeps only coefficients whose filter support lies inside the
data ("valid" mode); a periodic mode is provided for energy checks.  Detail
coefficients of the orthonormal recursion are used as-is, so that for a
process with spectral density ~|x|^(-2d) at the origin

    log2 E W(2^j) ~ 2 d j + const.

The frequency-domain part evaluates |psi_hat|^2 through the infinite-product
(cascade) formula and provides K(d), the asymptotic covariance matrix V(d)
of the normalized wavelet variances, and the lag correlations of the
coefficient sequence.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb
from typing import Dict, Iterable, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .series import MultiSeries, NumericalError, ValidationError

__all__ = [
    "WaveletBasis", "Pyramid", "WaveletVarianceSet", "daubechies_filters",
    "max_octave", "coefficient_counts", "pyramid", "wavelet_variance",
    "coherence", "psi_hat", "phi_hat", "psi_hat_sq", "K_integral", "V_matrix",
    "lag_correlations",
]


@dataclass(frozen=True)
class WaveletBasis:
    n_psi: int
    lowpass: tuple
    highpass: tuple

    @property
    def h(self) -> np.ndarray:
        return np.array(self.lowpass)

    @property
    def g(self) -> np.ndarray:
        return np.array(self.highpass)

    @property
    def length(self) -> int:
        return len(self.lowpass)

    def __hash__(self):
        return hash((self.n_psi, self.lowpass))


@lru_cache(maxsize=None)
def daubechies_filters(n_psi: int) -> WaveletBasis:
    """Extremal-phase Daubechies filters with ``n_psi`` vanishing moments.

    Built by spectral factorization: |m0|^2 = cos^(2N)(w/2) P(sin^2(w/2)),
    keeping the roots of P inside the unit circle.  ``g_k = (-1)^k h_{L-1-k}``.
    """
    if not isinstance(n_psi, (int, np.integer)) or not 1 <= n_psi <= 10:
        raise ValidationError(f"n_psi must be an integer in 1..10, got {n_psi!r}")
    N = int(n_psi)
    # P(y) z^(N-1) with y = -(z-1)^2 / (4z), as a polynomial in z
    q = np.zeros(1)
    for k in range(N):
        term = np.array([1.0])
        for _ in range(2 * k):
            term = np.polymul(term, [1.0, -1.0])
        term = np.polymul(term, np.eye(1, N - k, 0).ravel())  # times z^(N-1-k)
        term = term * comb(N - 1 + k, k) * (-0.25) ** k
        q = np.polyadd(q, term)
    roots = np.roots(q) if q.size > 1 else np.array([])
    inside = roots[np.abs(roots) < 1]
    poly = np.real(np.poly(inside)) if inside.size else np.array([1.0])
    for _ in range(N):
        poly = np.polymul(poly, [1.0, 1.0])
    h = poly * np.sqrt(2) / poly.sum()
    L = h.size
    g = np.array([(-1) ** k * h[L - 1 - k] for k in range(L)])
    return WaveletBasis(N, tuple(h), tuple(g))


# ---------------------------------------------------------------------------
# pyramid
# ---------------------------------------------------------------------------

def coefficient_counts(nu, j_max, L, mode="valid"):
    """Number of coefficients at octaves 1..j_max (0 once exhausted)."""
    counts = []
    m = nu
    for _ in range(j_max):
        if mode == "periodic":
            m = m // 2 if m % 2 == 0 else 0
        else:
            m = (m - L) // 2 + 1 if m >= L else 0
        counts.append(max(m, 0))
    return counts


def max_octave(nu, L, min_count=1, mode="valid"):
    j = 0
    for c in coefficient_counts(nu, 64, L, mode):
        if c < min_count:
            break
        j += 1
    return j


@dataclass
class Pyramid:
    details: list          # details[j-1] has shape (n, K_j)
    approx: np.ndarray     # approximation at the coarsest octave
    basis: WaveletBasis
    mode: str = "valid"

    @property
    def j_max(self) -> int:
        return len(self.details)

    @property
    def counts(self) -> Dict[int, int]:
        return {j + 1: d.shape[1] for j, d in enumerate(self.details)}

    def detail(self, j) -> np.ndarray:
        return self.details[j - 1]


def _as_matrix(Y):
    if isinstance(Y, MultiSeries):
        return Y.data
    X = np.asarray(Y, dtype=float)
    return X[None, :] if X.ndim == 1 else X


def pyramid(Y, j_max, basis: WaveletBasis, mode="valid", demean=True) -> Pyramid:
    """Mallat recursion ``a_{j+1,k} = sum h_{k'-2k} a_{j,k'}`` (same with g for details)."""
    X = _as_matrix(Y)
    nu = X.shape[1]
    if mode not in ("valid", "periodic"):
        raise ValidationError(f"unknown mode {mode!r}")
    L = basis.length
    feasible = max_octave(nu, L, mode=mode)
    if j_max < 1 or j_max > feasible:
        raise ValidationError(
            f"j_max={j_max} infeasible for nu={nu} with filter length {L}; "
            f"maximal feasible j_max is {feasible}")
    a = X - X.mean(axis=1, keepdims=True) if demean else X.copy()
    h, g = basis.h, basis.g
    details = []
    for _ in range(j_max):
        m = a.shape[1]
        if mode == "valid":
            win = sliding_window_view(a, L, axis=1)[:, ::2, :]
        else:
            idx = (2 * np.arange(m // 2)[:, None] + np.arange(L)[None, :]) % m
            win = a[:, idx]
        details.append(win @ g)
        a = win @ h
    return Pyramid(details, a, basis, mode)


@dataclass
class WaveletVarianceSet:
    matrices: Dict[int, np.ndarray]
    counts: Dict[int, int]

    @property
    def octaves(self):
        return sorted(self.matrices)

    def __getitem__(self, j) -> np.ndarray:
        return self.matrices[j]

    def diagonal(self, i) -> np.ndarray:
        return np.array([self.matrices[j][i, i] for j in self.octaves])


def wavelet_variance(pyr: Pyramid, octaves: Optional[Iterable[int]] = None) -> WaveletVarianceSet:
    """Sample wavelet variance ``W(2^j) = (1/K_j) sum_k D(2^j,k) D(2^j,k)^T``."""
    octaves = range(1, pyr.j_max + 1) if octaves is None else octaves
    mats, counts = {}, {}
    for j in octaves:
        if not 1 <= j <= pyr.j_max:
            raise ValidationError(f"octave {j} not present in the pyramid")
        D = pyr.detail(j)
        K = D.shape[1]
        if K < 2:
            raise ValidationError(f"octave {j} has only {K} coefficient(s); need >= 2")
        W = D @ D.T / K
        mats[j] = 0.5 * (W + W.T)
        counts[j] = K
    return WaveletVarianceSet(mats, counts)


def coherence(wset: WaveletVarianceSet, i1=0, i2=1) -> np.ndarray:
    """Per-octave wavelet coherence W_12 / sqrt(W_11 W_22)."""
    out = []
    for j in wset.octaves:
        W = wset[j]
        if W[i1, i1] <= 0 or W[i2, i2] <= 0:
            raise ValidationError(f"zero wavelet variance at octave {j}")
        out.append(W[i1, i2] / np.sqrt(W[i1, i1] * W[i2, i2]))
    return np.clip(np.array(out), -1.0, 1.0)


# ---------------------------------------------------------------------------
# frequency domain
# ---------------------------------------------------------------------------

def _transfer_sq(coefs, w):
    """|m(w)|^2 for m(w) = 2^(-1/2) sum_k c_k e^{-ikw}."""
    c = np.asarray(coefs)
    r = np.correlate(c, c, mode="full")[c.size - 1:]
    out = np.full_like(w, r[0], dtype=float)
    for m in range(1, r.size):
        out += 2 * r[m] * np.cos(m * w)
    return 0.5 * out


def psi_hat_sq(basis: WaveletBasis, x, depth=25):
    """|psi_hat(x)|^2 via ``m1(x/2) prod_{k=2..depth} m0(x/2^k)``."""
    if depth < 10:
        raise ValidationError("depth must be >= 10")
    x = np.asarray(x, dtype=float)
    out = _transfer_sq(basis.g, x / 2)
    for k in range(2, depth + 1):
        out = out * _transfer_sq(basis.h, x / 2 ** k)
    return np.maximum(out, 0.0)


X_MAX = 2.0 ** 12


@lru_cache(maxsize=16)
def _grid(x_max=X_MAX, width=0.25, order=8):
    """Gauss-Legendre nodes/weights on (0, x_max]: geometric panels below 1, uniform above."""
    t, w = np.polynomial.legendre.leggauss(order)
    edges = np.concatenate([np.geomspace(1e-9, 1.0, 61), np.arange(1.0 + width, x_max + 0.5 * width, width)])
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)
    nodes = (0.5 * (a + b))[:, None] + half[:, None] * t[None, :]
    weights = half[:, None] * w[None, :]
    return nodes.ravel(), weights.ravel()


@lru_cache(maxsize=64)
def _psi_on_grid(basis: WaveletBasis, scale=1.0, x_max=X_MAX, width=0.25, order=8):
    x, _ = _grid(x_max, width, order)
    return psi_hat_sq(basis, scale * x)


def _check_window(basis, d):
    N = basis.n_psi
    if not -N + 0.5 < d < N:
        raise ValidationError(f"d={d} outside the integrability window ({-N + 0.5}, {N})")


def _half_line_integral(values, x, w, x_max):
    """Integral over (0, inf) with a geometric extrapolation of the tail."""
    core = float(np.sum(w * values))
    b1 = (x > x_max / 4) & (x <= x_max / 2)
    b2 = x > x_max / 2
    i1, i2 = float(np.sum((w * values)[b1])), float(np.sum((w * values)[b2]))
    if i1 <= 0 or i2 <= 0:
        return core
    r = i2 / i1
    if r >= 0.9:
        raise NumericalError(f"integrand tail does not decay (band ratio {r:.3f})")
    return core + i2 * r / (1 - r)


def K_integral(basis: WaveletBasis, d) -> float:
    """``K(d) = int |psi_hat(x)|^2 |x|^(-2d) dx`` over the real line."""
    _check_window(basis, d)
    x, w = _grid()
    vals = _psi_on_grid(basis) * x ** (-2 * d)
    return 2 * _half_line_integral(vals, x, w, X_MAX)


def _cross_integral(basis, d, shift):
    """``int |x|^(-4d) |psi_hat(x)|^2 |psi_hat(2^shift x)|^2 dx``."""
    x, w = _grid(order=16)
    vals = x ** (-4 * d) * _psi_on_grid(basis, 1.0, X_MAX, 0.25, 16) \
        * _psi_on_grid(basis, float(2 ** shift), X_MAX, 0.25, 16)
    return 2 * float(np.sum(w * vals))


def _transfer(coefs, w):
    """Complex ``m(w) = 2^(-1/2) sum_k c_k e^{-ikw}`` (Horner in e^{-iw})."""
    e = np.exp(-1j * np.asarray(w, dtype=float))
    out = np.zeros(e.shape, dtype=complex)
    for c in reversed(coefs):
        out = out * e + c
    return out / np.sqrt(2)


def phi_hat(basis: WaveletBasis, x, depth=25):
    """Scaling-function transform ``prod_{k=1..depth} m0(x/2^k)`` (complex)."""
    x = np.asarray(x, dtype=float)
    out = np.ones(x.shape, dtype=complex)
    for k in range(1, depth + 1):
        out *= _transfer(basis.lowpass, x / 2 ** k)
    return out


def psi_hat(basis: WaveletBasis, x, depth=25):
    """Complex wavelet transform ``m1(x/2) phi_hat(x/2)``; its modulus squared is psi_hat_sq."""
    x = np.asarray(x, dtype=float)
    return _transfer(basis.highpass, x / 2) * phi_hat(basis, x / 2, depth - 1)


ALIAS_TERMS = 512


@lru_cache(maxsize=8)
def _alias_grid(basis: WaveletBasis, terms=ALIAS_TERMS):
    """Nodes y in (0, 2 pi), weights, z = y + 2 pi m and psi_hat, phi_hat on z."""
    t, w = np.polynomial.legendre.leggauss(12)
    inner = np.geomspace(1e-8, 0.5, 14)
    edges = np.unique(np.concatenate([[0.0], inner, np.linspace(0.5, 2 * np.pi - 0.5, 21),
                                      2 * np.pi - inner[::-1], [2 * np.pi]]))
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)
    y = ((0.5 * (a + b))[:, None] + half[:, None] * t[None, :]).ravel()
    wy = (half[:, None] * w[None, :]).ravel()
    m = np.arange(-terms, terms + 1)
    z = y[:, None] + 2 * np.pi * m[None, :]
    ps = psi_hat(basis, z)
    return y, wy, np.abs(z), np.abs(ps) ** 2, ps * np.conj(phi_hat(basis, z))


@lru_cache(maxsize=64)
def _alias_sums(basis: WaveletBasis, d):
    """Periodized sums on y in (0, 2 pi) for the sampled-coefficient covariances.

    S_pp(y) = sum_m |psi_hat(z)|^2 |z|^(-2d),  S_pf(y) = sum_m psi_hat(z) conj(phi_hat(z)) |z|^(-2d),
    with z = y + 2 pi m.  Returns nodes, weights, S_pp, S_pf.
    """
    y, wy, az, pp, pf = _alias_grid(basis)
    pw = az ** (-2 * d)
    S_pp = np.sum(pp * pw, axis=1)
    S_pf = np.sum(pf * pw, axis=1)
    edge = float(np.sum(wy * (pp[:, 0] * pw[:, 0] + pp[:, -1] * pw[:, -1])))
    total = float(np.sum(wy * S_pp))
    # crude tail bound: the outermost terms times the number of terms kept
    if not np.isfinite(total) or edge * ALIAS_TERMS > 1e-2 * total:
        raise NumericalError(f"alias sum for d={d} does not decay fast enough")
    return y, wy, S_pp, S_pf


def V_matrix(basis: WaveletBasis, d, octaves, sampled=True) -> np.ndarray:
    """Asymptotic covariance of ``sqrt(nu) (W(2^j)/E W(2^j) - 1)`` over ``octaves``.

    With octaves j <= j', s = j' - j, every entry has the form
    ``4 pi 2^(j + s(1 - 2d)) I_s / K(d)^2``, i.e. ``Cov(W_j/EW_j, W_j'/EW_j') ~ V / nu``.

    ``sampled=False`` takes ``I_s = int |x|^(-4d) |psi_hat(x)|^2 |psi_hat(2^s x)|^2 dx``,
    the continuous-time form.  The default ``sampled=True`` accounts for the
    decimation of sampled data: the coefficient sequence sees the periodized
    spectrum, so ``I_s = int_0^{2pi} |sum_m a(y + 2 pi m)|^2 dy`` with
    ``a(x) = psi_hat(x) conj(psi_hat(2^s x)) |x|^(-2d)``.  Since m0, m1 are
    2 pi-periodic the sum factors as ``|M_s(y)|^2 |S_pf(y)|^2`` for s >= 1.
    Diagonal entries then equal ``2^(j+1) b``.
    """
    _check_window(basis, d)
    js = list(octaves)
    if sorted(js) != js or len(set(js)) != len(js):
        raise ValidationError("octaves must be strictly increasing")
    if sampled:
        y, wy, S_pp, S_pf = _alias_sums(basis, float(d))
        K = float(np.sum(wy * S_pp))
    else:
        K = K_integral(basis, d)
    m = len(js)
    V = np.empty((m, m))
    cache = {}
    for a in range(m):
        for b in range(a, m):
            s = js[b] - js[a]
            if s not in cache:
                cache[s] = _sampled_integral(basis, s, y, wy, S_pp, S_pf) if sampled \
                    else _cross_integral(basis, d, s)
            val = 4 * np.pi * 2.0 ** (js[a] + s * (1 - 2 * d)) * cache[s] / K ** 2
            if not np.isfinite(val) or val < 0:
                raise NumericalError(f"V entry ({js[a]},{js[b]}) did not converge: {val}")
            V[a, b] = V[b, a] = val
    return V


def _sampled_integral(basis, s, y, wy, S_pp, S_pf):
    if s == 0:
        return float(np.sum(wy * S_pp ** 2))
    Ms = _transfer(basis.g, 2.0 ** (s - 1) * y)
    for i in range(s - 1):
        Ms = Ms * _transfer(basis.h, 2.0 ** i * y)
    return float(np.sum(wy * np.abs(Ms) ** 2 * np.abs(S_pf) ** 2))


@lru_cache(maxsize=8)
def _lag_grid(z_max):
    width = min(0.25, 1.0 / max(z_max, 1))
    return _grid(X_MAX, width, 8)


def lag_correlations(basis: WaveletBasis, d, lags) -> np.ndarray:
    """Correlation at integer lags of the coefficient sequence at one octave.

    ``rho(z) = int |psi_hat(y)|^2 cos(z y) |y|^(-2d) dy / K(d)`` -- scale free,
    so the octave does not enter.
    """
    _check_window(basis, d)
    lags = np.atleast_1d(np.asarray(lags, dtype=int))
    z_max = int(np.abs(lags).max()) if lags.size else 0
    # resolve cos(z y) with at least ~1 oscillation per panel
    bucket = 1 << max(int(np.ceil(np.log2(max(z_max, 1)))), 2)
    x, w = _lag_grid(bucket)
    width = min(0.25, 1.0 / bucket)
    base = w * _psi_on_grid(basis, 1.0, X_MAX, width, 8) * x ** (-2 * d)
    K = K_integral(basis, d)
    out = np.array([2 * float(np.sum(base * np.cos(z * x))) / K for z in lags])
    out[lags == 0] = 1.0
    return out
