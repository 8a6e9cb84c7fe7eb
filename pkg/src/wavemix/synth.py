"""Synthesis of the hidden fractional processes, mixing, and Langevin aggregation.

fGn is exact (circulant embedding), fBm is its cumulative sum, FARIMA(0,d,0)
is a truncated moving average and the fractional Ornstein-Uhlenbeck process
is an Euler-Maruyama recursion driven by exact fGn increments.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import signal
from scipy.special import gammaln

from .series import MultiSeries, NumericalError, SeedLike, ValidationError, make_rng

#: 4x4 mixing matrix used for the four-channel fBm experiments.
MIXING_P4 = np.array([
    [0.6834, -0.7142, 0.6960, -0.1165],
    [-0.0096, 0.4539, -0.0908, 0.7740],
    [0.4771, -0.2345, 0.3359, -0.4243],
    [0.5525, -0.4784, -0.6281, 0.4553],
])

#: 2x2 mixing matrix used for the bivariate fGn / Whittle comparison.
MIXING_P2 = np.array([[0.78, 0.62], [0.62, 0.78]])

FGN, FBM, FARIMA, FOU = "FGN", "FBM", "FARIMA0D0", "FOU"
_TAGS = (FGN, FBM, FARIMA, FOU)


def _check_hurst(h):
    if not 0.0 < h < 1.0:
        raise ValidationError(f"Hurst exponent must lie in (0, 1), got {h}")


@dataclass(frozen=True)
class ProcessClass:
    """One hidden channel: ``FGN(h)``, ``FBM(h)``, ``FARIMA0D0(d)`` or ``FOU(lam, h)``."""

    tag: str
    h: Optional[float] = None
    d: Optional[float] = None
    lam: Optional[float] = None

    def __post_init__(self):
        tag = self.tag.upper()
        object.__setattr__(self, "tag", tag)
        if tag not in _TAGS:
            raise ValidationError(f"unknown process class {self.tag!r}")
        if tag in (FGN, FBM, FOU):
            if self.h is None:
                raise ValidationError(f"{tag} needs a Hurst exponent")
            _check_hurst(self.h)
        if tag == FARIMA:
            if self.d is None or not -0.5 < self.d < 0.5:
                raise ValidationError("FARIMA(0,d,0) requires -1/2 < d < 1/2")
        if tag == FOU and (self.lam is None or self.lam <= 0):
            raise ValidationError("FOU requires lam > 0")

    @classmethod
    def fgn(cls, h):
        return cls(FGN, h=h)

    @classmethod
    def fbm(cls, h):
        return cls(FBM, h=h)

    @classmethod
    def farima(cls, d):
        return cls(FARIMA, d=d)

    @classmethod
    def fou(cls, lam, h):
        return cls(FOU, h=h, lam=lam)

    @property
    def memory(self) -> float:
        """Memory parameter d (exponent of the |x|^(-2d) spectral law at 0)."""
        if self.tag == FARIMA:
            return self.d
        if self.tag == FBM:
            return self.h + 0.5
        return self.h - 0.5

    def simulate(self, nu, rng, dt=0.1, burn_in=0.0) -> np.ndarray:
        if self.tag == FGN:
            return fgn_path(self.h, nu, rng)
        if self.tag == FBM:
            return fbm_path(self.h, nu, rng)
        if self.tag == FARIMA:
            return farima_path(self.d, nu, rng)
        return fou_path(self.lam, self.h, nu, rng, dt=dt, burn_in=burn_in)


@dataclass
class MixingSpec:
    P: np.ndarray
    channel_classes: Sequence[ProcessClass] = field(default_factory=list)

    def __post_init__(self):
        self.P = np.atleast_2d(np.asarray(self.P, dtype=float))
        n, m = self.P.shape
        if n != m:
            raise ValidationError("mixing matrix must be square")
        if self.channel_classes and len(self.channel_classes) != n:
            raise ValidationError("need one process class per channel")
        _check_nonsingular(self.P)

    @property
    def n(self):
        return self.P.shape[0]

    def is_normalized(self, tol=1e-3) -> bool:
        """Unit-norm columns with nonnegative diagonal."""
        norms = np.linalg.norm(self.P, axis=0)
        return bool(np.all(np.abs(norms - 1) < tol) and np.all(np.diag(self.P) >= 0))


@dataclass
class LangevinSpec:
    Phi: np.ndarray
    Sigma: np.ndarray
    h: np.ndarray
    Delta: float
    dt: float = 0.1

    def __post_init__(self):
        self.Phi = np.atleast_2d(np.asarray(self.Phi, dtype=float))
        self.Sigma = np.atleast_2d(np.asarray(self.Sigma, dtype=float))
        self.h = np.atleast_1d(np.asarray(self.h, dtype=float))
        n = self.h.size
        if self.Phi.shape != (n, n) or self.Sigma.shape != (n, n):
            raise ValidationError("Phi, Sigma and h dimensions disagree")
        for name, M in (("-Phi", -self.Phi), ("Sigma", self.Sigma)):
            if not np.allclose(M, M.T, atol=1e-12):
                raise ValidationError(f"{name} must be symmetric")
            if np.linalg.eigvalsh(M).min() <= 0:
                raise ValidationError(f"{name} must be positive definite")
        for hi in self.h:
            _check_hurst(hi)
        if not 0 < self.dt <= self.Delta:
            raise ValidationError("need 0 < dt <= Delta")


def _check_nonsingular(P):
    n = P.shape[0]
    scale = np.linalg.norm(P, 2) ** n
    if abs(np.linalg.det(P)) < 1e-12 * scale:
        raise ValidationError("mixing matrix is singular")


def _steps(span, dt, what):
    s = int(round(span / dt))
    if s < 1 or abs(s * dt - span) > 1e-9 * max(1.0, span):
        raise ValidationError(f"{what} ({span}) must be an integer multiple of dt ({dt})")
    return s


# ---------------------------------------------------------------------------
# fGn / fBm
# ---------------------------------------------------------------------------

def fgn_autocov(h, k):
    """Autocovariance of unit-variance fGn at integer lag(s) ``k``."""
    _check_hurst(h)
    k = np.abs(np.asarray(k, dtype=float))
    out = 0.5 * (np.abs(k + 1) ** (2 * h) - 2 * k ** (2 * h) + np.abs(k - 1) ** (2 * h))
    return float(out) if out.ndim == 0 else out


def circulant_eigenvalues(h, nu):
    """Eigenvalues of the size-2nu circulant embedding of the fGn covariance."""
    gamma = fgn_autocov(h, np.arange(nu + 1))
    row = np.concatenate([gamma, gamma[-2:0:-1]])
    return np.fft.fft(row).real


def fgn_path(h, nu, rng, tol=1e-10) -> np.ndarray:
    _check_hurst(h)
    if nu < 2:
        raise ValidationError("nu must be >= 2")
    lam = circulant_eigenvalues(h, nu)
    if lam.min() < -tol * lam.max():
        raise NumericalError(f"negative circulant eigenvalue {lam.min():.3e} for h={h}")
    lam = np.maximum(lam, 0.0)  # rounding-level negatives only, checked above
    m = lam.size
    w = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    y = np.fft.fft(np.sqrt(lam / m) * w)
    return y.real[:nu].copy()


def fbm_path(h, nu, rng) -> np.ndarray:
    inc = fgn_path(h, max(nu - 1, 2), rng)[: nu - 1]
    return np.concatenate([[0.0], np.cumsum(inc)])


def synth_fgn(h, nu, seed: SeedLike = None) -> MultiSeries:
    """Exact unit-variance fractional Gaussian noise of length ``nu``."""
    return MultiSeries(fgn_path(h, nu, make_rng(seed)), [f"fgn_h{h:g}"], _seed(seed))


def synth_fbm(h, nu, seed: SeedLike = None) -> MultiSeries:
    """Fractional Brownian motion sampled at integer times, ``B(0) = 0``."""
    return MultiSeries(fbm_path(h, nu, make_rng(seed)), [f"fbm_h{h:g}"], _seed(seed))


def _seed(seed):
    return seed if isinstance(seed, (int, np.integer)) else None


# ---------------------------------------------------------------------------
# FARIMA(0, d, 0)
# ---------------------------------------------------------------------------

def farima_ma_coefficients(d, depth):
    """psi_k = Gamma(k+d) / (Gamma(d) Gamma(k+1)) via the ratio recursion."""
    k = np.arange(1, depth)
    psi = np.empty(depth)
    psi[0] = 1.0
    psi[1:] = np.cumprod((k - 1 + d) / k)
    return psi


def farima_variance(d):
    """Gamma(1-2d) / Gamma(1-d)^2 for unit innovations."""
    return float(np.exp(gammaln(1 - 2 * d) - 2 * gammaln(1 - d)))


def farima_path(d, nu, rng, truncation=2 ** 14) -> np.ndarray:
    if not -0.5 < d < 0.5:
        raise ValidationError("FARIMA(0,d,0) requires -1/2 < d < 1/2")
    psi = farima_ma_coefficients(d, truncation)
    eps = rng.standard_normal(nu + truncation - 1)
    # truncation error in variance is O(truncation**(2d-1))
    return signal.fftconvolve(eps, psi, mode="valid")


def synth_farima(d, nu, seed: SeedLike = None, truncation=2 ** 14) -> MultiSeries:
    x = farima_path(d, nu, make_rng(seed), truncation=truncation)
    return MultiSeries(x, [f"farima_d{d:g}"], _seed(seed))


# ---------------------------------------------------------------------------
# fractional Ornstein-Uhlenbeck
# ---------------------------------------------------------------------------

def fou_path(lam, h, nu, rng, dt=0.1, burn_in=0.0, x0=0.0) -> np.ndarray:
    if lam <= 0 or dt <= 0:
        raise ValidationError("need lam > 0 and dt > 0")
    if lam * dt >= 1:
        raise NumericalError(f"Euler step unstable: lam*dt = {lam * dt:g} >= 1")
    s = _steps(1.0, dt, "unit sampling interval")
    burn = int(round(burn_in / dt))
    total = burn + (nu - 1) * s
    inc = dt ** h * fgn_path(h, max(total, 2), rng)[:total]
    a = 1.0 - lam * dt
    zi = np.array([a * x0])
    path = signal.lfilter([1.0], [1.0, -a], inc, zi=zi)[0]
    path = np.concatenate([[x0], path])
    return path[burn::s][:nu].copy()


def synth_fou(lam, h, nu, dt=0.1, seed: SeedLike = None, burn_in=0.0) -> MultiSeries:
    """Euler-Maruyama fOU ``X += -lam X dt + dB_h``, returned at unit spacing."""
    _check_hurst(h)
    x = fou_path(lam, h, nu, make_rng(seed), dt=dt, burn_in=burn_in)
    return MultiSeries(x, [f"fou_l{lam:g}_h{h:g}"], _seed(seed))


def fou_stationary_variance_h05(lam, dt):
    """Stationary variance of the Euler recursion driven by Brownian increments."""
    return 1.0 / (lam * (2.0 - lam * dt))


# ---------------------------------------------------------------------------
# hidden vector, mixing, aggregation
# ---------------------------------------------------------------------------

def synth_hidden(classes: Sequence[ProcessClass], nu, seed: SeedLike = None,
                 dt=0.1, burn_in=0.0) -> MultiSeries:
    """Independent channels drawn sequentially from a single stream."""
    rng = make_rng(seed)
    rows = [c.simulate(nu, rng, dt=dt, burn_in=burn_in) for c in classes]
    labels = [f"x{i + 1}" for i in range(len(rows))]
    return MultiSeries(np.vstack(rows), labels, _seed(seed))


def mix(spec, X: MultiSeries) -> MultiSeries:
    """``Y(k) = P X(k)`` for every sample."""
    P = spec.P if isinstance(spec, MixingSpec) else np.atleast_2d(np.asarray(spec, float))
    if P.shape != (X.n, X.n):
        raise ValidationError(f"P is {P.shape}, series has {X.n} channels")
    _check_nonsingular(P)
    return MultiSeries(P @ X.data, [f"y{i + 1}" for i in range(X.n)], X.seed)


def aggregate_langevin(spec: LangevinSpec, count, seed: SeedLike = None,
                       burn_in_windows=0) -> MultiSeries:
    """Window-aggregated multivariate fractional Langevin dynamics.

    Simulates ``dY = Phi Y dt + Sigma dB_h`` by Euler-Maruyama, integrates
    over consecutive windows of length ``Delta`` with the trapezoid rule and
    returns ``-diag(Delta**-h) Sigma^-1 Phi Y_z``, which is close to a vector
    of independent fGn for large ``Delta``.
    """
    rng = make_rng(seed)
    n = spec.h.size
    dt = spec.dt
    s = _steps(spec.Delta, dt, "Delta")
    mu, U = np.linalg.eigh(spec.Phi)
    if (-mu).max() * dt >= 1:
        raise NumericalError("Euler step unstable for the given Phi and dt")
    windows = count + burn_in_windows
    N = windows * s
    dB = np.vstack([dt ** hi * fgn_path(hi, max(N, 2), rng)[:N] for hi in spec.h])
    drive = U.T @ (spec.Sigma @ dB)
    Z = np.empty((n, N + 1))
    Z[:, 0] = 0.0
    for i in range(n):
        Z[i, 1:] = signal.lfilter([1.0], [1.0, -(1.0 + mu[i] * dt)], drive[i])
    Y = U @ Z
    block = Y[:, :N].reshape(n, windows, s).sum(axis=2) + Y[:, s::s]
    agg = dt * (block - 0.5 * (Y[:, :N:s] + Y[:, s::s]))
    agg = agg[:, burn_in_windows:]
    norm = -np.diag(spec.Delta ** -spec.h) @ np.linalg.solve(spec.Sigma, spec.Phi)
    return MultiSeries(norm @ agg, [f"agg{i + 1}" for i in range(n)], _seed(seed))
