"""Bivariate Whittle-type maximum likelihood for a mixed pair of fGn channels.

The spectral matrix of ``Y = P X`` is modelled as
``A diag(2(1 - cos x) R(x, h_i)) A^T`` with ``A = P diag(e(h1), e(h2))``,
where ``R`` is the truncated aliasing sum of the fGn spectrum.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, gammaln, logit

from .series import MultiSeries, NumericalError, ValidationError

PENALTY = 1e300
H_LO, H_HI = 0.01, 0.99
DEFAULT_M = 100


def e_const(h):
    """``{Gamma(2h+1) sin(pi h) / (2 pi)}^(1/2)``."""
    h = np.asarray(h, dtype=float)
    return np.sqrt(np.exp(gammaln(2 * h + 1)) * np.sin(np.pi * h) / (2 * np.pi))


@dataclass
class Periodogram:
    """Fourier frequencies ``x_i = 2 pi i / nu`` (i = 1..T) and the DFT columns."""

    x: np.ndarray          # (T,)
    J: np.ndarray          # (n, T) complex, J_Y(x_i)
    nu: int

    @property
    def T(self) -> int:
        return self.x.size

    def matrices(self) -> np.ndarray:
        """``I_Y(x_i) = J J^* / (2 pi nu)`` stacked as (T, n, n)."""
        J = self.J.T
        return np.einsum("ti,tj->tij", J, J.conj()) / (2 * np.pi * self.nu)


def periodogram(Y) -> Periodogram:
    """Cross-periodogram at the positive Fourier frequencies below pi."""
    data = Y.data if isinstance(Y, MultiSeries) else np.atleast_2d(np.asarray(Y, float))
    nu = data.shape[1]
    if nu < 4:
        raise ValidationError("periodogram needs nu >= 4")
    T = (nu - 1) // 2
    i = np.arange(1, T + 1)
    x = 2 * np.pi * i / nu
    # J(x) = sum_{t=1}^{nu} Y_t e^{i t x}; numpy's ifft has e^{+i...} with t from 0
    F = np.fft.ifft(data, axis=1) * nu
    J = F[:, 1:T + 1] * np.exp(1j * x)[None, :]
    return Periodogram(x, J, nu)


@lru_cache(maxsize=16)
def _log_alias_table(nu, M):
    T = (nu - 1) // 2
    x = 2 * np.pi * np.arange(1, T + 1) / nu
    k = np.arange(-M, M + 1)
    return x, np.log(np.abs(x[:, None] + 2 * np.pi * k[None, :]))


def R_tilde(x, h, M=DEFAULT_M, _table=None):
    """Aliasing sum ``sum_{|k|<=M} |x + 2k pi|^(-2h-1)`` plus the integral tail correction."""
    x = np.asarray(x, dtype=float)
    if _table is None:
        k = np.arange(-M, M + 1)
        logs = np.log(np.abs(x[..., None] + 2 * np.pi * k))
    else:
        logs = _table
    s = np.exp(-(2 * h + 1) * logs).sum(axis=-1)
    tail = ((2 * np.pi * M - x) ** (-2 * h) + (2 * np.pi * M + x) ** (-2 * h)) / (4 * np.pi * h)
    return s + tail


def whittle_nll(h1, h2, A, pgram: Periodogram, M=DEFAULT_M) -> float:
    """Negative Whittle log-likelihood (three-term form).

    Returns ``PENALTY`` for h outside (0, 1) or singular A.
    """
    if M < 10:
        raise ValidationError("M must be at least 10")
    A = np.asarray(A, dtype=float)
    if not (0 < h1 < 1 and 0 < h2 < 1) or not np.all(np.isfinite(A)):
        return PENALTY
    det = np.linalg.det(A)
    if abs(det) < 1e-12 * max(np.linalg.norm(A, 2), 1e-300) ** 2:
        return PENALTY
    x = pgram.x
    _, table = _log_alias_table(pgram.nu, M)
    G1 = R_tilde(x, h1, M, table)
    G2 = R_tilde(x, h2, M, table)
    c = 2 * (1 - np.cos(x))
    T = x.size
    term1 = 2 * T * np.log(abs(det))
    term2 = np.sum(np.log(np.abs(c * G1 * G2)))
    Z = np.linalg.solve(A, pgram.J)                       # A^{-1} J
    q = (np.abs(Z) ** 2) / (2 * np.pi * pgram.nu)         # diag of A^{-1} I A^{-T}
    term3 = np.sum(q[0] / (c * G1) + q[1] / (c * G2))
    val = term1 + term2 + term3
    return float(val) if np.isfinite(val) else PENALTY


@dataclass
class WhittleFit:
    h1: float
    h2: float
    A_hat: np.ndarray
    P_hat: np.ndarray
    nll: float
    iterations: int
    evaluations: int
    wall_time: float
    converged: bool
    restarts: int = 0
    history: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "h1": self.h1, "h2": self.h2,
            "A_hat": self.A_hat.tolist(), "P_hat": self.P_hat.tolist(),
            "nll": self.nll, "iterations": self.iterations, "evaluations": self.evaluations,
            "wall_time": self.wall_time, "converged": self.converged, "restarts": self.restarts,
        }


def _to_h(u):
    return H_LO + (H_HI - H_LO) * expit(u)


def _from_h(h):
    h = np.clip(h, H_LO + 1e-9, H_HI - 1e-9)
    return logit((h - H_LO) / (H_HI - H_LO))


def pack(h1, h2, A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    return np.concatenate([[_from_h(h1), _from_h(h2)], A.ravel(order="F")])


def unpack(theta):
    theta = np.asarray(theta, dtype=float)
    return float(_to_h(theta[0])), float(_to_h(theta[1])), theta[2:].reshape(2, 2, order="F")


def default_init(Y: MultiSeries):
    """Starting point from the two-step wavelet estimate."""
    from .estimator import DemixConfig, two_step

    res = two_step(Y, DemixConfig.default_for(Y.nu), with_ci=False)
    h = np.clip(res.h_hat, 0.05, 0.95)
    scale = res.demixed.data.std(axis=1)
    # fGn with variance s^2 has spectral scale s * e(h)
    A = res.P_hat * (scale * e_const(h))[None, :]
    return float(h[0]), float(h[1]), A


def whittle_fit(Y, init=None, M=DEFAULT_M, xatol=1e-6, fatol=1e-8,
                maxiter=50_000, restart=True) -> WhittleFit:
    """Minimize the Whittle objective by Nelder-Mead on (logit h1, logit h2, vec A).

    ``init`` is ``(h1, h2, A)``; by default it comes from the two-step
    estimator.  The best value seen at each accepted simplex step is recorded
    in ``history`` and must never increase.
    """
    if not isinstance(Y, MultiSeries):
        Y = MultiSeries(Y)
    if Y.n != 2:
        raise ValidationError("Whittle fit is bivariate; got %d channels" % Y.n)
    t0 = time.perf_counter()
    pg = periodogram(Y)
    if init is None:
        init = default_init(Y)
    h1, h2, A0 = init
    if not (0 < h1 < 1 and 0 < h2 < 1):
        raise ValidationError("initial Hurst exponents must lie in (0, 1)")
    theta0 = pack(h1, h2, A0)

    def f(theta):
        a, b, A = unpack(theta)
        return whittle_nll(a, b, A, pg, M)

    history = []

    def cb(intermediate_result):
        v = float(intermediate_result.fun)
        if history and v > history[-1] + 1e-9 * max(1.0, abs(history[-1])):
            raise NumericalError("Nelder-Mead best value increased")
        history.append(v)

    opts = dict(xatol=xatol, fatol=fatol, maxiter=maxiter, maxfev=4 * maxiter, adaptive=False)
    res = minimize(f, theta0, method="Nelder-Mead", options=opts, callback=cb)
    nit, nfev, restarts = res.nit, res.nfev, 0
    if restart and nit < maxiter:
        res2 = minimize(f, res.x, method="Nelder-Mead", options=opts, callback=cb)
        restarts = 1
        nit += res2.nit
        nfev += res2.nfev
        if res2.fun <= res.fun:
            res = res2
    a, b, A = unpack(res.x)
    converged = bool(res.success) and nit < maxiter
    P = A / e_const([a, b])[None, :]
    return WhittleFit(a, b, A, P, float(res.fun), int(nit), int(nfev),
                      time.perf_counter() - t0, converged, restarts, history)
