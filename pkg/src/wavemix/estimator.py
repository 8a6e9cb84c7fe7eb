"""Two-step estimation: wavelet demixing, then per-channel log-scale regression."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.stats import norm

from . import dwt
from .matalg import EjdResult, ejd
from .series import MultiSeries, ValidationError
from .synth import FARIMA, FBM, FGN, FOU, ProcessClass

MIN_COUNT = 8          # coarsest usable octave keeps at least this many coefficients
DEFAULT_J = (1, 6)
REGRESSION_START = 3   # finest octave in the default regression range


class OutOfRangeWarning(UserWarning):
    pass


@dataclass
class DemixConfig:
    """Octaves for the joint diagonalization plus the wavelet basis.

    ``weighting`` selects the log-regression weights: ``"ols"`` (plain
    least-squares slope) or ``"counts"`` (least squares weighted by the
    number of coefficients per octave).  The default regression range
    runs from octave 3 to the coarsest octave with ``MIN_COUNT`` valid
    coefficients; the two finest octaves of a sampled process carry a
    discretization bias that dominates at small sample sizes.
    """

    J1: int = DEFAULT_J[0]
    J2: int = DEFAULT_J[1]
    n_psi: int = 2
    basis: Optional[dwt.WaveletBasis] = None
    octaves: Optional[Sequence[int]] = None
    weighting: str = "counts"

    def __post_init__(self):
        if self.basis is None:
            self.basis = dwt.daubechies_filters(self.n_psi)
        elif self.basis.n_psi != self.n_psi:
            self.n_psi = self.basis.n_psi
        if not 0 < self.J1 < self.J2:
            raise ValidationError(f"need 1 <= J1 < J2, got ({self.J1}, {self.J2})")
        if self.weighting not in ("ols", "counts"):
            raise ValidationError(f"unknown weighting {self.weighting!r}")
        if self.octaves is not None:
            self.octaves = [int(j) for j in self.octaves]

    def feasible_octaves(self, nu) -> List[int]:
        """Octaves 1..J with at least MIN_COUNT valid coefficients."""
        counts = dwt.coefficient_counts(nu, 64, self.basis.length)
        return [j + 1 for j, c in enumerate(counts) if c >= MIN_COUNT]

    def default_octaves(self, nu) -> List[int]:
        ok = self.feasible_octaves(nu)
        if len(ok) - REGRESSION_START + 1 >= 2:
            return ok[REGRESSION_START - 1:]
        if len(ok) < 2:
            raise ValidationError(f"nu={nu} too short: fewer than two usable octaves")
        return ok

    def check(self, nu):
        ok = self.feasible_octaves(nu)
        top = ok[-1] if ok else 0
        if self.J2 > top:
            raise ValidationError(
                f"J2={self.J2} needs more data: nu={nu} supports octaves up to {top} "
                f"with >= {MIN_COUNT} coefficients")
        if self.octaves is not None:
            bad = [j for j in self.octaves if j not in ok]
            if bad:
                raise ValidationError(f"regression octaves {bad} infeasible for nu={nu} (usable: 1..{top})")

    @classmethod
    def default_for(cls, nu, **kw) -> "DemixConfig":
        """(1, 6) when feasible, otherwise the widest pair available."""
        probe = cls(1, 2, **kw)
        top = probe.feasible_octaves(nu)
        if len(top) < 2:
            raise ValidationError(f"nu={nu} too short: fewer than two usable octaves")
        return cls(1, min(DEFAULT_J[1], top[-1]), **kw)


@dataclass
class TwoStepResult:
    B_hat: np.ndarray
    P_hat: np.ndarray
    demixed: MultiSeries
    d_hat: np.ndarray
    h_hat: np.ndarray
    weights: np.ndarray
    octave_range: List[int]
    a: float = 1.0
    ci_halfwidth: Optional[np.ndarray] = None
    ci_level: float = 0.95
    approximate: bool = True
    diagnostics: Dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "B_hat": self.B_hat.tolist(),
            "P_hat": self.P_hat.tolist(),
            "P_hat_inv": np.linalg.inv(self.P_hat).tolist(),
            "d_hat": self.d_hat.tolist(),
            "h_hat": self.h_hat.tolist(),
            "weights": self.weights.tolist(),
            "octave_range": list(self.octave_range),
            "a": self.a,
            "ci_level": self.ci_level,
            "ci_halfwidth": None if self.ci_halfwidth is None else self.ci_halfwidth.tolist(),
            "ci_approximate": self.approximate,
        }
        diag = dict(self.diagnostics)
        for k, v in list(diag.items()):
            if isinstance(v, np.ndarray):
                diag[k] = v.tolist()
        out["diagnostics"] = diag
        return out


def regression_weights(octaves, counts=None) -> np.ndarray:
    """Slope weights with ``sum w = 0`` and ``2 sum j w = 1``.

    Without ``counts`` these are the ordinary least-squares weights
    ``(S0 j - S1) / (2 (S0 S2 - S1^2))`` with ``S_k = sum j^k``.  With counts
    c_l every sum is weighted by c_l and w_l picks up a factor c_l.
    """
    j = np.asarray(list(octaves), dtype=float)
    if j.size < 2:
        raise ValidationError("need at least two octaves")
    if np.unique(j).size != j.size:
        raise ValidationError("octaves must be distinct")
    c = np.ones_like(j) if counts is None else np.asarray(counts, dtype=float)
    if c.shape != j.shape or np.any(c <= 0):
        raise ValidationError("counts must be positive, one per octave")
    S0, S1, S2 = c.sum(), (c * j).sum(), (c * j * j).sum()
    return c * (S0 * j - S1) / (2 * (S0 * S2 - S1 * S1))


def _wset(Y, octaves, basis):
    pyr = dwt.pyramid(Y, max(octaves), basis)
    return dwt.wavelet_variance(pyr, octaves)


def demix(Y: MultiSeries, cfg: DemixConfig):
    """EJD of the sample wavelet variances at octaves J1 and J2.

    Returns ``(B_hat, diagnostics)``; the diagnostics carry the EjdResult.
    """
    if cfg.J1 >= cfg.J2:
        raise ValidationError("J1 must be strictly below J2")
    cfg.check(Y.nu)
    ws = _wset(Y, [cfg.J1, cfg.J2], cfg.basis)
    res: EjdResult = ejd(ws[cfg.J1], ws[cfg.J2])
    diag = {
        "eigengap": res.eigengap,
        "ejd_lambda": res.lam,
        "degenerate": res.degenerate,
        "sign_ambiguous": res.sign_ambiguous,
        "ejd": res,
    }
    return res.B, diag


def normalize_mixing(B_hat, return_flag=False):
    """Invert B, scale columns to unit norm, make the diagonal nonnegative."""
    B = np.asarray(B_hat, dtype=float)
    n = B.shape[0]
    if B.shape != (n, n) or abs(np.linalg.det(B)) < 1e-12 * max(np.linalg.norm(B, 2), 1e-300) ** n:
        raise ValidationError("B_hat is singular")
    P = np.linalg.inv(B)
    P = P / np.linalg.norm(P, axis=0)
    d = np.diag(P)
    P = P * np.where(d < 0, -1.0, 1.0)
    flag = bool(np.any(np.abs(d) < 1e-12))
    return (P, flag) if return_flag else P


def estimate_memory(X_tilde, octaves, basis, counts_weighted=False, wset=None):
    """Regress ``log2 W_ii(2^j)`` on j for every channel.

    Returns ``(d_hat, residuals, weights)``; residuals have shape (n, m).
    """
    octaves = [int(j) for j in octaves]
    ws = _wset(X_tilde, octaves, basis) if wset is None else wset
    counts = [ws.counts[j] for j in octaves]
    w = regression_weights(octaves, counts if counts_weighted else None)
    X = X_tilde.data if isinstance(X_tilde, MultiSeries) else np.atleast_2d(X_tilde)
    n = X.shape[0]
    logs = np.empty((n, len(octaves)))
    for i in range(n):
        dg = np.array([ws[j][i, i] for j in octaves])
        if np.any(dg <= 0):
            raise ValidationError(f"channel {i} has nonpositive wavelet variance")
        logs[i] = np.log2(dg)
    d_hat = logs @ w
    j = np.asarray(octaves, dtype=float)
    # intercept of the line with slope 2 d_hat, weighted consistently with w
    c = np.asarray(counts, float) if counts_weighted else np.ones_like(j)
    icpt = ((logs - 2 * d_hat[:, None] * j) * c).sum(axis=1) / c.sum()
    resid = logs - (icpt[:, None] + 2 * d_hat[:, None] * j)
    return d_hat, resid, w


def _tag(cls) -> str:
    if isinstance(cls, ProcessClass):
        return cls.tag
    tag = str(cls).upper()
    return FARIMA if tag == "FARIMA" else tag


def d_to_h(d, cls) -> float:
    """Hurst exponent from the memory parameter: ``d - 1/2`` for fBm, ``d + 1/2`` otherwise."""
    tag = _tag(cls)
    if tag == FBM:
        h = d - 0.5
    elif tag in (FGN, FARIMA, FOU):
        h = d + 0.5
    else:
        raise ValidationError(f"unknown process class {cls!r}")
    if not 0 < h < 1:
        warnings.warn(f"h = {h:.4g} outside (0, 1)", OutOfRangeWarning, stacklevel=2)
    return float(h)


def h_to_d(h, cls) -> float:
    tag = _tag(cls)
    return h + 0.5 if tag == FBM else h - 0.5


def ci_halfwidth(d_hat, weights, octaves, nu_eff, basis, level=0.95, counts=None) -> np.ndarray:
    """Approximate CI half-width for each d_hat (demixing error ignored).

    ``V(d)`` describes ``nu * Cov(W_j/EW_j, W_j'/EW_j')``.  Since
    ``d_hat = sum w log2 W``, the delta method gives
    ``Var(d_hat) = w^T V w / (nu ln(2)^2)``.  With ``counts`` (coefficients
    per octave) each pair uses the effective length ``2^j K_j`` of its finer
    octave instead of ``nu_eff``, which accounts for boundary losses.
    """
    if not 0 < level < 1:
        raise ValidationError("level must be in (0, 1)")
    if nu_eff <= 0:
        raise ValidationError("nu_eff must be positive")
    z = norm.ppf(0.5 + level / 2)
    d_hat = np.atleast_1d(np.asarray(d_hat, dtype=float))
    W = np.asarray(weights, dtype=float)
    if W.ndim == 1:
        W = np.tile(W, (d_hat.size, 1))
    js = [int(j) for j in octaves]
    if counts is None:
        N = np.full((len(js), len(js)), float(nu_eff))
    else:
        eff = np.array([2.0 ** j * c for j, c in zip(js, counts)])
        k = np.arange(len(js))
        N = eff[np.minimum.outer(k, k)]   # octaves ascending: the finer one is min index
    out = np.empty(d_hat.size)
    for i, (d, w) in enumerate(zip(d_hat, W)):
        V = dwt.V_matrix(basis, float(d), js)
        out[i] = z * np.sqrt(w @ (V / N) @ w) / np.log(2)
    return out


def two_step(Y: MultiSeries, cfg: Optional[DemixConfig] = None, octaves=None,
             classes=None, level=0.95, with_ci=True) -> TwoStepResult:
    """Demix, normalize, regress and convert to Hurst exponents.

    ``classes`` (one per demixed channel, ascending memory) picks the d to h
    rule; default is the stationary rule ``h = d + 1/2``.
    """
    if not isinstance(Y, MultiSeries):
        Y = MultiSeries(Y)
    cfg = DemixConfig.default_for(Y.nu) if cfg is None else cfg
    octaves = octaves if octaves is not None else cfg.octaves
    if octaves is None:
        octaves = cfg.default_octaves(Y.nu)
    octaves = [int(j) for j in octaves]
    DemixConfig(cfg.J1, cfg.J2, basis=cfg.basis, octaves=octaves).check(Y.nu)

    B, diag = demix(Y, cfg)
    P_hat, flag = normalize_mixing(B, return_flag=True)
    # scale rows of B so that B^-1 = P_hat exactly: the demixed series are then
    # the hidden channels up to the column norms absorbed in P_hat
    Bn = np.linalg.inv(P_hat)
    Xt = MultiSeries(Bn @ Y.data, [f"demixed{i + 1}" for i in range(Y.n)], Y.seed)
    ws = _wset(Xt, octaves, cfg.basis)
    counts = [ws.counts[j] for j in octaves]
    d_hat, resid, w = estimate_memory(Xt, octaves, cfg.basis, cfg.weighting == "counts", ws)
    if classes is None:
        classes = [FGN] * Y.n
    elif len(classes) != Y.n:
        raise ValidationError("one process class per channel required")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OutOfRangeWarning)
        h_hat = np.array([d_to_h(d, c) for d, c in zip(d_hat, classes)])

    ci = None
    if with_ci:
        ci = ci_halfwidth(d_hat, w, octaves, Y.nu, cfg.basis, level, counts)
    logs = np.array([[np.log2(ws[j][i, i]) for j in octaves] for i in range(Y.n)])
    ejd_res = diag.pop("ejd")
    diagnostics = {
        **diag,
        "ejd_lambda": ejd_res.lam,
        "sign_flag": flag,
        "counts": counts,
        "log2_Wii": logs,
        "residuals": resid,
        "J1": cfg.J1,
        "J2": cfg.J2,
        "weighting": cfg.weighting,
    }
    return TwoStepResult(B, P_hat, Xt, d_hat, h_hat, np.tile(w, (Y.n, 1)), octaves,
                         1.0, ci, level, True, diagnostics)
