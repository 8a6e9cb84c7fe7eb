"""Exploratory pipeline for an observed multichannel record.

Correlograms of pre-whitened channels, wavelet scaling diagrams and
coherence before and after demixing, memory estimates over several octave
ranges and the one-sided equal-exponent test.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from itertools import combinations
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm

from . import dwt
from .estimator import DemixConfig, OutOfRangeWarning, ci_halfwidth, d_to_h, estimate_memory
from .estimator import two_step
from .series import MultiSeries, NumericalError, ValidationError

BAND_Z = 1.96


@dataclass
class Correlogram:
    lags: np.ndarray
    values: np.ndarray
    band: float

    def outside(self) -> np.ndarray:
        return np.abs(self.values) > self.band

    def to_dict(self):
        return {"lags": self.lags.tolist(), "values": self.values.tolist(), "band": self.band}


def _centered(x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValidationError("expected a single channel")
    xc = x - x.mean()
    ss = float(xc @ xc)
    if ss <= 1e-300 * max(1, x.size):
        raise ValidationError("series has zero variance")
    return xc, ss


def acf(series, max_lag) -> Correlogram:
    """Sample autocorrelation with the biased (divide by nu) normalization."""
    xc, ss = _centered(series)
    nu = xc.size
    if not 0 <= max_lag < nu / 4:
        raise ValidationError(f"max_lag must be in [0, nu/4); got {max_lag} for nu={nu}")
    vals = np.array([xc[:nu - k] @ xc[k:] for k in range(max_lag + 1)]) / ss
    return Correlogram(np.arange(max_lag + 1), vals, BAND_Z / np.sqrt(nu))


def ccf(series1, series2, max_lag) -> Correlogram:
    """``corr(x_t, y_{t+k})`` for k = -max_lag..max_lag, biased normalization."""
    x, sx = _centered(series1)
    y, sy = _centered(series2)
    if x.size != y.size:
        raise ValidationError("series lengths differ")
    nu = x.size
    if not 0 <= max_lag < nu / 4:
        raise ValidationError(f"max_lag must be in [0, nu/4); got {max_lag} for nu={nu}")
    lags = np.arange(-max_lag, max_lag + 1)
    vals = []
    for k in lags:
        if k >= 0:
            vals.append(x[:nu - k] @ y[k:])
        else:
            vals.append(x[-k:] @ y[:nu + k])
    return Correlogram(lags, np.array(vals) / np.sqrt(sx * sy), BAND_Z / np.sqrt(nu))


def prewhiten(series, max_order=20) -> Tuple[np.ndarray, int]:
    """AR(p) residuals with p chosen by AIC over 0..max_order.

    All orders are fitted by least squares on the same stretch
    ``t = max_order..nu-1`` so the AIC values are comparable.  The returned
    residuals cover that stretch; with ``max_order = 0`` this is the whole
    demeaned input.
    """
    x = np.asarray(series, dtype=float)
    nu = x.size
    if max_order < 0 or max_order >= nu / 10:
        raise ValidationError(f"max_order must be in [0, nu/10); got {max_order} for nu={nu}")
    xc = x - x.mean()
    y = xc[max_order:]
    N = y.size
    best = (N * np.log(max(float(y @ y) / N, 1e-300)), 0, y.copy())
    if max_order == 0:
        return y.copy(), 0
    lagged = np.column_stack([xc[max_order - k:nu - k] for k in range(1, max_order + 1)])
    cond = np.linalg.cond(lagged)
    if not np.isfinite(cond) or cond > 1e12:
        raise NumericalError(f"pre-whitening normal equations ill-conditioned (cond={cond:.2e})")
    for p in range(1, max_order + 1):
        Z = lagged[:, :p]
        coef, *_ = np.linalg.lstsq(Z, y, rcond=None)
        resid = y - Z @ coef
        aic = N * np.log(max(float(resid @ resid) / N, 1e-300)) + 2 * p
        if aic < best[0]:
            best = (aic, p, resid)
    return best[2], best[1]


@dataclass
class AnalysisConfig:
    J1: int = 1
    J2: Optional[int] = None
    n_psi: int = 2
    octave_ranges: Optional[List[Tuple[int, int]]] = None
    hurst_class: str = "FGN"
    max_lag: int = 20
    max_order: int = 20
    level: float = 0.95
    weighting: str = "counts"
    demix: bool = True
    test_sd: Optional[float] = None

    @classmethod
    def from_dict(cls, d) -> "AnalysisConfig":
        extra = set(d) - set(cls.__dataclass_fields__)
        if extra:
            raise ValidationError(f"unknown analysis keys: {sorted(extra)}")
        d = dict(d)
        if d.get("octave_ranges") is not None:
            d["octave_ranges"] = [tuple(int(v) for v in r) for r in d["octave_ranges"]]
        return cls(**d)


def _scaling_rows(ws, labels):
    rows = []
    for i, lab in enumerate(labels):
        for j in ws.octaves:
            v = ws[j][i, i]
            rows.append((j, float(np.log2(v)) if v > 0 else float("nan"), lab))
    return rows


def _coherence_table(ws, n):
    out = {}
    for a, b in combinations(range(n), 2):
        out[f"{a + 1}-{b + 1}"] = [(j, float(c)) for j, c in zip(ws.octaves, dwt.coherence(ws, a, b))]
    return out


def analyze(Y: MultiSeries, cfg: Optional[AnalysisConfig] = None) -> dict:
    """Run the full pipeline on an observed record (at least two channels)."""
    cfg = cfg or AnalysisConfig()
    if Y.n < 2:
        raise ValidationError("analysis needs at least two channels")
    basis = dwt.daubechies_filters(cfg.n_psi)
    if cfg.J2 is None:
        dcfg = DemixConfig.default_for(Y.nu, n_psi=cfg.n_psi, weighting=cfg.weighting)
        dcfg.J1 = cfg.J1
    else:
        dcfg = DemixConfig(cfg.J1, cfg.J2, n_psi=cfg.n_psi, weighting=cfg.weighting)
    usable = dcfg.feasible_octaves(Y.nu)
    top = usable[-1]
    ranges = cfg.octave_ranges
    if ranges is None:
        ranges = [r for r in [(3, 7), (3, 9)] if r[1] <= top] or [(usable[0], top)]
    for lo, hi in ranges:
        if not (1 <= lo < hi <= top):
            raise ValidationError(f"octave range ({lo},{hi}) infeasible; usable octaves 1..{top}")

    if cfg.demix:
        res = two_step(Y, dcfg, octaves=list(range(ranges[0][0], ranges[0][1] + 1)), with_ci=False)
        P_hat, B_hat = res.P_hat, res.B_hat
        X = res.demixed
        eigengap = float(res.diagnostics["eigengap"])
    else:
        P_hat = B_hat = np.eye(Y.n)
        X = MultiSeries(Y.data.copy(), Y.labels, Y.seed)
        eigengap = None
    X.labels = [f"demixed{i + 1}" for i in range(Y.n)] if cfg.demix else list(Y.labels)

    j_plot = dwt.max_octave(Y.nu, basis.length, min_count=2)
    ws_y = dwt.wavelet_variance(dwt.pyramid(Y, j_plot, basis))
    ws_x = dwt.wavelet_variance(dwt.pyramid(X, j_plot, basis))

    z = norm.ppf(0.5 + cfg.level / 2)
    estimates = []
    for lo, hi in ranges:
        octs = list(range(lo, hi + 1))
        d_hat, resid, w = estimate_memory(X, octs, basis, cfg.weighting == "counts")
        counts = [ws_x.counts[j] for j in octs]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OutOfRangeWarning)
            h_hat = [d_to_h(d, cfg.hurst_class) for d in d_hat]
        try:
            hw = ci_halfwidth(d_hat, w, octs, Y.nu, basis, cfg.level, counts)
        except (ValidationError, NumericalError):
            hw = np.full(Y.n, np.nan)
        estimates.append({"octaves": [lo, hi], "d_hat": d_hat, "h_hat": h_hat,
                          "ci_halfwidth": hw, "se": hw / z, "residuals": resid})

    first = estimates[0]
    order = np.argsort(first["h_hat"])
    i1, i2 = int(order[0]), int(order[-1])
    diff = float(first["h_hat"][i2] - first["h_hat"][i1])
    sd = cfg.test_sd if cfg.test_sd is not None else float(np.hypot(first["se"][i1], first["se"][i2]))
    test = {"octaves": first["octaves"], "low": i1, "high": i2, "diff": diff, "sd": sd,
            "threshold": 1.645 * sd, "reject_equal": bool(diff > 1.645 * sd)}

    ccfs, orders = {}, {}
    for stage, S in (("original", Y), ("demixed", X)):
        resids, ps = [], []
        for i in range(S.n):
            r, p = prewhiten(S.data[i], cfg.max_order)
            resids.append(r)
            ps.append(p)
        m = min(len(r) for r in resids)
        resids = [r[-m:] for r in resids]
        orders[stage] = ps
        ccfs[stage] = {f"{a + 1}-{b + 1}": ccf(resids[a], resids[b], cfg.max_lag).to_dict()
                       for a, b in combinations(range(S.n), 2)}

    return {
        "channels": list(Y.labels),
        "nu": Y.nu,
        "J1": dcfg.J1, "J2": dcfg.J2,
        "B_hat": B_hat, "P_hat": P_hat, "P_hat_inv": np.linalg.inv(P_hat),
        "eigengap": eigengap,
        "scaling": {"original": _scaling_rows(ws_y, Y.labels), "demixed": _scaling_rows(ws_x, X.labels)},
        "coherence": {"original": _coherence_table(ws_y, Y.n), "demixed": _coherence_table(ws_x, X.n)},
        "coherence_band": {str(j): BAND_Z / np.sqrt(k) for j, k in ws_y.counts.items()},
        "estimates": estimates,
        "equal_h_test": test,
        "prewhiten_orders": orders,
        "ccf": ccfs,
        "demixed": X,
    }
