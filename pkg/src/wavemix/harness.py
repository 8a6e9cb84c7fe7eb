"""Monte Carlo experiments over synthetic mixed processes."""
from __future__ import annotations

import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import synth
from .estimator import DemixConfig, normalize_mixing, two_step
from .matalg import DegenerateWarning
from .series import NumericalError, ValidationError, replication_rng
from .synth import ProcessClass

NAMED_MIXING = {
    "P4": synth.MIXING_P4,
    "P2": synth.MIXING_P2,
}


def resolve_mixing(P, n=None) -> np.ndarray:
    """Matrix from a nested list, a named constant (``"P2"``, ``"P4"``) or ``"identity"``."""
    if isinstance(P, str):
        key = P.strip()
        if key.lower() in ("i", "identity", "eye"):
            if n is None:
                raise ValidationError("identity mixing needs the channel count")
            return np.eye(n)
        if key.upper() not in NAMED_MIXING:
            raise ValidationError(f"unknown mixing matrix {P!r}")
        return NAMED_MIXING[key.upper()].copy()
    M = np.asarray(P, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValidationError("mixing matrix must be square")
    return M


def parse_class(spec) -> ProcessClass:
    """``{"tag": "FGN", "h": 0.3}`` or the compact string ``"fgn:0.3"`` / ``"fou:1.0:0.7"``."""
    if isinstance(spec, ProcessClass):
        return spec
    if isinstance(spec, dict):
        return ProcessClass(spec["tag"], h=spec.get("h"), d=spec.get("d"), lam=spec.get("lam"))
    parts = str(spec).split(":")
    tag = parts[0].upper()
    try:
        vals = [float(p) for p in parts[1:]]
    except ValueError as exc:
        raise ValidationError(f"bad process spec {spec!r}") from exc
    if tag in ("FGN", "FBM") and len(vals) == 1:
        return ProcessClass(tag, h=vals[0])
    if tag in ("FARIMA", "FARIMA0D0") and len(vals) == 1:
        return ProcessClass("FARIMA0D0", d=vals[0])
    if tag == "FOU" and len(vals) == 2:
        return ProcessClass("FOU", lam=vals[0], h=vals[1])
    raise ValidationError(f"bad process spec {spec!r}")


def class_to_dict(c: ProcessClass) -> dict:
    return {k: v for k, v in asdict(c).items() if v is not None}


@dataclass
class ExperimentConfig:
    classes: List[ProcessClass]
    nu: int = 1024
    replications: int = 100
    P: np.ndarray = None
    J1: int = 1
    J2: int = 6
    octaves: Optional[List[int]] = None
    n_psi: int = 2
    weighting: str = "counts"
    whittle: bool = False
    seed: int = 0
    threads: int = 1
    dt: float = 0.1
    burn_in: float = 0.0
    out_dir: Optional[str] = None

    def __post_init__(self):
        self.classes = [parse_class(c) for c in self.classes]
        if not self.classes:
            raise ValidationError("at least one hidden channel is required")
        self.P = resolve_mixing("identity" if self.P is None else self.P, self.n)
        if self.P.shape != (self.n, self.n):
            raise ValidationError(f"P is {self.P.shape} but there are {self.n} channels")
        if self.replications < 1:
            raise ValidationError("replications must be >= 1")
        if self.threads < 1:
            raise ValidationError("threads must be >= 1")
        if self.nu & (self.nu - 1):
            warnings.warn(f"nu={self.nu} is not a power of 2", UserWarning, stacklevel=2)
        if self.whittle and (self.n != 2 or any(c.tag != synth.FGN for c in self.classes)):
            raise ValidationError("the Whittle baseline needs exactly two fGn channels")
        if self.octaves is not None:
            self.octaves = [int(j) for j in self.octaves]
        self.demix_config()    # validates the octave settings early

    @property
    def n(self) -> int:
        return len(self.classes)

    def demix_config(self) -> DemixConfig:
        cfg = DemixConfig(self.J1, self.J2, n_psi=self.n_psi, octaves=self.octaves,
                          weighting=self.weighting)
        cfg.check(self.nu)
        return cfg

    def to_dict(self) -> dict:
        return {
            "classes": [class_to_dict(c) for c in self.classes],
            "nu": self.nu, "replications": self.replications, "P": self.P.tolist(),
            "J1": self.J1, "J2": self.J2, "octaves": self.octaves, "n_psi": self.n_psi,
            "weighting": self.weighting, "whittle": self.whittle, "seed": self.seed,
            "threads": self.threads, "dt": self.dt, "burn_in": self.burn_in,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValidationError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)


@dataclass
class ParamSummary:
    truth: float
    mean: float
    bias: float
    sd: float
    rmse: float

    @classmethod
    def of(cls, values, truth) -> "ParamSummary":
        v = np.asarray(values, dtype=float)
        mean = float(v.mean())
        sd = float(v.std(ddof=1)) if v.size > 1 else 0.0
        rmse = float(np.sqrt(np.mean((v - truth) ** 2)))
        return cls(float(truth), mean, mean - float(truth), sd, rmse)


@dataclass
class McReport:
    config: dict
    params: Dict[str, ParamSummary]
    rows: List[dict]
    timing: Dict[str, float]
    replications: int = 0
    flags: Dict[str, int] = field(default_factory=dict)

    def summary(self, name) -> ParamSummary:
        return self.params[name]

    def column(self, name) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def results_dict(self) -> dict:
        return {
            "replications": self.replications,
            "params": {k: asdict(v) for k, v in self.params.items()},
            "flags": self.flags,
        }


def _truth(cfg: ExperimentConfig):
    """Hidden classes and mixing columns in ascending memory (the estimator's output order)."""
    order = sorted(range(cfg.n), key=lambda i: cfg.classes[i].memory)
    classes = [cfg.classes[i] for i in order]
    P = cfg.P[:, order]
    return classes, normalize_mixing(np.linalg.inv(P)), P


def _one_rep(cfg: ExperimentConfig, r: int, classes, P_norm) -> dict:
    from .whittle import whittle_fit

    rng = replication_rng(cfg.seed, r)
    X = synth.synth_hidden(cfg.classes, cfg.nu, rng, dt=cfg.dt, burn_in=cfg.burn_in)
    Y = synth.mix(cfg.P, X)
    dcfg = cfg.demix_config()
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateWarning)
        res = two_step(Y, dcfg, classes=classes, with_ci=False)
    t_wave = time.perf_counter() - t0
    row = {"rep": r, "time_two_step": t_wave, "degenerate": bool(res.diagnostics["degenerate"])}
    for i in range(cfg.n):
        row[f"h{i + 1}"] = float(res.h_hat[i])
        row[f"d{i + 1}"] = float(res.d_hat[i])
    E = np.linalg.inv(res.P_hat) @ P_norm - np.eye(cfg.n)
    for a in range(cfg.n):
        for b in range(cfg.n):
            row[f"E{a + 1}{b + 1}"] = float(E[a, b])
    if cfg.whittle:
        fit = whittle_fit(Y)
        row.update({"ml_h1": fit.h1, "ml_h2": fit.h2, "time_whittle": fit.wall_time,
                    "ml_converged": fit.converged})
        for a in range(2):
            for b in range(2):
                row[f"ml_p{a + 1}{b + 1}"] = float(fit.P_hat[a, b])
    return row


def mc_run(cfg: ExperimentConfig) -> McReport:
    """Run ``cfg.replications`` independent replications.

    Replication r draws from the stream keyed by ``(seed, r)`` and rows are
    merged in replication order, so the statistics do not depend on the
    thread count.
    """
    classes, P_norm, P_sorted = _truth(cfg)

    def job(r):
        try:
            return _one_rep(cfg, r, classes, P_norm)
        except (ValidationError, NumericalError) as exc:
            raise type(exc)(f"replication {r}: {exc}") from exc
        except Exception as exc:
            raise NumericalError(f"replication {r}: {exc!r}") from exc

    reps = range(cfg.replications)
    if cfg.threads == 1:
        rows = [job(r) for r in reps]
    else:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            rows = list(pool.map(job, reps))

    params = {}
    for i, c in enumerate(classes):
        true_h = c.h if c.h is not None else c.memory + 0.5
        params[f"h{i + 1}"] = ParamSummary.of([r[f"h{i + 1}"] for r in rows], true_h)
        params[f"d{i + 1}"] = ParamSummary.of([r[f"d{i + 1}"] for r in rows], c.memory)
    for a in range(cfg.n):
        for b in range(cfg.n):
            key = f"E{a + 1}{b + 1}"
            params[key] = ParamSummary.of([r[key] for r in rows], 0.0)
    timing = {"two_step_mean_s": float(np.mean([r["time_two_step"] for r in rows]))}
    if cfg.whittle:
        for i, c in enumerate(classes):
            params[f"ml_h{i + 1}"] = ParamSummary.of([r[f"ml_h{i + 1}"] for r in rows], c.h)
        for a in range(2):
            for b in range(2):
                key = f"ml_p{a + 1}{b + 1}"
                params[key] = ParamSummary.of([r[key] for r in rows], P_sorted[a, b])
        timing["whittle_mean_s"] = float(np.mean([r["time_whittle"] for r in rows]))
        timing["ratio"] = timing["whittle_mean_s"] / timing["two_step_mean_s"]
    flags = {"degenerate": int(sum(r["degenerate"] for r in rows))}
    if cfg.whittle:
        flags["ml_not_converged"] = int(sum(not r["ml_converged"] for r in rows))
    return McReport(cfg.to_dict(), params, rows, timing, cfg.replications, flags)
