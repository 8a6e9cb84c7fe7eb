"""Multichannel series container and RNG stream helpers."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

SeedLike = Union[int, np.random.Generator, None]


class ValidationError(ValueError):
    """Invalid input (maps to CLI exit code 2)."""


class NumericalError(ArithmeticError):
    """Numerical failure: non-convergence, negative circulant eigenvalues, ... (exit code 3)."""


@dataclass
class MultiSeries:
    """n-channel real series stored row-wise, shape ``(n, nu)``."""

    data: np.ndarray
    labels: list = field(default_factory=list)
    seed: Optional[int] = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim == 1:
            data = data[None, :]
        if data.ndim != 2:
            raise ValidationError("series data must be 1-D or 2-D")
        if data.shape[1] < 2:
            raise ValidationError("series needs at least 2 samples")
        if not np.all(np.isfinite(data)):
            raise ValidationError("series contains non-finite values")
        self.data = data
        if not self.labels:
            self.labels = [f"x{i + 1}" for i in range(data.shape[0])]
        elif len(self.labels) != data.shape[0]:
            raise ValidationError("label count does not match channel count")
        self.labels = [str(s) for s in self.labels]

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def nu(self) -> int:
        return self.data.shape[1]

    def channel(self, i: int) -> np.ndarray:
        return self.data[i]

    @classmethod
    def stack(cls, parts: Sequence["MultiSeries"], labels=None) -> "MultiSeries":
        nu = min(p.nu for p in parts)
        data = np.vstack([p.data[:, :nu] for p in parts])
        if labels is None:
            labels = [lab for p in parts for lab in p.labels]
            if len(set(labels)) != len(labels):
                labels = None
        return cls(data, labels or [])


def make_rng(seed: SeedLike = None, stream: Sequence[int] = ()) -> np.random.Generator:
    """Counter-based Philox generator keyed by ``(seed, *stream)``.

    Passing an existing Generator returns it unchanged, so callers can thread
    one stream through several synthesis calls.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


def replication_rng(seed: int, rep: int) -> np.random.Generator:
    return make_rng(seed, (rep,))
