"""Simulation and wavelet-based estimation for linearly mixed long-memory processes."""
from .series import MultiSeries, NumericalError, ValidationError, make_rng, replication_rng
from .synth import (FARIMA, FBM, FGN, FOU, MIXING_P2, MIXING_P4, LangevinSpec, MixingSpec,
                    ProcessClass, mix, synth_farima, synth_fbm, synth_fgn, synth_fou, synth_hidden)
from .dwt import WaveletBasis, daubechies_filters, pyramid, wavelet_variance
from .matalg import DegenerateWarning, ejd, eigen_jacobian, jacobi_eigh
from .estimator import DemixConfig, TwoStepResult, normalize_mixing, two_step
from .whittle import WhittleFit, whittle_fit
from .harness import ExperimentConfig, McReport, mc_run
from .analysis import AnalysisConfig, analyze

__all__ = [
    "MultiSeries", "NumericalError", "ValidationError", "make_rng", "replication_rng",
    "FARIMA", "FBM", "FGN", "FOU", "MIXING_P2", "MIXING_P4", "LangevinSpec", "MixingSpec",
    "ProcessClass", "mix", "synth_farima", "synth_fbm", "synth_fgn", "synth_fou", "synth_hidden",
    "WaveletBasis", "daubechies_filters", "pyramid", "wavelet_variance",
    "DegenerateWarning", "ejd", "eigen_jacobian", "jacobi_eigh",
    "DemixConfig", "TwoStepResult", "normalize_mixing", "two_step",
    "WhittleFit", "whittle_fit", "ExperimentConfig", "McReport", "mc_run",
    "AnalysisConfig", "analyze",
]
