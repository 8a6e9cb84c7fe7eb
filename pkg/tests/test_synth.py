import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import gamma

from wavemix import synth
from wavemix.series import MultiSeries, NumericalError, ValidationError, make_rng, replication_rng
from wavemix.synth import (LangevinSpec, MixingSpec, ProcessClass, aggregate_langevin,
                           circulant_eigenvalues, farima_ma_coefficients, fgn_autocov, fou_path,
                           mix, synth_farima, synth_fbm, synth_fgn, synth_fou, synth_hidden)


def gaussian_acov_se(gamma_fn, k, nu):
    """Exact sd of the known-mean sample autocovariance at lag k of a Gaussian series."""
    m = nu - k
    u = np.arange(-(m - 1), m)
    g = gamma_fn(np.abs(u))
    cross = gamma_fn(np.abs(u + k)) * gamma_fn(np.abs(u - k))
    return np.sqrt(np.sum((m - np.abs(u)) * (g ** 2 + cross)) / m ** 2)


# -- fgn_autocov -------------------------------------------------------------

def test_fgn_autocov_examples():
    assert fgn_autocov(0.5, 1) == pytest.approx(0.0, abs=1e-15)
    assert fgn_autocov(0.8, 1) == pytest.approx((2 ** 1.6 - 2) / 2, rel=1e-12)
    assert fgn_autocov(0.8, 1) == pytest.approx(0.51572, abs=1e-5)
    assert fgn_autocov(0.25, 1) == pytest.approx(-0.29289, abs=1e-5)
    assert fgn_autocov(0.3, 0) == 1.0


@pytest.mark.parametrize("h", [0.0, 1.0, -0.2, 1.5])
def test_fgn_autocov_domain(h):
    with pytest.raises(ValidationError):
        fgn_autocov(h, 1)


# -- fGn / fBm ---------------------------------------------------------------

def test_fgn_white_noise_lag1():
    x = synth_fgn(0.5, 2 ** 14, seed=1).data[0]
    r1 = np.dot(x[:-1], x[1:]) / np.dot(x, x)
    assert abs(r1) < 3 / np.sqrt(x.size)


def test_fgn_lag1_h08():
    nu = 2 ** 16
    x = synth_fgn(0.8, nu, seed=2).data[0]
    g1 = np.dot(x[:-1], x[1:]) / (nu - 1)
    se = gaussian_acov_se(lambda k: fgn_autocov(0.8, k), 1, nu)
    assert abs(g1 - fgn_autocov(0.8, 1)) < 3 * se


def test_fgn_deterministic():
    a = synth_fgn(0.7, 1000, seed=42).data
    b = synth_fgn(0.7, 1000, seed=42).data
    assert np.array_equal(a, b)
    assert not np.array_equal(a, synth_fgn(0.7, 1000, seed=43).data)


@pytest.mark.parametrize("h", [0.05, 0.2, 0.5, 0.8, 0.95])
def test_circulant_eigenvalues_nonnegative(h):
    lam = circulant_eigenvalues(h, 4096)
    assert lam.min() > -1e-10 * lam.max()


def test_negative_circulant_guard(monkeypatch):
    monkeypatch.setattr(synth, "circulant_eigenvalues", lambda h, nu: -np.ones(2 * nu))
    with pytest.raises(NumericalError):
        synth.fgn_path(0.5, 16, make_rng(0))


def test_fbm_increments_are_fgn():
    b = synth_fbm(0.7, 512, seed=5).data[0]
    inc = synth.fgn_path(0.7, 511, make_rng(5))
    assert b[0] == 0.0
    assert np.allclose(np.diff(b), inc, atol=1e-12)


def test_fbm_random_walk_variance():
    nu, R = 256, 400
    paths = np.array([synth.fbm_path(0.5, nu, replication_rng(9, r)) for r in range(R)])
    var = paths.var(axis=0)
    k = np.arange(nu)
    # var of a sample variance of R normals is 2 sigma^4 / R
    mask = k >= 10
    assert np.all(np.abs(var[mask] - k[mask]) < 4 * k[mask] * np.sqrt(2 / R))


# -- FARIMA ------------------------------------------------------------------

def test_farima_d0_is_white_noise():
    psi = farima_ma_coefficients(0.0, 50)
    assert psi[0] == 1 and np.all(psi[1:] == 0)


def test_farima_coefficients_match_gamma_ratio():
    d = 0.3
    psi = farima_ma_coefficients(d, 30)
    k = np.arange(30)
    ref = gamma(k + d) / (gamma(d) * gamma(k + 1))
    assert np.allclose(psi, ref, rtol=1e-12)


def test_farima_variance():
    d, nu, R = 0.3, 4096, 40
    ref = gamma(1 - 2 * d) / gamma(1 - d) ** 2
    assert synth.farima_variance(d) == pytest.approx(ref, rel=1e-12)
    per_path = [np.mean(synth.farima_path(d, nu, replication_rng(11, r)) ** 2) for r in range(R)]
    se = np.std(per_path, ddof=1) / np.sqrt(R)
    assert abs(np.mean(per_path) - ref) < 3 * se


def test_farima_seeds_differ():
    a = synth_farima(0.4, 2048, seed=1).data[0]
    b = synth_farima(0.4, 2048, seed=2).data[0]
    assert not np.allclose(a, b)
    assert np.array_equal(a, synth_farima(0.4, 2048, seed=1).data[0])


@pytest.mark.parametrize("d", [0.5, -0.5, 0.7])
def test_farima_domain(d):
    with pytest.raises(ValidationError):
        synth_farima(d, 100, seed=0)


# -- fOU ---------------------------------------------------------------------

def test_fou_zero_drift_is_fbm():
    h, nu, dt = 0.7, 200, 0.1
    x = fou_path(1e-12, h, nu, make_rng(3), dt=dt)
    inc = dt ** h * synth.fgn_path(h, (nu - 1) * 10, make_rng(3))
    ref = np.concatenate([[0.0], np.cumsum(inc)])[::10]
    assert np.max(np.abs(x - ref)) < 1e-6


def test_fou_stationary_variance_h05():
    lam, dt, nu = 1.0, 0.1, 2 ** 14
    x = synth_fou(lam, 0.5, nu, dt=dt, seed=4, burn_in=20.0).data[0]
    target = synth.fou_stationary_variance_h05(lam, dt)
    a = (1 - lam * dt) ** 10                 # lag-1 autocorrelation at unit spacing
    se = target * np.sqrt(2 * (1 + a * a) / (1 - a * a) / nu)
    assert abs(np.mean(x ** 2) - target) < 3 * se


def test_fou_deterministic_and_unstable():
    a = synth_fou(2.0, 0.6, 300, seed=8).data
    assert np.array_equal(a, synth_fou(2.0, 0.6, 300, seed=8).data)
    with pytest.raises(NumericalError):
        synth_fou(10.0, 0.6, 300, dt=0.1, seed=8)


# -- classes and mixing ------------------------------------------------------

def test_process_class_invariants():
    with pytest.raises(ValidationError):
        ProcessClass.fgn(1.2)
    with pytest.raises(ValidationError):
        ProcessClass.farima(0.5)
    with pytest.raises(ValidationError):
        ProcessClass.fou(0.0, 0.5)
    with pytest.raises(ValidationError):
        ProcessClass("OU", h=0.5)
    assert ProcessClass.fbm(0.3).memory == pytest.approx(0.8)
    assert ProcessClass.fgn(0.3).memory == pytest.approx(-0.2)
    assert ProcessClass.farima(0.1).memory == 0.1


def test_mix_identity_and_p4():
    X = synth_hidden([ProcessClass.fgn(h) for h in (0.2, 0.4, 0.6, 0.8)], 64, seed=1)
    assert np.array_equal(mix(np.eye(4), X).data, X.data)
    Y = mix(MixingSpec(synth.MIXING_P4), X)
    P = synth.MIXING_P4
    for i in range(4):
        row = sum(P[i, k] * X.data[k] for k in range(4))
        assert np.allclose(Y.data[i], row, atol=1e-14)


def test_mix_singular():
    X = MultiSeries(np.random.default_rng(0).normal(size=(2, 10)))
    with pytest.raises(ValidationError):
        mix(np.array([[1.0, 1.0], [2.0, 2.0]]), X)


def test_mixing_spec_normalized():
    assert not MixingSpec(synth.MIXING_P2).is_normalized()
    assert MixingSpec(np.eye(3)).is_normalized()


def test_synth_hidden_reproducible():
    cl = [ProcessClass.fgn(0.3), ProcessClass.fou(1.0, 0.7), ProcessClass.farima(0.2)]
    a = synth_hidden(cl, 256, seed=7)
    b = synth_hidden(cl, 256, seed=7)
    assert np.array_equal(a.data, b.data)


@pytest.mark.property
@given(a=st.floats(-5, 5), b=st.floats(-5, 5), seed=st.integers(0, 2 ** 32 - 1))
def test_mix_is_linear(a, b, seed):
    g = np.random.default_rng(seed)
    P = g.normal(size=(3, 3)) + 3 * np.eye(3)
    X1 = MultiSeries(g.normal(size=(3, 16)))
    X2 = MultiSeries(g.normal(size=(3, 16)))
    lhs = mix(P, MultiSeries(a * X1.data + b * X2.data)).data
    rhs = a * mix(P, X1).data + b * mix(P, X2).data
    assert np.allclose(lhs, rhs, atol=1e-12 * (1 + abs(a) + abs(b)) * np.abs(P).sum() * 10)


# -- Langevin aggregation ----------------------------------------------------

def _lag1(x):
    x = x - x.mean()
    return np.dot(x[:-1], x[1:]) / np.dot(x, x)


def test_langevin_white_noise_limit():
    spec = LangevinSpec(Phi=[[-1.0]], Sigma=[[1.0]], h=[0.5], Delta=256.0, dt=0.5)
    y = aggregate_langevin(spec, 4000, seed=1).data[0]
    assert abs(_lag1(y)) < 0.05


def test_langevin_fgn_limit():
    spec = LangevinSpec(Phi=[[-1.0]], Sigma=[[1.0]], h=[0.8], Delta=256.0, dt=0.5)
    y = aggregate_langevin(spec, 4000, seed=2).data[0]
    assert abs(_lag1(y) - fgn_autocov(0.8, 1)) < 0.1


def test_langevin_degenerate_window():
    spec = LangevinSpec(Phi=[[-1.0, 0.2], [0.2, -2.0]], Sigma=[[1.0, 0.0], [0.0, 2.0]],
                        h=[0.6, 0.8], Delta=0.1, dt=0.1)
    out = aggregate_langevin(spec, 50, seed=3)
    assert out.data.shape == (2, 50) and np.all(np.isfinite(out.data))


def test_langevin_validation():
    with pytest.raises(ValidationError):
        LangevinSpec(Phi=[[1.0]], Sigma=[[1.0]], h=[0.5], Delta=1.0)
    with pytest.raises(ValidationError):
        LangevinSpec(Phi=[[-1.0]], Sigma=[[-1.0]], h=[0.5], Delta=1.0)
    with pytest.raises(ValidationError):
        LangevinSpec(Phi=[[-1.0]], Sigma=[[1.0]], h=[0.5], Delta=0.05, dt=0.1)


# -- RNG streams -------------------------------------------------------------

def test_replication_streams_independent_of_order():
    a = replication_rng(5, 3).standard_normal(4)
    replication_rng(5, 0).standard_normal(100)
    b = replication_rng(5, 3).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, replication_rng(5, 4).standard_normal(4))
