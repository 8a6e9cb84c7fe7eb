import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from wavemix import dwt, synth
from wavemix.dwt import (K_integral, V_matrix, coefficient_counts, coherence, daubechies_filters,
                         psi_hat, psi_hat_sq, pyramid, wavelet_variance)
from wavemix.matalg import b_constant
from wavemix.series import MultiSeries, ValidationError, replication_rng

HAAR = daubechies_filters(1)
D2 = daubechies_filters(2)


def haar_psi_sq(x):
    return 16 * np.sin(x / 4) ** 4 / x ** 2


# -- filters -----------------------------------------------------------------

def test_haar_filters():
    s = 1 / np.sqrt(2)
    assert np.allclose(HAAR.h, [s, s], atol=1e-15)
    assert np.allclose(HAAR.g, [s, -s], atol=1e-15)


def test_d2_closed_form():
    r3 = np.sqrt(3)
    ref = np.array([1 + r3, 3 + r3, 3 - r3, 1 - r3]) / (4 * np.sqrt(2))
    assert np.allclose(D2.h, ref, atol=1e-14)


@pytest.mark.parametrize("n_psi", range(1, 11))
def test_filter_invariants(n_psi):
    b = daubechies_filters(n_psi)
    h, g = b.h, b.g
    L = b.length
    assert L == 2 * n_psi
    assert abs(h.sum() - np.sqrt(2)) < 1e-12
    for m in range(L // 2):
        assert abs(np.dot(h[: L - 2 * m], h[2 * m:]) - (m == 0)) < 1e-10
    assert np.allclose(g, [(-1) ** k * h[L - 1 - k] for k in range(L)], atol=0)
    # moments about the filter centre; equivalent to the raw moments by the binomial
    # theorem and free of the 1e11-sized cancellations the raw form has at n_psi >= 8
    kc = np.arange(L) - (L - 1) / 2
    for m in range(n_psi):
        assert abs(np.sum(g * kc ** m)) < 1e-8
    k = np.arange(L)
    for m in range(n_psi):
        assert abs(np.sum(g * k ** m)) <= 1e-12 * np.sum(np.abs(g) * k ** m) + 1e-14


@pytest.mark.parametrize("bad", [0, 11, 2.5, "2"])
def test_filter_range(bad):
    with pytest.raises(ValidationError):
        daubechies_filters(bad)


# -- pyramid -----------------------------------------------------------------

@pytest.mark.parametrize("n_psi", [1, 2, 4])
def test_constant_series_zero_details(n_psi):
    b = daubechies_filters(n_psi)
    pyr = pyramid(np.full(512, 3.7), 4, b, demean=False)
    for j in range(1, 5):
        assert np.max(np.abs(pyr.detail(j))) < 1e-12


def test_linear_ramp_annihilated():
    pyr = pyramid(np.arange(1024.0), 5, D2, demean=False)
    for j in range(1, 6):
        assert np.max(np.abs(pyr.detail(j))) < 1e-10 * 1024


def test_haar_impulse():
    x = np.zeros(8)
    x[3] = 1.0
    d1 = pyramid(x, 1, HAAR, demean=False).detail(1)[0]
    nz = d1[np.abs(d1) > 0]
    assert nz.size == 1 and abs(abs(nz[0]) - 1 / np.sqrt(2)) < 1e-15
    x = np.zeros(8)
    x[2:4] = 1.0
    assert np.allclose(pyramid(x, 1, HAAR, demean=False).detail(1), 0, atol=1e-15)
    x = np.zeros(8)
    x[2], x[5] = 1.0, 1.0
    d1 = pyramid(x, 1, HAAR, demean=False).detail(1)[0]
    assert sorted(np.round(d1[np.abs(d1) > 0] * np.sqrt(2), 12)) == [-1.0, 1.0]


def test_pyramid_too_short_names_max():
    with pytest.raises(ValidationError, match="maximal feasible j_max is 3"):
        pyramid(np.random.default_rng(0).normal(size=30), 5, D2)


def test_counts_bound():
    for nu in (100, 1000, 6000, 2 ** 14):
        c = coefficient_counts(nu, 10, D2.length)
        for a, b in zip(c, c[1:]):
            assert b <= a / 2 + 1


@pytest.mark.property
@given(n_psi=st.integers(1, 6), j=st.integers(1, 6), seed=st.integers(0, 2 ** 32 - 1))
def test_parseval_periodic(n_psi, j, seed):
    b = daubechies_filters(n_psi)
    x = np.random.default_rng(seed).normal(size=2 ** 8)
    pyr = pyramid(x, j, b, mode="periodic", demean=False)
    energy = np.sum(pyr.approx ** 2) + sum(np.sum(d ** 2) for d in pyr.details)
    assert abs(energy - np.sum(x ** 2)) < 1e-10 * np.sum(x ** 2)


@pytest.mark.property
@given(n_psi=st.integers(1, 6), seed=st.integers(0, 2 ** 32 - 1), j=st.integers(1, 3))
def test_polynomial_annihilation(n_psi, seed, j):
    g = np.random.default_rng(seed)
    b = daubechies_filters(n_psi)
    t = np.linspace(-1, 1, 256)
    coef = g.normal(size=n_psi)             # degree n_psi - 1
    x = np.polyval(coef, t) * 100
    pyr = pyramid(x, j, b, demean=False)
    scale = np.linalg.norm(x)
    for jj in range(1, j + 1):
        assert np.max(np.abs(pyr.detail(jj))) < 1e-9 * scale


@pytest.mark.property
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(1, 4))
def test_wavelet_variance_symmetric_psd(seed, n):
    x = np.random.default_rng(seed).normal(size=(n, 200))
    ws = wavelet_variance(pyramid(x, 3, D2))
    for j in ws.octaves:
        W = ws[j]
        assert np.array_equal(W, W.T)
        assert np.linalg.eigvalsh(W).min() > -1e-10


# -- wavelet variance and coherence ------------------------------------------

def test_wavelet_variance_equal_vectors():
    v = np.array([1.5, -2.0, 0.5])
    D = np.tile(v[:, None], (1, 10))
    pyr = dwt.Pyramid([D], np.zeros((3, 1)), D2)
    ws = wavelet_variance(pyr)
    assert np.allclose(ws[1], np.outer(v, v), atol=1e-14)


def test_wavelet_variance_white_noise():
    x = synth.synth_fgn(0.5, 2 ** 16, seed=3)
    ws = wavelet_variance(pyramid(x, 8, D2))
    for j in ws.octaves:
        K = ws.counts[j]
        assert abs(ws[j][0, 0] - 1) < 3 * np.sqrt(2 / K)


def test_wavelet_variance_mixed_structure():
    X = synth.synth_hidden([synth.ProcessClass.fgn(0.3), synth.ProcessClass.fgn(0.9)], 2 ** 14, seed=1)
    Y = synth.mix(synth.MIXING_P2, X)
    ws = wavelet_variance(pyramid(Y, 6, D2))
    for j in ws.octaves:
        assert ws[j][0, 1] > 0.3 * np.sqrt(ws[j][0, 0] * ws[j][1, 1])


def test_wavelet_variance_needs_two():
    pyr = dwt.Pyramid([np.ones((1, 1))], np.ones((1, 1)), D2)
    with pytest.raises(ValidationError):
        wavelet_variance(pyr)


def test_coherence_cases():
    g = np.random.default_rng(4)
    x = g.normal(size=4096)
    ws = wavelet_variance(pyramid(np.vstack([x, x]), 6, D2))
    assert np.allclose(coherence(ws), 1.0)
    ws = wavelet_variance(pyramid(np.vstack([x, -x]), 6, D2))
    assert np.allclose(coherence(ws), -1.0)
    with pytest.raises(ValidationError):
        coherence(wavelet_variance(pyramid(np.vstack([x, np.zeros_like(x)]), 3, D2, demean=False)))


def test_coherence_independent_null_band():
    X = synth.synth_hidden([synth.ProcessClass.fgn(0.5), synth.ProcessClass.fgn(0.5)], 2 ** 16, seed=5)
    ws = wavelet_variance(pyramid(X, 8, D2))
    c = coherence(ws)
    for j, cj in zip(ws.octaves, c):
        assert abs(cj) < 3 / np.sqrt(ws.counts[j])


# -- frequency domain --------------------------------------------------------

def test_psi_hat_haar_closed_form():
    assert psi_hat_sq(HAAR, np.pi) == pytest.approx(haar_psi_sq(np.pi), abs=1e-6)
    x = np.linspace(0.1, 50, 200)
    assert np.allclose(psi_hat_sq(HAAR, x), haar_psi_sq(x), atol=1e-6)


@pytest.mark.parametrize("n_psi", [1, 2, 3, 6])
def test_psi_hat_zero_and_convergence(n_psi):
    b = daubechies_filters(n_psi)
    assert psi_hat_sq(b, 0.0) == 0.0
    x = np.linspace(0.01, 100, 500)
    a, c = psi_hat_sq(b, x, 25), psi_hat_sq(b, x, 30)
    assert np.max(np.abs(a - c) / np.maximum(c, 1e-300)) < 1e-8
    assert np.max(np.abs(np.abs(psi_hat(b, x)) ** 2 - a)) < 1e-10 * a.max()


@pytest.mark.parametrize("n_psi", [1, 2, 4])
def test_psi_hat_parseval(n_psi):
    assert K_integral(daubechies_filters(n_psi), 0.0) == pytest.approx(2 * np.pi, abs=1e-3)


def test_K_integral_haar_closed_form():
    d = 0.25
    f = lambda x: haar_psi_sq(x) * x ** (-2 * d)
    ref = 0.0
    edges = np.concatenate([[0.0], np.arange(1, 4097) * 4 * np.pi])
    for a, b in zip(edges[:-1], edges[1:]):
        ref += integrate.quad(f, a, b, limit=200)[0]
    tail = 6.0 * (edges[-1] ** (-1 - 2 * d)) / (1 + 2 * d)   # mean of 16 sin^4/x^2 is 6/x^2
    assert K_integral(HAAR, d) == pytest.approx(2 * (ref + tail), abs=1e-4)


@pytest.mark.parametrize("d", [-0.4, 0.0, 0.3, 0.9, 1.3])
def test_K_integral_positive(d):
    assert K_integral(D2, d) > 0


def test_K_integral_window():
    with pytest.raises(ValidationError):
        K_integral(D2, 2.0)
    with pytest.raises(ValidationError):
        K_integral(HAAR, -0.6)


@pytest.mark.parametrize("sampled", [True, False])
def test_V_matrix_shape_symmetry_psd(sampled):
    V1 = V_matrix(D2, 0.2, [3], sampled=sampled)
    assert V1.shape == (1, 1) and V1[0, 0] > 0
    V = V_matrix(D2, 0.2, [2, 3, 4, 5, 6], sampled=sampled)
    assert np.array_equal(V, V.T)
    assert np.linalg.eigvalsh(V).min() > -1e-10 * V.max()
    with pytest.raises(ValidationError):
        V_matrix(D2, 0.2, [4, 3])


def test_V_matrix_white_noise_haar_exact():
    # iid coefficients: nu * Var(W_j / E W_j) = 2^j K_j * 2 / K_j
    V = V_matrix(HAAR, 0.0, [1, 2, 3])
    assert np.allclose(np.diag(V), [4, 8, 16], rtol=1e-6)
    assert np.max(np.abs(V - np.diag(np.diag(V)))) < 1e-6


def test_V_matrix_diagonal_matches_b():
    V = V_matrix(D2, 0.2, [3, 4])
    assert V[0, 0] == pytest.approx(2 ** 4 * b_constant(D2, 3, 0.2), rel=1e-4)
    assert V[1, 1] == pytest.approx(2 ** 5 * b_constant(D2, 4, 0.2), rel=1e-4)


def test_V_matrix_monte_carlo_oracle():
    # fGn h = 0.7: variance of sqrt(nu / 2^j) (W_j / E W_j - 1) over 500 replications
    nu, R, octs = 2 ** 12, 500, [1, 2, 3, 4, 5]
    W = np.empty((R, len(octs)))
    for r in range(R):
        x = synth.fgn_path(0.7, nu, replication_rng(21, r))
        ws = wavelet_variance(pyramid(x, 5, D2), octs)
        W[r] = [ws[j][0, 0] for j in octs]
    V = V_matrix(D2, 0.2, octs)
    for i, j in enumerate(octs):
        emp = np.var(W[:, i] / W[:, i].mean()) * 2 ** j * ws.counts[j]
        assert emp == pytest.approx(V[i, i], rel=0.25)


def test_V_matrix_continuous_form_understates_sampled():
    Vs = V_matrix(D2, 0.2, [3, 4, 5])
    Vc = V_matrix(D2, 0.2, [3, 4, 5], sampled=False)
    assert np.all(np.diag(Vc) < np.diag(Vs))


def test_lag_correlations_haar_white():
    rho = dwt.lag_correlations(HAAR, 0.0, [0, 1, 2, 5])
    assert rho[0] == 1.0
    assert np.max(np.abs(rho[1:])) < 1e-4


# -- calibration ---------------------------------------------------------------

def test_scaling_slope_fgn():
    x = synth.synth_fgn(0.7, 2 ** 16, seed=6)
    ws = wavelet_variance(pyramid(x, 7, D2), range(2, 8))
    slope = np.polyfit(np.arange(2, 8), np.log2(ws.diagonal(0)), 1)[0]
    assert abs(slope - 2 * 0.2) < 0.1
