import math

import numpy as np
import pytest
from scipy.integrate import quad

from markovqs.finsets import FinSet
from markovqs.weights import (
    ConvergenceError,
    WeightSequence,
    convolution_operator,
    eval_f,
    fourier_coefficients,
    geometric_weights,
    injectivity_margin,
    normalize,
    normalized_weights,
)

# sigma_min oracles: coefficients from adaptive quadrature, Toeplitz built by loops, numpy SVD
FOURIER_K64_M16_MARGIN = 3.4792783754120674e-05
GEOMETRIC_K8_M4_FORBID0_MARGIN = 0.0008731435906784161


def _f(x):
    return 0.0 if x == 0.5 else math.exp(2.0 - 1.0 / abs(x - 0.5))


def quad_coefficient(n, epsrel=1e-13):
    """Independent oracle: f is even about 1/2, so a_n = 2 int_0^1/2 f cos(2 pi n x)."""
    if n == 0:
        return 2 * quad(_f, 0, 0.5, epsabs=1e-15, epsrel=epsrel, limit=400)[0]
    return 2 * quad(_f, 0, 0.5, weight="cos", wvar=2 * np.pi * n, epsabs=1e-14, epsrel=epsrel, limit=400)[0]


def test_eval_f_examples():
    assert eval_f(0.5) == 0.0
    assert eval_f(0.0) == 1.0
    assert abs(eval_f(0.25) - math.exp(-2)) < 1e-15
    x = np.arange(129) / 128  # dyadic, so 1 - x is exact
    assert np.array_equal(eval_f(x), eval_f(1 - x))
    with pytest.raises(ValueError):
        eval_f(1.5)


def test_a0_matches_quadrature_at_two_tolerances():
    a = fourier_coefficients(4)
    for tol in (1e-10, 1e-13):
        assert abs(a[0] - quad_coefficient(0, tol)) < 1e-11


@pytest.mark.parametrize("n", [1, 2, 5, 17, 64])
def test_coefficients_match_quadrature(n):
    a = fourier_coefficients(64)
    assert abs(a[n] - quad_coefficient(n)) < 1e-11


def test_coefficient_symmetry_and_sign():
    a = fourier_coefficients(256, 1 << 14)
    assert np.max(np.abs(a.values - a.values[::-1])) <= 1e-12
    assert np.min(a.values) >= -1e-9


def test_quadratic_decay_constant():
    a = fourier_coefficients(256, 1 << 14)
    n = np.arange(64, 257)
    scaled = n**2 * np.array([a[k] for k in n])
    target = 2 / np.pi**2
    assert np.all(np.abs(scaled - target) <= 0.2 * target)
    # the quadrature oracle sees the same constant
    assert abs(128**2 * quad_coefficient(128) - target) <= 0.2 * target


def test_partial_sums_are_monotone():
    a = fourier_coefficients(128)
    sums = [a.truncate(k).total() for k in range(0, 129, 8)]
    assert all(s2 >= s1 for s1, s2 in zip(sums, sums[1:]))


def test_bad_resolution_rejected():
    with pytest.raises(ValueError):
        fourier_coefficients(4, 3000)
    with pytest.raises(ValueError):
        fourier_coefficients(4, 1 << 10)


def test_convergence_failure_carries_index():
    with pytest.raises(ConvergenceError) as err:
        fourier_coefficients(8, tol=1e-30)
    assert -8 <= err.value.index <= 8


def test_normalize_examples():
    a = normalize(WeightSequence([0.0, 2.0, 0.0]))
    assert list(a.values) == [0.0, 1.0, 0.0] and a.normalized
    b = normalize(a)
    assert np.max(np.abs(b.values - a.values)) <= 1e-15
    with pytest.raises(ValueError):
        normalize(WeightSequence([0.0, 0.0, 0.0]))


def test_normalized_weights_sum_to_one():
    for K in (2, 16, 64):
        a = normalized_weights(K)
        assert abs(math.fsum(a.values) - 1.0) <= 1e-15


def test_truncation_deficit_matches_tail_estimate():
    raw = fourier_coefficients(512, 1 << 14)
    deficit = 1.0 - raw.total()
    tail = 4 / (np.pi**2 * 512)
    assert abs(deficit - tail) <= 0.01 * tail
    # oracle: the coefficients beyond 512 up to 2048, plus the tail beyond that
    wide = fourier_coefficients(2048, 1 << 14)
    between = wide.total() - raw.total()
    assert abs(deficit - between - 4 / (np.pi**2 * 2048)) <= 1e-6


def test_geometric_weights():
    a = geometric_weights(8)
    assert a[0] == 0.5 and a[3] == 1 / 16 and a[-1] == 0.0
    assert a.total() == 1 - 2.0**-9
    with pytest.raises(ValueError):
        geometric_weights(0)


def test_convolution_operator_examples():
    I = convolution_operator(WeightSequence.delta(0, 1), (-2, 2), (-3, 3))
    assert np.array_equal(I[1:-1], np.eye(5))
    assert not I[0].any() and not I[-1].any()
    S = convolution_operator(WeightSequence.delta(1, 1), (-2, 2), (-3, 3))
    assert np.array_equal(S[2:], np.eye(5))
    with pytest.raises(ValueError):
        convolution_operator(WeightSequence.delta(0, 2), (-2, 2), (-3, 3))


def test_convolution_matches_direct_sum():
    rng = np.random.default_rng(0)
    a = WeightSequence(rng.random(7))
    x = rng.standard_normal(9)
    C = convolution_operator(a, (-4, 4), (-7, 7))
    direct = np.zeros(15)
    for k in range(-7, 8):
        for m in range(-4, 5):
            direct[k + 7] += a[k - m] * x[m + 4]
    assert np.allclose(C @ x, direct, atol=1e-14)


def test_normalized_convolution_fixes_interior_constants():
    a = normalized_weights(4)
    C = convolution_operator(a, (-10, 10), (-14, 14))
    out = C @ np.ones(21)
    interior = out[8:-8]  # rows k in [-6, 6], at distance >= K from the window edge
    assert np.max(np.abs(interior - 1.0)) <= 1e-12


def test_injectivity_margin_delta():
    assert injectivity_margin(WeightSequence.delta(0, 0), 3) == pytest.approx(1.0, abs=1e-15)


def test_injectivity_margin_pre_registered():
    assert abs(injectivity_margin(normalized_weights(64), 16) - FOURIER_K64_M16_MARGIN) <= 1e-9
    got = injectivity_margin(geometric_weights(8), 4, FinSet([0]))
    assert abs(got - GEOMETRIC_K8_M4_FORBID0_MARGIN) <= 1e-12


def test_injectivity_margin_decreases_with_window():
    a = normalized_weights(64)
    m = [injectivity_margin(a, w) for w in (4, 8, 16)]
    assert m[0] >= m[1] >= m[2] > 0


def test_injectivity_margin_empty_rows():
    with pytest.raises(ValueError):
        injectivity_margin(WeightSequence.delta(0, 0), 0, FinSet([0]))
