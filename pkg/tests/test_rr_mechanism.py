import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rrextreme.rr_mechanism import (
    NoiseParam,
    NoisyBit,
    apply_rr,
    apply_rr_vector,
    noise_from_epsilon,
    randomize_bits,
)


@pytest.mark.parametrize("q", [0.5, 0.75, 1.0, -0.01, math.nan, math.inf])
def test_noise_param_rejects_out_of_range(q):
    with pytest.raises(ValueError):
        NoiseParam(q)


def test_noise_param_rejects_non_numbers():
    with pytest.raises(TypeError):
        NoiseParam("0.25")
    with pytest.raises(TypeError):
        NoiseParam(True)


@given(st.floats(0.0, 0.5, exclude_max=True))
def test_debias_scale_positive_and_noise_term_nonnegative(q):
    nz = NoiseParam(q)
    assert nz.debias_scale > 0
    assert nz.noise_term >= 0
    assert (nz.noise_term == 0) == (q == 0)


def test_noisy_bit_validation():
    nz = NoiseParam(0.1)
    assert NoisyBit(True, nz).value == 1
    assert NoisyBit(np.uint8(0), nz).value == 0
    for bad in (2, -1, 0.5, "1"):
        with pytest.raises(ValueError):
            NoisyBit(bad, nz)
    with pytest.raises(TypeError):
        NoisyBit(1, 0.1)


@pytest.mark.parametrize("x", [0, 1])
def test_apply_rr_noiseless_is_identity(x):
    rng = np.random.default_rng(0)
    nz = NoiseParam(0.0)
    assert all(apply_rr(x, nz, rng).value == x for _ in range(1000))


def test_apply_rr_carries_noise():
    nz = NoiseParam(0.3)
    assert apply_rr(1, nz, np.random.default_rng(1)).noise is nz


def test_apply_rr_law_monte_carlo():
    # 10^6 draws of a true zero at q = 0.25: ones fraction within 3 sigma
    q, draws = 0.25, 10**6
    rng = np.random.default_rng(20240601)
    nz = NoiseParam(q)
    ones = sum(apply_rr(0, nz, rng).value for _ in range(draws))
    sigma = math.sqrt(q * (1 - q) / draws)
    assert abs(ones / draws - q) < 3 * sigma


@pytest.mark.parametrize("x", [0, 1])
@pytest.mark.parametrize("q", [0.0, 0.1, 0.25, 0.4, 0.49])
def test_expected_report_two_point_enumeration(x, q):
    # the report keeps x w.p. 1 - q and flips it w.p. q
    expectation = (1 - q) * x + q * (1 - x)
    assert expectation == pytest.approx(q + x * (1 - 2 * q), abs=1e-15)
    # the sampler uses exactly that rule: u < q flips
    class Fixed:
        def __init__(self, u):
            self.u = u

        def random(self):
            return self.u

    nz = NoiseParam(q)
    if q > 0:
        assert apply_rr(x, nz, Fixed(q / 2)).value == 1 - x
    assert apply_rr(x, nz, Fixed(q)).value == x


def test_apply_rr_reproducible():
    nz = NoiseParam(0.3)
    a = [apply_rr(i % 2, nz, rng).value for rng in [np.random.default_rng(5)] for i in range(200)]
    b = [apply_rr(i % 2, nz, rng).value for rng in [np.random.default_rng(5)] for i in range(200)]
    assert a == b


def test_apply_rr_vector_examples():
    rng = np.random.default_rng(0)
    out = apply_rr_vector((1, 0, 1), NoiseParam(0.0), rng)
    assert [b.value for b in out] == [1, 0, 1]
    assert apply_rr_vector((), NoiseParam(0.3), rng) == []
    with pytest.raises(ValueError):
        apply_rr_vector((0, 2), NoiseParam(0.3), rng)


def test_apply_rr_vector_law_monte_carlo():
    q, n = 0.4, 10**6
    out = randomize_bits(np.zeros(n, dtype=np.uint8), q, np.random.default_rng(99))
    assert out.dtype == np.uint8 and out.shape == (n,)
    sigma = math.sqrt(q * (1 - q) / n)
    assert abs(out.mean() - q) < 3 * sigma


def test_apply_rr_vector_small_law_matches_array_form():
    nz = NoiseParam(0.4)
    out = apply_rr_vector([0] * 10**5, nz, np.random.default_rng(3))
    frac = sum(b.value for b in out) / len(out)
    assert abs(frac - 0.4) < 3 * math.sqrt(0.24 / 10**5)


def test_apply_rr_vector_adjacent_positions_uncorrelated():
    q, trials = 0.3, 10**5
    rng = np.random.default_rng(11)
    draws = np.stack([randomize_bits(np.array([0, 1], dtype=np.uint8), q, rng) for _ in range(trials)])
    a = draws[:, 0].astype(float)
    b = draws[:, 1].astype(float)
    cov = np.mean((a - a.mean()) * (b - b.mean()))
    # under independence the sample covariance has sd ~ q(1-q)/sqrt(trials)
    sigma = q * (1 - q) / math.sqrt(trials)
    assert abs(cov) < 3 * sigma


def test_randomize_bits_validates():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        randomize_bits(np.array([0, 2]), 0.1, rng)
    with pytest.raises(ValueError):
        randomize_bits(np.array([0.0, 1.0]), 0.1, rng)


def test_noise_from_epsilon_examples():
    assert noise_from_epsilon(math.log(3)).q == pytest.approx(0.25, rel=1e-15)
    assert noise_from_epsilon(math.log(1.5)).q == pytest.approx(0.4, rel=1e-15)
    assert noise_from_epsilon(50.0).q < 1e-21
    assert noise_from_epsilon(1e6).q == 0.0


@pytest.mark.parametrize("eps", [0.0, -1.0, math.nan])
def test_noise_from_epsilon_rejects_nonpositive(eps):
    with pytest.raises(ValueError):
        noise_from_epsilon(eps)


@given(st.floats(1e-6, 700.0))
def test_noise_from_epsilon_in_open_interval(eps):
    q = noise_from_epsilon(eps).q
    assert 0 < q < 0.5
    # the mechanism's likelihood ratio is exactly e^eps
    assert math.log((1 - q) / q) == pytest.approx(eps, rel=1e-9, abs=1e-12)
