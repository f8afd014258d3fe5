import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rrextreme.extreme_estimator import variance_or, variance_upper_bound
from rrextreme.rr_mechanism import NoiseParam
from rrextreme.union_cardinality import (
    UnionAccumulator,
    UnionSketch,
    encode_set,
    estimate_union,
    privatize_sketch,
    true_variance,
)


def noiseless(elements, m):
    return privatize_sketch(encode_set(elements, m), NoiseParam(0.0), np.random.default_rng(0))


def observed(bits, q):
    return UnionSketch(len(bits), np.array(bits), NoiseParam(q), True)


def test_encode_set_examples():
    assert encode_set({1}, 4).bits.tolist() == [1, 0, 0, 0]
    assert encode_set(set(), 4).bits.tolist() == [0, 0, 0, 0]
    sk = encode_set({1, 2}, 4)
    assert sk.bits.tolist() == [1, 1, 0, 0]
    assert not sk.privatized and sk.noise is None


@pytest.mark.parametrize("bad", [0, 5, -1])
def test_encode_set_rejects_outside_universe(bad):
    with pytest.raises(ValueError):
        encode_set({bad}, 4)


def test_sketch_invariants():
    with pytest.raises(ValueError):
        UnionSketch(3, np.array([0, 1]))
    with pytest.raises(ValueError):
        UnionSketch(2, np.array([0, 2]))
    with pytest.raises(ValueError):
        UnionSketch(2, np.array([0, 1]), None, True)
    with pytest.raises(ValueError):
        UnionSketch(0, np.array([]))
    sk = encode_set({2}, 3)
    with pytest.raises(ValueError):
        sk.bits[0] = 1


def test_privatize_examples():
    sk = encode_set({1, 3}, 5)
    out = privatize_sketch(sk, NoiseParam(0.0), np.random.default_rng(1))
    assert out.privatized and out.noise == NoiseParam(0.0)
    np.testing.assert_array_equal(out.bits, sk.bits)
    with pytest.raises(ValueError, match="already privatized"):
        privatize_sketch(out, NoiseParam(0.1), np.random.default_rng(1))


def test_privatize_law():
    m, q = 10**4, 0.25
    out = privatize_sketch(encode_set((), m), NoiseParam(q), np.random.default_rng(2))
    assert abs(out.bits.mean() - q) < 3 * math.sqrt(q * (1 - q) / m)


def test_privatize_is_seed_deterministic():
    sk = encode_set(range(1, 40), 100)
    a = privatize_sketch(sk, NoiseParam(0.3), np.random.default_rng(9))
    b = privatize_sketch(sk, NoiseParam(0.3), np.random.default_rng(9))
    assert a == b


def test_estimate_union_noiseless():
    est = estimate_union([noiseless({1}, 4), noiseless({1, 2}, 4)])
    assert est.cardinality == 2.0
    assert est.variance_bound == 0.0


def test_estimate_union_single_position_example():
    est = estimate_union([observed([0], 0.25), observed([0], 0.25)])
    assert est.cardinality == -1.25
    assert est.per_position_estimates.tolist() == [-1.25]


def test_estimate_union_errors():
    with pytest.raises(ValueError):
        estimate_union([])
    with pytest.raises(ValueError):
        estimate_union([noiseless({1}, 4), noiseless({1}, 5)])
    with pytest.raises(ValueError):
        estimate_union([encode_set({1}, 4)])


def test_estimate_union_heterogeneous_q():
    a = observed([1, 0, 1], 0.1)
    b = observed([0, 0, 1], 0.4)
    est = estimate_union([a, b])
    f = lambda bit, q: (1 - q - bit) / (1 - 2 * q)  # noqa: E731
    expected = [1 - f(1, 0.1) * f(0, 0.4), 1 - f(0, 0.1) * f(0, 0.4), 1 - f(1, 0.1) * f(1, 0.4)]
    np.testing.assert_allclose(est.per_position_estimates, expected, rtol=1e-15)
    assert est.cardinality == float(np.sum(est.per_position_estimates))
    bound = variance_upper_bound([NoiseParam(0.1), NoiseParam(0.4)])
    assert est.variance_bound == pytest.approx(3 * bound, rel=1e-15)


def test_union_accumulator_parallel_merge_matches_sequential():
    rng = np.random.default_rng(5)
    m = 64
    sketches = [
        privatize_sketch(encode_set(rng.choice(m, 10, replace=False) + 1, m), NoiseParam(q), rng)
        for q in (0.05, 0.1, 0.2, 0.3, 0.4, 0.25)
    ]
    sequential = estimate_union(sketches)
    left, right = UnionAccumulator(m), UnionAccumulator(m)
    for sk in sketches[:3]:
        left.add(sk)
    for sk in sketches[3:]:
        right.add(sk)
    merged = left.merge(right).estimate()
    np.testing.assert_allclose(merged.per_position_estimates, sequential.per_position_estimates, rtol=1e-12)
    assert merged.cardinality == pytest.approx(sequential.cardinality, rel=1e-12)
    assert merged.variance_bound == pytest.approx(sequential.variance_bound, rel=1e-12)


def test_true_variance_examples():
    nz = [NoiseParam(0.25)] * 2
    assert true_variance([[0], [1]], nz) == 1.3125
    assert true_variance([[0, 1, 1], [1, 0, 1]], [NoiseParam(0.0)] * 2) == 0.0
    cols = np.array([[0, 1, 0], [0, 1, 1]])
    total = true_variance(cols, nz)
    assert total == sum(variance_or(cols[:, i].tolist(), nz).variance for i in range(3))
    with pytest.raises(ValueError):
        true_variance([[0, 1]], nz)
    with pytest.raises(ValueError):
        true_variance([0, 1], nz)


def _exact_union_expectation(sets, m, qs):
    """Enumerate every joint noisy outcome of n sketches over m positions."""
    x = np.stack([encode_set(s, m).bits for s in sets])
    n = len(sets)
    total = []
    weights = []
    for flat in itertools.product((0, 1), repeat=n * m):
        obs = np.array(flat, dtype=np.uint8).reshape(n, m)
        w = 1.0
        for j in range(n):
            flips = obs[j] ^ x[j]
            w *= math.prod(qs[j] if f else 1 - qs[j] for f in flips)
        sketches = [observed(obs[j], qs[j]) for j in range(n)]
        total.append(estimate_union(sketches).cardinality)
        weights.append(w)
    w = np.array(weights)
    v = np.array(total)
    mean = math.fsum(w * v)
    return mean, math.fsum(w * (v - mean) ** 2), int(x.max(axis=0).sum())


@pytest.mark.parametrize(
    "sets,m,qs",
    [
        ([{1}, {1, 2}], 3, [0.25, 0.25]),
        ([{1, 3}, set(), {2}], 4, [0.1, 0.3, 0.4]),
    ],
)
def test_union_unbiased_and_variance_exact(sets, m, qs):
    mean, var, union = _exact_union_expectation(sets, m, qs)
    assert abs(mean - union) < 1e-10
    x = np.stack([encode_set(s, m).bits for s in sets])
    assert var == pytest.approx(true_variance(x, [NoiseParam(q) for q in qs]), rel=1e-10)


@given(st.lists(st.sets(st.integers(1, 12)), min_size=1, max_size=5))
def test_noiseless_cardinality_is_exact_union(sets):
    est = estimate_union([noiseless(s, 12) for s in sets])
    assert est.cardinality == float(len(set().union(*sets)))
    assert est.cardinality.is_integer()
