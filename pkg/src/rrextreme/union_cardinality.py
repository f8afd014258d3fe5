"""Set-union cardinality from randomized-response bit-vector sketches.

A set ``S`` over the universe ``{1, ..., m}`` is stored as the bit vector
``x_i = [i in S]``.  Each party privatizes its vector with its own flip
probability.  Position ``i`` of the union is the OR of the parties' bits
at ``i``, so summing the per-position OR estimates gives an unbiased
estimate of ``|S_1 | ... | S_n|`` whose variance is the sum of the
per-position variances (noise is independent across positions).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from rrextreme.extreme_estimator import Kind, expm1_saturating, variance_or, variance_upper_bound
from rrextreme.rr_mechanism import NoiseParam, randomize_bits

__all__ = [
    "UnionAccumulator",
    "UnionEstimate",
    "UnionSketch",
    "encode_set",
    "estimate_union",
    "privatize_sketch",
    "true_variance",
]


@dataclass(frozen=True, eq=False)
class UnionSketch:
    m: int
    bits: np.ndarray
    noise: NoiseParam | None = None
    privatized: bool = False

    def __post_init__(self) -> None:
        if isinstance(self.m, bool) or not isinstance(self.m, (int, np.integer)) or self.m < 1:
            raise ValueError(f"universe size must be a positive integer, got {self.m!r}")
        bits = np.array(self.bits, dtype=np.uint8, copy=True).reshape(-1)
        if bits.shape != (self.m,):
            raise ValueError(f"expected {self.m} bits, got {bits.size}")
        if bits.size and bits.max() > 1:
            raise ValueError("sketch bits must be 0 or 1")
        bits.setflags(write=False)
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "bits", bits)
        if self.privatized and self.noise is None:
            raise ValueError("a privatized sketch must record its noise parameter")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, UnionSketch):
            return NotImplemented
        return (
            self.m == other.m
            and self.noise == other.noise
            and self.privatized == other.privatized
            and np.array_equal(self.bits, other.bits)
        )

    def __hash__(self) -> int:
        return hash((self.m, self.noise, self.privatized, self.bits.tobytes()))


def encode_set(elements: Iterable[int], m: int) -> UnionSketch:
    bits = np.zeros(m, dtype=np.uint8) if m >= 1 else np.zeros(0, dtype=np.uint8)
    for e in elements:
        if isinstance(e, bool) or not isinstance(e, (int, np.integer)) or not 1 <= e <= m:
            raise ValueError(f"element {e!r} outside universe [1, {m}]")
        bits[int(e) - 1] = 1
    return UnionSketch(m, bits)


def privatize_sketch(sk: UnionSketch, noise: NoiseParam, rng: np.random.Generator) -> UnionSketch:
    """Randomize every bit of ``sk`` once.

    Privatizing twice is refused: two passes compose into a mechanism with
    a larger flip probability than the one recorded on the sketch.
    """
    if sk.privatized:
        raise ValueError("sketch is already privatized")
    return UnionSketch(sk.m, randomize_bits(sk.bits, noise.q, rng), noise, True)


@dataclass(frozen=True, eq=False)
class UnionEstimate:
    cardinality: float
    per_position_estimates: np.ndarray
    variance_bound: float

    @property
    def m(self) -> int:
        return int(self.per_position_estimates.size)


@dataclass(eq=False)
class UnionAccumulator:
    """Per-position OR accumulators over a stream of privatized sketches.

    Holds one running product per position plus the running
    ``prod(1 + v_j)`` over parties, so memory is ``O(m)`` regardless of
    how many sketches are folded in.  Two accumulators over disjoint sets
    of parties merge by elementwise multiplication.
    """

    m: int
    products: np.ndarray = field(default=None)  # type: ignore[assignment]
    log_bound: float = 0.0
    count: int = 0

    def __post_init__(self) -> None:
        if self.products is None:
            self.products = np.ones(self.m)

    def add(self, sk: UnionSketch) -> "UnionAccumulator":
        if not sk.privatized or sk.noise is None:
            raise ValueError("only privatized sketches can be estimated")
        if sk.m != self.m:
            raise ValueError(f"sketch has m={sk.m}, expected m={self.m}")
        q = sk.noise.q
        self.products = self.products * ((1.0 - q - sk.bits) / (1.0 - 2.0 * q))
        self.log_bound += math.log1p(sk.noise.noise_term)
        self.count += 1
        return self

    def merge(self, other: "UnionAccumulator") -> "UnionAccumulator":
        if other.m != self.m:
            raise ValueError("cannot merge accumulators over different universes")
        return UnionAccumulator(
            self.m, self.products * other.products, self.log_bound + other.log_bound,
            self.count + other.count,
        )

    def estimate(self) -> UnionEstimate:
        if self.count == 0:
            raise ValueError("no sketches")
        per_position = 1.0 - self.products
        per_position.setflags(write=False)
        cardinality = float(per_position.sum())
        bound = self.m * expm1_saturating(self.log_bound)
        return UnionEstimate(cardinality, per_position, bound)


def estimate_union(sketches: Sequence[UnionSketch]) -> UnionEstimate:
    if not sketches:
        raise ValueError("need at least one sketch")
    m = sketches[0].m
    if any(sk.m != m for sk in sketches):
        raise ValueError("all sketches must share the same universe size")
    acc = UnionAccumulator(m)
    for sk in sketches:
        acc.add(sk)
    est = acc.estimate()
    # same quantity as log_bound, but through the public bound function
    per_position_bound = variance_upper_bound([sk.noise for sk in sketches], Kind.OR)
    return UnionEstimate(est.cardinality, est.per_position_estimates, m * per_position_bound)


def true_variance(sketches_true_bits: np.ndarray | Sequence[Sequence[int]],
                  noises: Sequence[NoiseParam]) -> float:
    """Exact variance of the union estimate given the hidden ``n x m`` bits.

    Test and simulation use only; deployment code has only the bound.
    """
    x = np.asarray(sketches_true_bits)
    if x.ndim != 2:
        raise ValueError("true bits must be an n x m matrix")
    n, m = x.shape
    if n != len(noises) or n == 0 or m == 0:
        raise ValueError(f"true bits have shape {x.shape} but {len(noises)} noise parameters")
    return math.fsum(variance_or(x[:, i].tolist(), noises).variance for i in range(m))
