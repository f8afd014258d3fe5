"""Unbiased estimates of the OR / AND of bits seen through randomized response.

Each observed bit ``b`` with flip probability ``q`` contributes one
multiplicative factor:

* OR:  ``(1 - q - b) / (1 - 2q)``, and the estimate is ``1 - product``
* AND: ``(b - q) / (1 - 2q)``, and the estimate is ``product``

Because the factors are independent and each has the right expectation,
the product is unbiased for ``prod(1 - x_i)`` (resp. ``prod(x_i)``).  The
state is two numbers, so accumulation is online, O(1) per bit, and two
accumulators combine by multiplying their products.

Estimates are deliberately not clamped to ``[0, 1]``.

The running product is a plain float.  For a run of observed zeros it
grows like ``((1 - q) / (1 - 2q)) ** n`` and overflows to ``inf`` after a
few thousand bits at moderate ``q``; nothing here guards against that.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from rrextreme.rr_mechanism import NoiseParam, NoisyBit

__all__ = [
    "EmptyAccumulatorError",
    "ExtremeAccumulator",
    "Kind",
    "KindMismatchError",
    "VarianceReport",
    "and_estimates",
    "debiased_factor",
    "equal_q_or_estimate",
    "estimate",
    "expm1_saturating",
    "fold",
    "ingest",
    "merge",
    "or_estimates",
    "variance_and",
    "variance_or",
    "variance_upper_bound",
]


class Kind(str, enum.Enum):
    OR = "or"
    AND = "and"


class EmptyAccumulatorError(ValueError):
    """Raised when an estimate is requested before any bit was observed."""


class KindMismatchError(ValueError):
    """Raised when merging an OR accumulator with an AND accumulator."""


def debiased_factor(kind: Kind, value: int, q: float) -> float:
    """The per-bit factor an observation contributes to the running product."""
    if kind is Kind.OR:
        return (1.0 - q - value) / (1.0 - 2.0 * q)
    return (value - q) / (1.0 - 2.0 * q)


@dataclass(frozen=True, slots=True)
class ExtremeAccumulator:
    """Constant-size running state for the OR or AND estimator.

    Instances are immutable values: :meth:`ingest` and :meth:`merge` return
    new accumulators, so one can be shared across threads or shards freely.
    """

    kind: Kind = Kind.OR
    product: float = 1.0
    count: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.count < 0:
            raise ValueError("count must be nonnegative")

    @classmethod
    def empty(cls, kind: Kind | str = Kind.OR) -> "ExtremeAccumulator":
        return cls(Kind(kind))

    def ingest(self, bit: NoisyBit) -> "ExtremeAccumulator":
        factor = debiased_factor(self.kind, bit.value, bit.noise.q)
        return ExtremeAccumulator(self.kind, self.product * factor, self.count + 1)

    def ingest_all(self, bits: Iterable[NoisyBit]) -> "ExtremeAccumulator":
        kind = self.kind
        product = self.product
        count = self.count
        for bit in bits:
            product *= debiased_factor(kind, bit.value, bit.noise.q)
            count += 1
        return ExtremeAccumulator(kind, product, count)

    def merge(self, other: "ExtremeAccumulator") -> "ExtremeAccumulator":
        if self.kind is not other.kind:
            raise KindMismatchError(
                f"cannot merge {self.kind.value} accumulator with {other.kind.value}"
            )
        return ExtremeAccumulator(
            self.kind, self.product * other.product, self.count + other.count
        )

    def estimate(self) -> float:
        if self.count == 0:
            raise EmptyAccumulatorError("no observations")
        if self.kind is Kind.OR:
            return 1.0 - self.product
        return self.product


# Functional spellings of the accumulator methods.


def ingest(acc: ExtremeAccumulator, bit: NoisyBit) -> ExtremeAccumulator:
    return acc.ingest(bit)


def merge(a: ExtremeAccumulator, b: ExtremeAccumulator) -> ExtremeAccumulator:
    return a.merge(b)


def estimate(acc: ExtremeAccumulator) -> float:
    return acc.estimate()


def fold(bits: Iterable[NoisyBit], kind: Kind | str = Kind.OR) -> ExtremeAccumulator:
    """Accumulate ``bits`` from an empty accumulator."""
    return ExtremeAccumulator.empty(kind).ingest_all(bits)


def _batch_factors(values: np.ndarray, q: np.ndarray, kind: Kind) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if np.any(q < 0) or np.any(q >= 0.5):
        raise ValueError("flip probabilities must satisfy 0 <= q < 1/2")
    if kind is Kind.OR:
        return (1.0 - q - values) / (1.0 - 2.0 * q)
    return (values - q) / (1.0 - 2.0 * q)


def or_estimates(values: np.ndarray, q: np.ndarray, axis: int = -1) -> np.ndarray:
    """Vectorised OR estimate along ``axis``.

    ``values`` holds observed bits and ``q`` must broadcast against it.
    Returns ``1 - prod(factors)`` reduced over ``axis``.
    """
    return 1.0 - np.prod(_batch_factors(values, q, Kind.OR), axis=axis)


def and_estimates(values: np.ndarray, q: np.ndarray, axis: int = -1) -> np.ndarray:
    """Vectorised AND estimate along ``axis``; see :func:`or_estimates`."""
    return np.prod(_batch_factors(values, q, Kind.AND), axis=axis)


def equal_q_or_estimate(n: int, noisy_sum: int, noise: NoiseParam) -> float:
    """Closed form of the OR estimate when all ``n`` bits share one ``q``.

    With ``S`` observed ones the estimate depends on the bits only through
    ``S``: ``1 - (-q)**S * (1 - q)**(n - S) / (1 - 2q)**n``.  The sign on
    ``q`` matters; dropping it gives a biased estimator.
    """
    if not 0 <= noisy_sum <= n:
        raise ValueError(f"noisy sum {noisy_sum} outside [0, {n}]")
    q = noise.q
    scale = noise.debias_scale
    return 1.0 - (-q / scale) ** noisy_sum * ((1.0 - q) / scale) ** (n - noisy_sum)


@dataclass(frozen=True)
class VarianceReport:
    variance: float
    per_bit_noise_terms: tuple[float, ...] = field(default_factory=tuple)


def _validated(true_bits: Sequence[int], noises: Sequence[NoiseParam]) -> list[int]:
    bits = [int(b) for b in true_bits]
    if len(bits) != len(noises):
        raise ValueError(f"got {len(bits)} bits but {len(noises)} noise parameters")
    if not bits:
        raise ValueError("need at least one bit")
    if any(b not in (0, 1) for b in bits):
        raise ValueError("true bits must be 0 or 1")
    return bits


def expm1_saturating(x: float) -> float:
    """``expm1`` that returns ``inf`` instead of raising on overflow."""
    try:
        return math.expm1(x)
    except OverflowError:
        return math.inf


def _product_minus_indicator(weights: Sequence[float], terms: Sequence[float], all_hit: bool) -> float:
    # prod(w_i + v_i) - [all w_i == 1]; when every w_i is 1 the subtraction
    # cancels, so go through log1p/expm1 instead.
    if all_hit:
        return expm1_saturating(math.fsum(math.log1p(v) for v in terms))
    return math.prod(w + v for w, v in zip(weights, terms))


def variance_or(true_bits: Sequence[int], noises: Sequence[NoiseParam]) -> VarianceReport:
    """Exact variance of the OR estimate for known true bits.

    ``prod(1 - x_i + v_i) - [all x_i == 0]`` with ``v_i = q_i(1-q_i)/(1-2q_i)**2``.
    Needs the hidden bits, so it is for simulation and testing; see
    :func:`variance_upper_bound` for the deployable worst case.
    """
    bits = _validated(true_bits, noises)
    terms = tuple(nz.noise_term for nz in noises)
    weights = [1 - b for b in bits]
    var = _product_minus_indicator(weights, terms, all_hit=not any(bits))
    return VarianceReport(var, terms)


def variance_and(true_bits: Sequence[int], noises: Sequence[NoiseParam]) -> VarianceReport:
    """Exact variance of the AND estimate: ``prod(x_i + v_i) - [all x_i == 1]``."""
    bits = _validated(true_bits, noises)
    terms = tuple(nz.noise_term for nz in noises)
    var = _product_minus_indicator(bits, terms, all_hit=all(bits))
    return VarianceReport(var, terms)


def variance_upper_bound(noises: Sequence[NoiseParam], kind: Kind | str = Kind.OR) -> float:
    """Largest variance over all true-bit assignments: ``prod(1 + v_i) - 1``.

    The exact variance is nondecreasing in each ``1 - x_i`` (OR) or ``x_i``
    (AND), so the maximum sits at all-zero bits for OR and all-one bits for
    AND, and both give the same value.
    """
    Kind(kind)
    if not noises:
        raise ValueError("need at least one noise parameter")
    return expm1_saturating(math.fsum(math.log1p(nz.noise_term) for nz in noises))
