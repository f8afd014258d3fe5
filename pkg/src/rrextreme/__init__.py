"""Unbiased estimation of the OR / AND of bits observed through randomized response."""

from rrextreme.extreme_estimator import (
    EmptyAccumulatorError,
    ExtremeAccumulator,
    Kind,
    KindMismatchError,
    VarianceReport,
    and_estimates,
    equal_q_or_estimate,
    fold,
    or_estimates,
    variance_and,
    variance_or,
    variance_upper_bound,
)
from rrextreme.rr_mechanism import (
    NoiseParam,
    NoisyBit,
    apply_rr,
    apply_rr_vector,
    noise_from_epsilon,
    randomize_bits,
)
from rrextreme.union_cardinality import (
    UnionAccumulator,
    UnionEstimate,
    UnionSketch,
    encode_set,
    estimate_union,
    privatize_sketch,
    true_variance,
)

__version__ = "0.1.0"

__all__ = [
    "EmptyAccumulatorError",
    "ExtremeAccumulator",
    "Kind",
    "KindMismatchError",
    "NoiseParam",
    "NoisyBit",
    "UnionAccumulator",
    "UnionEstimate",
    "UnionSketch",
    "VarianceReport",
    "and_estimates",
    "apply_rr",
    "apply_rr_vector",
    "encode_set",
    "equal_q_or_estimate",
    "estimate_union",
    "fold",
    "noise_from_epsilon",
    "or_estimates",
    "privatize_sketch",
    "randomize_bits",
    "true_variance",
    "variance_and",
    "variance_or",
    "variance_upper_bound",
]
