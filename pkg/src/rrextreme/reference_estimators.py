"""Matrix-based OR estimators used to cross-check the product estimator.

Two classical routes are implemented here:

* the equal-q *convolution* estimator, which inverts the
  ``(n+1) x (n+1)`` matrix ``P`` mapping a true count of ones to the
  distribution of the observed count, and reads ``1 - P^-1[0, S]``;
* the *Kronecker* estimator, which reads the top row of the inverse of the
  ``2**n x 2**n`` per-sequence transition matrix.  That inverse is itself a
  Kronecker product of 2x2 inverses, so its top-row entry for an observed
  sequence factors into a per-bit product.

Both are slow by design (cubic or exponential); they exist as independent
oracles, not as production estimators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np

from rrextreme import gauss
from rrextreme.extreme_estimator import ExtremeAccumulator, Kind
from rrextreme.rr_mechanism import NoiseParam, NoisyBit

__all__ = [
    "ConditioningError",
    "KRONECKER_CAP",
    "KroneckerInverseFactors",
    "RESIDUAL_LIMIT",
    "SizeCapError",
    "TransitionMatrix",
    "build_sum_pmf",
    "build_transition_matrix",
    "compare_dense",
    "compare_equal_q",
    "estimate_or_convolution",
    "estimate_or_kronecker",
    "kronecker_index",
    "materialize_kronecker",
    "materialize_kronecker_inverse",
]

KRONECKER_CAP = 12
RESIDUAL_LIMIT = 1e-6


class ConditioningError(ArithmeticError):
    """The transition matrix could not be inverted to acceptable accuracy."""


class SizeCapError(ValueError):
    pass


def _require_positive_q(noise: NoiseParam) -> float:
    if noise.q <= 0.0:
        raise ValueError("the transition matrix is only inverted for 0 < q < 1/2")
    return noise.q


def _convolve_pmf(n: int, true_sum: int, q, one, zero) -> list:
    # distribution of a sum of n independent Bernoullis: true_sum of them
    # with success 1 - q, the remaining n - true_sum with success q
    dist = [one]
    for k in range(n):
        p = one - q if k < true_sum else q
        nxt = [zero] * (len(dist) + 1)
        for s, mass in enumerate(dist):
            nxt[s] += mass * (one - p)
            nxt[s + 1] += mass * p
        dist = nxt
    return dist


def build_sum_pmf(n: int, true_sum: int, noise: NoiseParam) -> np.ndarray:
    """PMF of the observed count of ones given ``true_sum`` true ones among ``n``."""
    if n < 1:
        raise ValueError("n must be positive")
    if not 0 <= true_sum <= n:
        raise ValueError(f"true sum {true_sum} outside [0, {n}]")
    q = _require_positive_q(noise)
    return np.array(_convolve_pmf(n, true_sum, q, 1.0, 0.0), dtype=np.float64)


def _working_precision(n: int, q: float) -> int:
    # |P^-1| grows like (1 - 2q)^-n; carry enough bits that the product
    # P @ P^-1 still has ~30 correct digits after cancellation.
    growth = n * math.log2(1.0 / (1.0 - 2.0 * q))
    return 128 + math.ceil(2.0 * growth) + 2 * math.ceil(math.log2(n + 1))


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Equal-q transition matrix ``P`` and its inverse.

    Column ``s`` of ``entries`` is the distribution of the observed count
    when the true count is ``s``.  The inverse is computed by Gauss-Jordan
    elimination in ``precision`` bits and then rounded to float64;
    ``residual`` is ``max |P @ P^-1 - I|`` in that working precision.  Note
    that the float64-rounded pair need not reproduce the residual: for large
    ``n * q`` the inverse entries are huge and alternate in sign.
    """

    n: int
    noise: NoiseParam
    entries: np.ndarray
    inverse_entries: np.ndarray
    residual: float
    precision: int
    _top_row_complement: np.ndarray = field(repr=False)

    def column_sums(self) -> np.ndarray:
        return self.entries.sum(axis=0)


def build_transition_matrix(
    n: int, noise: NoiseParam, precision: int | None = None
) -> TransitionMatrix:
    """Build ``P`` for ``n`` bits at flip probability ``noise.q`` and invert it.

    ``precision`` (bits of mantissa) defaults to a value derived from
    ``n`` and ``q``.  Raises :class:`ConditioningError` if elimination hits
    a zero pivot or the residual exceeds ``RESIDUAL_LIMIT``.
    """
    if n < 1:
        raise ValueError("n must be positive")
    q = _require_positive_q(noise)
    prec = _working_precision(n, q) if precision is None else int(precision)

    ctx = mpmath.MPContext()
    ctx.prec = prec
    zero, one = ctx.mpf(0), ctx.mpf(1)
    q_mp = ctx.mpf(q)  # exact: q is a binary float
    columns = [_convolve_pmf(n, s, q_mp, one, zero) for s in range(n + 1)]
    p_mp = [[columns[s][r] for s in range(n + 1)] for r in range(n + 1)]
    try:
        inv_mp = gauss.invert(p_mp, zero, one)
    except gauss.SingularMatrixError as exc:
        raise ConditioningError(f"transition matrix singular at {prec} bits: {exc}") from exc
    residual = gauss.max_abs_residual(p_mp, inv_mp, zero, one)
    if not residual <= RESIDUAL_LIMIT:
        raise ConditioningError(
            f"inverse residual {residual:.3g} exceeds {RESIDUAL_LIMIT:g} "
            f"(n={n}, q={q}, precision={prec} bits)"
        )

    entries = np.array([[float(v) for v in row] for row in p_mp])
    inverse = np.array([[float(v) for v in row] for row in inv_mp])
    complement = np.array([float(one - v) for v in inv_mp[0]])
    for arr in (entries, inverse, complement):
        arr.setflags(write=False)
    return TransitionMatrix(n, noise, entries, inverse, residual, prec, complement)


def estimate_or_convolution(noisy_sum: int, tm: TransitionMatrix) -> float:
    """``1 - P^-1[0, S]`` for an observed count ``S`` of ones.

    The subtraction is done before rounding to float64, so the result is
    the correctly rounded value of the working-precision estimate.
    """
    if isinstance(noisy_sum, bool) or not 0 <= noisy_sum <= tm.n:
        raise ValueError(f"noisy sum {noisy_sum!r} outside [0, {tm.n}]")
    return float(tm._top_row_complement[noisy_sum])


@dataclass(frozen=True)
class KroneckerInverseFactors:
    """Top rows of the per-bit 2x2 inverse transition matrices.

    For flip probability ``q`` the pair is
    ``((1 - q) / (1 - 2q), -q / (1 - 2q))``: the entry selected by an
    observed 0 and by an observed 1 respectively.
    """

    per_bit_inverse_rows: tuple[tuple[float, float], ...]

    @classmethod
    def from_noises(cls, noises: Sequence[NoiseParam]) -> "KroneckerInverseFactors":
        rows = []
        for nz in noises:
            s = nz.debias_scale
            rows.append(((1.0 - nz.q) / s, -nz.q / s))
        return cls(tuple(rows))

    def top_row_entry(self, observed: Sequence[int]) -> float:
        """Entry of the inverse's top row at the column of ``observed``.

        The product of the selected floats is formed exactly and rounded
        once, so the result does not depend on the order of the bits.
        """
        if len(observed) != len(self.per_bit_inverse_rows):
            raise ValueError("observed sequence length does not match factors")
        prod = Fraction(1)
        for b, pair in zip(observed, self.per_bit_inverse_rows):
            if b not in (0, 1):
                raise ValueError("observed bits must be 0 or 1")
            prod *= Fraction(pair[b])
        return float(prod)


def estimate_or_kronecker(bits: Sequence[NoisyBit]) -> float:
    """OR estimate read from the top row of the Kronecker inverse."""
    if not bits:
        raise ValueError("need at least one noisy bit")
    factors = KroneckerInverseFactors.from_noises([b.noise for b in bits])
    prod = Fraction(1)
    for b, pair in zip(bits, factors.per_bit_inverse_rows):
        prod *= Fraction(pair[b.value])
    return float(1 - prod)


def kronecker_index(observed: Sequence[int]) -> int:
    """Zero-based column of a bit sequence; the first bit is most significant."""
    idx = 0
    for b in observed:
        if b not in (0, 1):
            raise ValueError("observed bits must be 0 or 1")
        idx = (idx << 1) | int(b)  # a numpy scalar would wrap at its width
    return idx


def _check_cap(noises: Sequence[NoiseParam]) -> None:
    if not noises:
        raise ValueError("need at least one noise parameter")
    if len(noises) > KRONECKER_CAP:
        raise SizeCapError(
            f"dense Kronecker matrices are capped at n={KRONECKER_CAP} bits, got {len(noises)}"
        )


def materialize_kronecker(noises: Sequence[NoiseParam]) -> np.ndarray:
    """Forward ``2**n x 2**n`` transition matrix, bit 1 as the slowest index."""
    _check_cap(noises)
    out = np.ones((1, 1))
    for nz in noises:
        q = nz.q
        out = np.kron(out, np.array([[1.0 - q, q], [q, 1.0 - q]]))
    return out


def materialize_kronecker_inverse(noises: Sequence[NoiseParam]) -> np.ndarray:
    """Dense inverse of :func:`materialize_kronecker`, as a product of 2x2 inverses."""
    _check_cap(noises)
    out = np.ones((1, 1))
    for nz in noises:
        q, s = nz.q, nz.debias_scale
        out = np.kron(out, np.array([[1.0 - q, -q], [-q, 1.0 - q]]) / s)
    return out


def _rel_diff(a: float, b: float) -> float:
    if a == b:
        return 0.0
    return abs(a - b) / max(abs(a), abs(b))


def compare_equal_q(n: int, noise: NoiseParam, tm: TransitionMatrix | None = None) -> list[dict]:
    """One row per observed count ``S``: all three estimators side by side.

    The Kronecker and elementary columns are evaluated on the sequence with
    ``S`` leading ones; with a shared ``q`` the ordering is irrelevant.
    """
    if tm is None:
        tm = build_transition_matrix(n, noise)
    elif tm.n != n or tm.noise != noise:
        raise ValueError("transition matrix does not match n and q")
    rows = []
    for s in range(n + 1):
        seq = [NoisyBit(1 if i < s else 0, noise) for i in range(n)]
        rows.append(_row({"noisy_sum": s}, seq, estimate_or_convolution(s, tm)))
    return rows


def compare_dense(n: int, noise: NoiseParam, tm: TransitionMatrix | None = None) -> list[dict]:
    """One row per observed sequence, Kronecker column read off the dense inverse."""
    noises = [noise] * n
    k_inv = materialize_kronecker_inverse(noises)
    if tm is None:
        tm = build_transition_matrix(n, noise)
    top = k_inv[0]
    rows = []
    for idx in range(2**n):
        observed = [(idx >> (n - 1 - i)) & 1 for i in range(n)]
        seq = [NoisyBit(b, noise) for b in observed]
        row = _row(
            {"sequence": "".join(map(str, observed))},
            seq,
            estimate_or_convolution(sum(observed), tm),
            kronecker=1.0 - float(top[kronecker_index(observed)]),
        )
        rows.append(row)
    return rows


def _row(key: dict, seq: list[NoisyBit], convolution: float, kronecker: float | None = None) -> dict:
    elementary = ExtremeAccumulator.empty(Kind.OR).ingest_all(seq).estimate()
    if kronecker is None:
        kronecker = estimate_or_kronecker(seq)
    vals = (elementary, convolution, kronecker)
    pairs = [(vals[i], vals[j]) for i in range(3) for j in range(i + 1, 3)]
    return {
        **key,
        "elementary": elementary,
        "convolution": convolution,
        "kronecker": kronecker,
        "max_abs_diff": max(abs(a - b) for a, b in pairs),
        "max_rel_diff": max(_rel_diff(a, b) for a, b in pairs),
    }

