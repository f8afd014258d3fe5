"""Binary randomized response.

A bit ``x`` is reported as ``1 - x`` with flip probability ``q`` and kept
otherwise, so the reported value is Bernoulli(1 - q) when ``x = 1`` and
Bernoulli(q) when ``x = 0``.  Every function that draws randomness takes a
caller-owned :class:`numpy.random.Generator`; nothing here touches global
random state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "NoiseParam",
    "NoisyBit",
    "apply_rr",
    "apply_rr_vector",
    "noise_from_epsilon",
    "randomize_bits",
]


@dataclass(frozen=True, slots=True)
class NoiseParam:
    """Flip probability ``q`` of a randomized response mechanism.

    ``q`` must lie in ``[0, 1/2)``.  ``q = 0`` is the identity mechanism;
    ``q = 1/2`` destroys all information and is rejected here so that no
    downstream formula ever divides by ``1 - 2q = 0``.
    """

    q: float

    def __post_init__(self) -> None:
        q = self.q
        if isinstance(q, bool) or not isinstance(q, (int, float, np.floating, np.integer)):
            raise TypeError(f"flip probability must be a real number, got {q!r}")
        q = float(q)
        if not math.isfinite(q) or not 0.0 <= q < 0.5:
            raise ValueError(f"flip probability must satisfy 0 <= q < 1/2, got {q!r}")
        object.__setattr__(self, "q", q)

    @property
    def debias_scale(self) -> float:
        """``1 - 2q``, strictly positive."""
        return 1.0 - 2.0 * self.q

    @property
    def noise_term(self) -> float:
        """Per-bit variance contribution ``q(1 - q) / (1 - 2q)**2``."""
        q = self.q
        return q * (1.0 - q) / (1.0 - 2.0 * q) ** 2


@dataclass(frozen=True, slots=True)
class NoisyBit:
    """An observed bit together with the noise it was generated under."""

    value: int
    noise: NoiseParam

    def __post_init__(self) -> None:
        if isinstance(self.value, (bool, np.bool_)):
            object.__setattr__(self, "value", int(self.value))
        elif isinstance(self.value, np.integer):
            object.__setattr__(self, "value", int(self.value))
        if type(self.value) is not int or self.value not in (0, 1):
            raise ValueError(f"noisy bit value must be 0 or 1, got {self.value!r}")
        if not isinstance(self.noise, NoiseParam):
            raise TypeError("noise must be a NoiseParam")


def _check_bit(x: int) -> int:
    if isinstance(x, (bool, np.bool_, np.integer)):
        x = int(x)
    if type(x) is not int or x not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {x!r}")
    return x


def apply_rr(x: int, noise: NoiseParam, rng: np.random.Generator) -> NoisyBit:
    """Pass a single bit through randomized response.

    Exactly one uniform draw is consumed, so a fixed seed reproduces the
    output bit-for-bit.
    """
    x = _check_bit(x)
    flip = rng.random() < noise.q
    return NoisyBit(x ^ int(flip), noise)


def randomize_bits(bits: np.ndarray, q: float, rng: np.random.Generator) -> np.ndarray:
    """Array form of randomized response; returns a new ``uint8`` array.

    ``bits`` must contain only 0 and 1.  One uniform draw is consumed per
    element, independently.
    """
    arr = np.asarray(bits)
    if arr.dtype.kind not in "biu":
        raise ValueError(f"bits must be an integer or boolean array, got dtype {arr.dtype}")
    if arr.size and (arr.min() < 0 or arr.max() > 1):
        raise ValueError("bits must contain only 0 and 1")
    flips = rng.random(arr.shape) < q
    return (arr.astype(np.uint8) ^ flips.astype(np.uint8)).astype(np.uint8)


def apply_rr_vector(
    bits: Sequence[int], noise: NoiseParam, rng: np.random.Generator
) -> list[NoisyBit]:
    """Elementwise :func:`apply_rr` with independent draws."""
    arr = np.fromiter((_check_bit(b) for b in bits), dtype=np.uint8)
    noisy = randomize_bits(arr, noise.q, rng)
    return [NoisyBit(int(v), noise) for v in noisy]


def noise_from_epsilon(epsilon: float) -> NoiseParam:
    """Flip probability giving ``epsilon``-local differential privacy.

    ``q = 1 / (exp(epsilon) + 1)``, which lies strictly inside ``(0, 1/2)``
    for every positive finite epsilon (``epsilon = inf`` gives ``q = 0``).
    """
    epsilon = float(epsilon)
    if math.isnan(epsilon) or epsilon <= 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon!r}")
    # exp overflows to inf for epsilon > ~709; 1/(inf + 1) is the correct limit 0
    try:
        e = math.exp(epsilon)
    except OverflowError:
        e = math.inf
    return NoiseParam(1.0 / (e + 1.0))
