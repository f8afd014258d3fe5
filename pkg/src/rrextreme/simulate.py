"""Monte-Carlo experiments comparing empirical moments with the exact ones.

Trial ``t`` draws from its own generator seeded with ``seed ^ t``, so any
subset of trials can be replayed or run in parallel and the result is the
same as a sequential run.
"""

from __future__ import annotations

import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

from rrextreme.extreme_estimator import ExtremeAccumulator, Kind, variance_or
from rrextreme.rr_mechanism import NoiseParam, NoisyBit, randomize_bits
from rrextreme.union_cardinality import encode_set, estimate_union, privatize_sketch, true_variance

__all__ = ["ConfigError", "ExperimentConfig", "SimulationSummary", "parse_elements", "run_trials", "simulate"]

SCENARIOS = ("or-bits", "union")
SEED_LIMIT = 2**64


class ConfigError(ValueError):
    pass


def parse_elements(definition: Any) -> tuple[int, ...]:
    """Accept a list of ints or a string like ``"1-50,60"``."""
    if isinstance(definition, str):
        out: list[int] = []
        for token in filter(None, (t.strip() for t in definition.split(","))):
            m = re.fullmatch(r"(\d+)(?:-(\d+))?", token)
            if m is None:
                raise ConfigError(f"bad element token {token!r}")
            lo = int(m.group(1))
            hi = int(m.group(2)) if m.group(2) else lo
            if hi < lo:
                raise ConfigError(f"empty range {token!r}")
            out.extend(range(lo, hi + 1))
        return tuple(out)
    if isinstance(definition, (list, tuple)) and all(isinstance(e, int) and not isinstance(e, bool) for e in definition):
        return tuple(definition)
    raise ConfigError(f"cannot read set definition {definition!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    q: tuple[float, ...]
    trials: int
    seed: int
    true_bits: tuple[int, ...] = ()
    sets: tuple[tuple[int, ...], ...] = ()
    m: int = 0

    def __post_init__(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if not 0 <= self.seed < SEED_LIMIT:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        for q in self.q:
            NoiseParam(q)
        parties = len(self.true_bits) if self.scenario == "or-bits" else len(self.sets)
        if parties == 0:
            raise ConfigError("need at least one bit or set")
        if len(self.q) != parties:
            raise ConfigError(f"{len(self.q)} flip probabilities for {parties} parties")
        if self.scenario == "or-bits" and any(b not in (0, 1) for b in self.true_bits):
            raise ConfigError("true bits must be 0 or 1")
        if self.scenario == "union":
            if self.m < 1:
                raise ConfigError("union scenario needs a positive universe size m")
            for s in self.sets:
                if any(not 1 <= e <= self.m for e in s):
                    raise ConfigError(f"set element outside [1, {self.m}]")

    @property
    def n(self) -> int:
        return len(self.q)

    @property
    def noises(self) -> list[NoiseParam]:
        return [NoiseParam(q) for q in self.q]

    @classmethod
    def from_mapping(cls, raw: Mapping[str, Any]) -> "ExperimentConfig":
        known = {"scenario", "n", "m", "q", "true_bits", "sets", "trials", "seed"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        scenario = raw.get("scenario", "or-bits")
        if scenario == "or-bits":
            bits = raw.get("true_bits")
            if isinstance(bits, str):
                bits = [int(b) for b in bits.replace(",", " ").split()]
            if not bits:
                raise ConfigError("or-bits scenario needs true_bits")
            true_bits, sets = tuple(int(b) for b in bits), ()
            parties = len(true_bits)
        else:
            if "sets" not in raw or not raw["sets"]:
                raise ConfigError("union scenario needs sets")
            true_bits, sets = (), tuple(parse_elements(s) for s in raw["sets"])
            parties = len(sets)
        if "n" in raw and raw["n"] != parties:
            raise ConfigError(f"n={raw['n']} but {parties} parties were given")
        q = raw.get("q")
        if q is None:
            raise ConfigError("q is required")
        if isinstance(q, (int, float)) and not isinstance(q, bool):
            qs = (float(q),) * parties
        elif isinstance(q, (list, tuple)):
            qs = tuple(float(v) for v in q)
        else:
            raise ConfigError(f"q must be a number or a list, got {q!r}")
        try:
            return cls(
                scenario=scenario,
                q=qs,
                trials=int(raw.get("trials", 1000)),
                seed=int(raw.get("seed", 0)),
                true_bits=true_bits,
                sets=sets,
                m=int(raw.get("m", 0)),
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def theoretical(self) -> tuple[float, float]:
        """Exact mean and variance of one trial's estimate."""
        if self.scenario == "or-bits":
            return float(max(self.true_bits)), variance_or(self.true_bits, self.noises).variance
        x = np.stack([encode_set(s, self.m).bits for s in self.sets])
        return float(x.max(axis=0).sum()), true_variance(x, self.noises)


def run_trials(config: ExperimentConfig, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Raw estimates for trials ``start .. stop - 1`` in trial order."""
    stop = config.trials if stop is None else stop
    out = np.empty(stop - start)
    noises = config.noises
    if config.scenario == "or-bits":
        x = np.array(config.true_bits, dtype=np.uint8)
        q = np.array(config.q)
        empty = ExtremeAccumulator.empty(Kind.OR)
        for i, t in enumerate(range(start, stop)):
            rng = np.random.default_rng(config.seed ^ t)
            observed = randomize_bits(x, q, rng)
            bits = [NoisyBit(int(v), nz) for v, nz in zip(observed, noises)]
            out[i] = empty.ingest_all(bits).estimate()
    else:
        clean = [encode_set(s, config.m) for s in config.sets]
        for i, t in enumerate(range(start, stop)):
            rng = np.random.default_rng(config.seed ^ t)
            noisy = [privatize_sketch(sk, nz, rng) for sk, nz in zip(clean, noises)]
            out[i] = estimate_union(noisy).cardinality
    return out


def _run_chunk(args: tuple[ExperimentConfig, int, int]) -> np.ndarray:
    return run_trials(*args)


@dataclass(frozen=True)
class SimulationSummary:
    config: ExperimentConfig
    estimates: np.ndarray
    empirical_mean: float
    empirical_variance: float
    theoretical_mean: float
    theoretical_variance: float

    @property
    def standard_error(self) -> float:
        return math.sqrt(self.theoretical_variance / self.config.trials)

    @property
    def mean_z(self) -> float:
        diff = self.empirical_mean - self.theoretical_mean
        se = self.standard_error
        if se == 0.0:
            return 0.0 if diff == 0.0 else math.copysign(math.inf, diff)
        return diff / se

    @property
    def variance_relative_error(self) -> float:
        if self.theoretical_variance == 0.0:
            return self.empirical_variance
        return (self.empirical_variance - self.theoretical_variance) / self.theoretical_variance

    def as_dict(self) -> dict[str, Any]:
        c = self.config
        return {
            "scenario": c.scenario,
            "n": c.n,
            "m": c.m if c.scenario == "union" else 1,
            "trials": c.trials,
            "seed": c.seed,
            "empirical_mean": self.empirical_mean,
            "theoretical_mean": self.theoretical_mean,
            "standard_error": self.standard_error,
            "mean_z": self.mean_z,
            "empirical_variance": self.empirical_variance,
            "theoretical_variance": self.theoretical_variance,
            "variance_relative_error": self.variance_relative_error,
        }


def simulate(config: ExperimentConfig, jobs: int = 1) -> SimulationSummary:
    if jobs <= 1 or config.trials < 2 * jobs:
        est = run_trials(config)
    else:
        bounds = np.linspace(0, config.trials, jobs + 1).astype(int)
        chunks = [(config, int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            est = np.concatenate(list(pool.map(_run_chunk, chunks)))
    mean = math.fsum(est) / est.size
    var = math.fsum((est - mean) ** 2) / (est.size - 1) if est.size > 1 else 0.0
    theo_mean, theo_var = config.theoretical()
    return SimulationSummary(config, est, mean, var, theo_mean, theo_var)

