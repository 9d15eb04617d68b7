"""System-identification data streams.

Regressors come from a tapped delay line over a scalar Gaussian input
(white or AR(1)), the desired signal is ``d(i) = u_i^T w^o_i + v(i)`` and the
plant optionally follows a random walk with isotropic increments.

Every realization draws from its own set of seeded generators, one per
signal role, so the input, the measurement noise and the plant walk are
mutually independent and a realization is a pure function of
``(seed, realization_index)`` regardless of how realizations are batched.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import lfilter

SEEDED_UNIT_NORM = "seeded-unit-norm"

# spawn-key roles
_PLANT = 0
_REALIZATION = 1
_ROLE_INPUT = 0
_ROLE_NOISE = 1
_ROLE_WALK = 2


class ConfigError(ValueError):
    """Raised when a configuration violates one of its invariants."""


@dataclass
class ScenarioConfig:
    filter_length: int
    input_variance: float = 1.0
    ar_coefficient: float = 0.0
    noise_variance: float = 1e-2
    process_noise_schedule: list[tuple[int, float]] = field(
        default_factory=lambda: [(0, 0.0)]
    )
    true_system_init: str | Sequence[float] = SEEDED_UNIT_NORM
    horizon: int = 5000
    seed: int = 0

    def __post_init__(self):
        self.process_noise_schedule = [
            (int(s), float(q)) for s, q in self.process_noise_schedule
        ]
        if not isinstance(self.true_system_init, str):
            self.true_system_init = [float(x) for x in self.true_system_init]
        self.validate()

    def validate(self):
        problems = []
        if int(self.filter_length) < 1:
            problems.append("filter_length must be >= 1")
        if not self.input_variance > 0:
            problems.append("input_variance must be > 0")
        if not 0.0 <= self.ar_coefficient < 1.0:
            problems.append("ar_coefficient must lie in [0, 1)")
        if not self.noise_variance >= 0:
            problems.append("noise_variance must be >= 0")
        sched = self.process_noise_schedule
        if not sched or sched[0][0] != 0:
            problems.append("process_noise_schedule must start at iteration 0")
        starts = [s for s, _ in sched]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            problems.append("process_noise_schedule start iterations must be strictly increasing")
        if any(not q >= 0 for _, q in sched):
            problems.append("process_noise_schedule variances must be >= 0")
        if isinstance(self.true_system_init, str):
            if self.true_system_init != SEEDED_UNIT_NORM:
                problems.append(f"unknown true_system_init directive {self.true_system_init!r}")
        elif len(self.true_system_init) != self.filter_length:
            problems.append("true_system_init length must equal filter_length")
        if int(self.horizon) < 1:
            problems.append("horizon must be >= 1")
        if int(self.seed) < 0:
            problems.append("seed must be a nonnegative integer")
        if problems:
            raise ConfigError("invalid ScenarioConfig: " + "; ".join(problems))

    @property
    def is_white(self) -> bool:
        return self.ar_coefficient == 0.0

    def process_noise_at(self, i: int) -> float:
        """Random-walk variance in force at iteration ``i``."""
        current = self.process_noise_schedule[0][1]
        for start, q in self.process_noise_schedule:
            if start > i:
                break
            current = q
        return current

    def process_noise_profile(self, start: int, stop: int) -> np.ndarray:
        """Per-iteration random-walk variances for iterations ``start..stop-1``."""
        idx = np.arange(start, stop)
        starts = np.array([s for s, _ in self.process_noise_schedule])
        values = np.array([q for _, q in self.process_noise_schedule])
        return values[np.searchsorted(starts, idx, side="right") - 1]

    def input_covariance(self) -> np.ndarray:
        """Covariance of the tapped-delay-line regressor."""
        lags = np.abs(np.subtract.outer(np.arange(self.filter_length), np.arange(self.filter_length)))
        return self.input_variance * self.ar_coefficient ** lags


@dataclass
class PlantState:
    w_o: np.ndarray
    process_noise: float = 0.0


@dataclass
class SampleRecord:
    i: int
    u: np.ndarray
    d: float
    w_o: np.ndarray


def ar1_step(prev_sample: float, gamma: float, innovation: float, input_variance: float) -> float:
    """One step of the unit-gain AR(1) input model.

    ``innovation`` is a standard-normal draw; it is scaled to variance
    ``input_variance`` so the stationary variance of the output equals
    ``input_variance`` for every ``gamma`` in [0, 1).
    """
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"AR coefficient must lie in [0, 1), got {gamma}")
    x = math.sqrt(input_variance) * innovation
    return gamma * prev_sample + math.sqrt(1.0 - gamma * gamma) * x


def random_walk_step(w_prev: np.ndarray, process_noise: float, rng: np.random.Generator) -> np.ndarray:
    if process_noise < 0:
        raise ValueError("process noise variance must be >= 0")
    w_prev = np.asarray(w_prev, dtype=float)
    if process_noise == 0:
        return w_prev.copy()
    return w_prev + math.sqrt(process_noise) * rng.standard_normal(w_prev.shape)


def initial_plant(cfg: ScenarioConfig) -> np.ndarray:
    """Initial true system; the seeded draw is shared by every realization."""
    if not isinstance(cfg.true_system_init, str):
        return np.array(cfg.true_system_init, dtype=float)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(_PLANT,)))
    w = rng.standard_normal(cfg.filter_length)
    return w / np.linalg.norm(w)


def _generators(seed: int, realization: int) -> tuple[np.random.Generator, ...]:
    return tuple(
        np.random.default_rng(
            np.random.SeedSequence(seed, spawn_key=(_REALIZATION, realization, role))
        )
        for role in (_ROLE_INPUT, _ROLE_NOISE, _ROLE_WALK)
    )


@dataclass
class StreamBlock:
    """Samples for iterations ``start .. start + len - 1`` of a batch.

    ``u`` has shape (R, B, M), ``d`` (R, B) and ``w_o`` (R, B, M).
    """

    start: int
    u: np.ndarray
    d: np.ndarray
    w_o: np.ndarray

    def __len__(self):
        return self.d.shape[1]


class BatchStream:
    """Block-wise generator for a batch of independent realizations.

    The samples of a realization do not depend on which other realizations
    share its batch nor on the block length.
    """

    def __init__(self, cfg: ScenarioConfig, realizations: Sequence[int]):
        cfg.validate()
        self.cfg = cfg
        self.realizations = list(realizations)
        self._gens = [_generators(cfg.seed, r) for r in self.realizations]
        n = len(self.realizations)
        m = cfg.filter_length
        self._sigma_u = math.sqrt(cfg.input_variance)
        self._sigma_v = math.sqrt(cfg.noise_variance)
        self._gain = math.sqrt(1.0 - cfg.ar_coefficient ** 2) * self._sigma_u
        # stationary start for the AR(1) recursion
        self._ar_state = np.array([self._sigma_u * g[0].standard_normal() for g in self._gens])
        self._w_o = np.tile(initial_plant(cfg), (n, 1))
        self._walks = any(q > 0 for _, q in cfg.process_noise_schedule)
        self._i = 0
        # pre-roll so the first regressor is fully populated
        self._tail = self._inputs(m - 1)

    def _inputs(self, count: int) -> np.ndarray:
        x = np.stack([g[0].standard_normal(count) for g in self._gens]) if count else np.zeros((len(self._gens), 0))
        if count == 0:
            return x
        gamma = self.cfg.ar_coefficient
        if gamma == 0.0:
            return self._sigma_u * x
        out, zf = lfilter([self._gain], [1.0, -gamma], x, axis=-1, zi=(gamma * self._ar_state)[:, None])
        self._ar_state = out[:, -1].copy()
        return out

    @property
    def position(self) -> int:
        return self._i

    def next_block(self, size: int) -> StreamBlock:
        cfg = self.cfg
        size = min(size, cfg.horizon - self._i)
        if size <= 0:
            raise StopIteration
        m = cfg.filter_length
        n = len(self._gens)
        fresh = self._inputs(size)
        samples = np.concatenate([self._tail, fresh], axis=1)
        # windows hold [u(i-M+1) .. u(i)]; flip so u_i[k] = u(i-k)
        u = sliding_window_view(samples, m, axis=1)[:, :, ::-1]
        u = np.ascontiguousarray(u)
        self._tail = samples[:, samples.shape[1] - (m - 1):] if m > 1 else samples[:, :0]

        if self._walks:
            # drawn on every iteration so the stream does not depend on blocking
            q = cfg.process_noise_profile(self._i, self._i + size)
            steps = np.stack([g[2].standard_normal((size, m)) for g in self._gens])
            steps *= np.sqrt(q)[None, :, None]
            w = np.cumsum(np.concatenate([self._w_o[:, None, :], steps], axis=1), axis=1)[:, 1:]
            self._w_o = w[:, -1].copy()
        else:
            w = np.broadcast_to(self._w_o[:, None, :], (n, size, m))

        noise = np.stack([g[1].standard_normal(size) for g in self._gens]) * self._sigma_v
        d = np.sum(u * w, axis=-1) + noise
        block = StreamBlock(self._i, u, d, w)
        self._i += size
        return block

    def blocks(self, size: int = 1024) -> Iterator[StreamBlock]:
        while self._i < self.cfg.horizon:
            yield self.next_block(size)


def generate_stream(cfg: ScenarioConfig, realization_index: int, block_size: int = 1024) -> Iterator[SampleRecord]:
    """Yield the samples of one realization, iteration by iteration."""
    stream = BatchStream(cfg, [realization_index])
    for block in stream.blocks(block_size):
        for k in range(len(block)):
            yield SampleRecord(
                i=block.start + k,
                u=block.u[0, k].copy(),
                d=float(block.d[0, k]),
                w_o=np.array(block.w_o[0, k]),
            )
