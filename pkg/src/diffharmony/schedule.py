"""Noise schedules, the forward noising process and timestep plans."""

from __future__ import annotations

import operator
from dataclasses import dataclass, field
from itertools import accumulate

import numpy as np


@dataclass(frozen=True)
class NoiseSchedule:
    """Beta schedule over ``T`` noise levels.

    Arrays are indexed by timestep, with index 0 the clean data:
    ``alpha_bars[0] == 1`` and ``alpha_bars[t] == alpha_bars[t-1] * alphas[t]``.
    ``betas[0]`` and ``alphas[0]`` are placeholders (0 and 1).
    """

    betas: np.ndarray
    alphas: np.ndarray = field(init=False, repr=False)
    alpha_bars: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=np.float64).ravel()
        if betas.size < 1:
            raise ValueError("schedule needs at least one timestep")
        if not np.all((betas > 0) & (betas < 1)):
            raise ValueError("every beta must lie in (0, 1)")
        betas = np.concatenate([[0.0], betas])
        alphas = 1.0 - betas
        # explicit sequential product keeps the recurrence exact
        alpha_bars = np.array(list(accumulate(alphas, operator.mul)))
        for name, arr in (("betas", betas), ("alphas", alphas), ("alpha_bars", alpha_bars)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def T(self) -> int:
        return len(self.betas) - 1

    def check_timestep(self, t: int, allow_zero: bool = True) -> int:
        t = int(t)
        lo = 0 if allow_zero else 1
        if not lo <= t <= self.T:
            raise ValueError(f"timestep {t} out of range [{lo}, {self.T}]")
        return t


def linear_schedule(T: int = 1000, beta_start: float = 1e-4, beta_end: float = 0.02) -> NoiseSchedule:
    """Linearly spaced betas from ``beta_start`` to ``beta_end`` inclusive."""
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if not 0 < beta_start <= beta_end < 1:
        raise ValueError(
            f"need 0 < beta_start <= beta_end < 1, got beta_start={beta_start}, beta_end={beta_end}"
        )
    return NoiseSchedule(np.linspace(beta_start, beta_end, T))


def q_sample(x0, t: int, eps, sched: NoiseSchedule) -> np.ndarray:
    """Noise ``x0`` to level ``t``: ``sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps``."""
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if x0.shape != eps.shape:
        raise ValueError(f"shape mismatch: x0 {x0.shape} vs eps {eps.shape}")
    t = sched.check_timestep(t)
    if t == 0:
        return x0.copy()
    abar = sched.alpha_bars[t]
    return np.sqrt(abar) * x0 + np.sqrt(1.0 - abar) * eps


@dataclass(frozen=True)
class TimestepPlan:
    """Strictly decreasing timesteps ending in 0, e.g. ``(1000, 667, 334, 1, 0)``."""

    timesteps: tuple

    def __post_init__(self):
        ts = tuple(int(t) for t in self.timesteps)
        if len(ts) < 2 or ts[-1] != 0:
            raise ValueError(f"plan must end with 0 after at least one step, got {ts}")
        if any(a <= b for a, b in zip(ts, ts[1:])):
            raise ValueError(f"plan must be strictly decreasing, got {ts}")
        object.__setattr__(self, "timesteps", ts)

    def __iter__(self):
        return iter(self.timesteps)

    def __len__(self):
        return len(self.timesteps)

    def pairs(self):
        """Consecutive ``(t, t_prev)`` transitions."""
        return list(zip(self.timesteps, self.timesteps[1:]))


def make_plan(sched: NoiseSchedule, num_steps: int) -> TimestepPlan:
    """Evenly spaced subsequence of ``T..1`` with ``num_steps`` entries, plus 0."""
    T = sched.T
    if not 1 <= num_steps <= T:
        raise ValueError(f"num_steps must be in [1, {T}], got {num_steps}")
    steps = np.round(np.linspace(T, 1, num_steps)).astype(int)
    steps = sorted(set(steps.tolist()), reverse=True)
    return TimestepPlan(tuple(steps) + (0,))
