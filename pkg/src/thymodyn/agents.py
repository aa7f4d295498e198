"""Stochastic agent-based engine.

Each T cell is an agent in one of three states (Naive, NaiveProlif, Memory).
Agents within a state are interchangeable, so the population is stored as
per-state integer counts and every time slice draws the number of agents
taking each competing transition from a binomial split. This is
distributionally identical to scanning agents one by one with a single
uniform draw partitioned into ``[death | transition | nothing]``.

``scale`` is the number of cells one agent stands for. Agent counts are
multiplied by ``scale`` before the homeostatic modifiers are evaluated and
before results are reported, so trajectories are always in cells/mm^3.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from numba import njit

from .model import (
    I_B,
    I_C,
    I_LA,
    I_LMN,
    I_LN,
    I_LT,
    I_MUM,
    I_MUN,
    I_MUNP,
    I_NPBAR,
    I_S0,
    I_SBAR,
    ActivesTable,
    ModelParams,
    _death,
    _dilution,
    _export,
    _lookup,
)
from .sd import Trajectory, grid_steps

__all__ = [
    "AbsConfigError",
    "AbsConfig",
    "AgentPopulation",
    "EnsembleStats",
    "AbsResult",
    "replicate_rng",
    "step_abs",
    "run_replicate",
    "run_abs",
]

MAX_RATE_DT = 0.1


class AbsConfigError(ValueError):
    """Time slice too coarse for the configured rates."""


@dataclass(frozen=True)
class AbsConfig:
    dt: float = 1.0 / 1024
    horizon: float = 100.0
    record_every: float = 0.25
    seed: int = 0
    scale: float = 1.0
    initial_naive: float = 3673.0  # cells/mm^3; converted to agents with ``scale``
    replicates: int = 30

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise AbsConfigError(f"dt must be > 0, got {self.dt!r}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise AbsConfigError(f"scale must be > 0, got {self.scale!r}")
        if not 0 <= self.seed < 2**64:
            raise AbsConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if self.replicates < 1:
            raise AbsConfigError(f"replicates must be >= 1, got {self.replicates!r}")
        if self.initial_naive < 0:
            raise AbsConfigError("initial_naive must be >= 0")
        if not self.dt <= self.record_every <= self.horizon:
            raise AbsConfigError("need dt <= record_every <= horizon")
        try:
            grid_steps(self.horizon, self.dt, "horizon")
            grid_steps(self.record_every, self.dt, "record_every")
        except ValueError as exc:
            raise AbsConfigError(str(exc)) from None

    @property
    def initial_agents(self) -> int:
        return int(round(self.initial_naive / self.scale))

    def check_rates(self, p: ModelParams) -> None:
        """Refuse slices where the fastest per-agent rate times dt exceeds 0.1."""
        worst = p.max_rate() * self.dt
        if worst > MAX_RATE_DT:
            raise AbsConfigError(
                f"rate*dt = {worst:.4g} exceeds {MAX_RATE_DT}; reduce dt below "
                f"{MAX_RATE_DT / p.max_rate():.4g} years"
            )


@dataclass(frozen=True)
class AgentPopulation:
    """Agent counts per state plus bookkeeping.

    ``births`` and ``deaths`` are cumulative agent counts, so
    ``total - initial total == births - deaths`` holds at all times.
    """

    naive: int = 0
    naive_prolif: int = 0
    memory: int = 0
    t: float = 0.0
    birth_acc: float = 0.0
    memory_acc: float = 0.0
    births: int = 0
    deaths: int = 0

    @property
    def total(self) -> int:
        return self.naive + self.naive_prolif + self.memory

    def cells(self, scale: float) -> tuple[float, float, float]:
        return self.naive * scale, self.naive_prolif * scale, self.memory * scale


@njit(cache=True)
def _influx(acc, expected, rng):
    # Whole expected agents are drawn as Poisson; the fractional remainder is
    # carried so long-run influx matches its expectation even when expected < 1.
    x = acc + expected
    whole = math.floor(x)
    born = rng.poisson(whole) if whole > 0 else 0
    return born, x - whole


@njit(cache=True)
def _split(count, p_a, p_b, rng):
    # One uniform per agent partitioned into [a | b | nothing] == sequential binomials.
    if count == 0:
        return 0, 0
    a = rng.binomial(count, p_a) if p_a > 0 else 0
    rest = count - a
    if p_b <= 0 or rest == 0:
        return a, 0
    q = p_b / (1.0 - p_a)
    if q >= 1.0:
        return a, rest
    return a, rng.binomial(rest, q)


@njit(cache=True)
def _slice(state, acc, t, dt, scale, p, act_ages, act_vals, rng):
    """Advance ``state`` (int64[3]: naive, prolif, memory) by one slice in place.

    Returns (births, deaths, status); status 0 is success, otherwise the index
    of the state (1-based) whose competing probabilities exceed 1.
    """
    naive, prolif, memory = state[0], state[1], state[2]
    n_cells = naive * scale
    np_cells = prolif * scale
    g = _death(np_cells, p[I_B], p[I_NPBAR])
    h = _dilution(n_cells, np_cells, p[I_NPBAR])
    s = _export(np_cells, p[I_SBAR], p[I_NPBAR])

    p_die_n = p[I_MUN] * g * dt
    p_conv_n = p[I_LN] * dt
    p_die_p = p[I_MUNP] * dt
    p_spawn_p = p[I_C] * h * dt
    p_die_m = p[I_MUM] * dt
    p_rev_m = p[I_LMN] * dt
    if p_die_n + p_conv_n > 1.0:
        return 0, 0, 1
    if p_die_p + p_spawn_p > 1.0:
        return 0, 0, 2
    if p_die_m + p_rev_m > 1.0:
        return 0, 0, 3

    thymic, rest = _influx(acc[0], p[I_S0] * math.exp(-p[I_LT] * t) * s * dt / scale, rng)
    acc[0] = rest
    active = _lookup(t, act_ages, act_vals)
    mem_in, rest = _influx(acc[1], p[I_LA] * active * dt / scale, rng)
    acc[1] = rest

    dn, conv = _split(naive, p_die_n, p_conv_n, rng)
    dp, spawn = _split(prolif, p_die_p, p_spawn_p, rng)
    dm, rev = _split(memory, p_die_m, p_rev_m, rng)

    state[0] = naive - dn - conv + thymic
    state[1] = prolif - dp + spawn + conv + rev
    state[2] = memory - dm - rev + mem_in
    return thymic + spawn + mem_in, dn + dp + dm, 0


@njit(cache=True, nogil=True)
def _run_kernel(state0, dt, nsteps, stride, scale, p, act_ages, act_vals, rng):
    nrec = nsteps // stride + 1
    rec = np.empty((nrec, 3), dtype=np.int64)
    state = state0.copy()
    acc = np.zeros(2)
    rec[0, :] = state
    r = 1
    for k in range(nsteps):
        _, _, status = _slice(state, acc, k * dt, dt, scale, p, act_ages, act_vals, rng)
        if status != 0:
            return rec[:r], status, k * dt
        if (k + 1) % stride == 0:
            rec[r, :] = state
            r += 1
    return rec, 0, -1.0


def _raise_status(status: int, t: float):
    state = ("Naive", "NaiveProlif", "Memory")[status - 1]
    raise AbsConfigError(
        f"competing transition probabilities for {state} agents exceed 1 at t={t!r}; dt is too large"
    )


def replicate_rng(seed: int, replicate: int) -> np.random.Generator:
    """Independent generator for replicate ``replicate`` of an ensemble seeded with ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replicate,)))


def step_abs(popn: AgentPopulation, dt: float, p: ModelParams, actives: ActivesTable | None,
             rng: np.random.Generator, scale: float = 1.0) -> AgentPopulation:
    """Advance the population by one time slice of length ``dt``."""
    if not dt > 0:
        raise AbsConfigError(f"dt must be > 0, got {dt!r}")
    actives = actives or ActivesTable()
    ages, vals = actives.arrays()
    state = np.array([popn.naive, popn.naive_prolif, popn.memory], dtype=np.int64)
    acc = np.array([popn.birth_acc, popn.memory_acc])
    births, deaths, status = _slice(state, acc, popn.t, float(dt), float(scale), p.as_array(), ages, vals, rng)
    if status != 0:
        _raise_status(status, popn.t)
    return AgentPopulation(
        naive=int(state[0]),
        naive_prolif=int(state[1]),
        memory=int(state[2]),
        t=popn.t + dt,
        birth_acc=float(acc[0]),
        memory_acc=float(acc[1]),
        births=popn.births + int(births),
        deaths=popn.deaths + int(deaths),
    )


def run_replicate(cfg: AbsConfig, p: ModelParams, actives: ActivesTable | None = None,
                  replicate: int = 0) -> Trajectory:
    """Simulate one replicate and return its trajectory in cells/mm^3."""
    cfg.check_rates(p)
    actives = actives or ActivesTable()
    ages, vals = actives.arrays()
    nsteps = grid_steps(cfg.horizon, cfg.dt, "horizon")
    stride = grid_steps(cfg.record_every, cfg.dt, "record_every")
    state0 = np.array([cfg.initial_agents, 0, 0], dtype=np.int64)
    rng = replicate_rng(cfg.seed, replicate)
    rec, status, t_fail = _run_kernel(state0, cfg.dt, nsteps, stride, cfg.scale, p.as_array(), ages, vals, rng)
    if status != 0:
        _raise_status(status, t_fail)
    times = np.arange(len(rec)) * (stride * cfg.dt)
    cells = rec.astype(np.float64) * cfg.scale
    return Trajectory(times, cells[:, 0], cells[:, 1], cells[:, 2])


@dataclass
class EnsembleStats:
    """Per-time-point mean and sample standard deviation across replicates."""

    t: np.ndarray
    mean: dict
    sd: dict
    replicates: int

    COLUMNS = ("n", "np", "m", "trec_pct")

    @classmethod
    def from_trajectories(cls, trajs: list[Trajectory]) -> "EnsembleStats":
        t = trajs[0].t
        if any(not np.array_equal(tr.t, t) for tr in trajs):
            raise ValueError("replicates are not on a common recording grid")
        mean, sd = {}, {}
        ddof = 1 if len(trajs) > 1 else 0
        for col in cls.COLUMNS:
            stack = np.stack([tr.trec_pct if col == "trec_pct" else getattr(tr, col) for tr in trajs])
            mean[col] = stack.mean(axis=0)
            sd[col] = stack.std(axis=0, ddof=ddof)
        return cls(t, mean, sd, len(trajs))

    def stderr(self, col: str) -> np.ndarray:
        return self.sd[col] / math.sqrt(self.replicates)

    def mean_trajectory(self) -> Trajectory:
        return Trajectory(self.t, self.mean["n"], self.mean["np"], self.mean["m"])

    def to_csv(self, path) -> None:
        header = ["t"]
        for col in self.COLUMNS:
            header += [f"mean_{col}", f"sd_{col}"]
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for i, t in enumerate(self.t):
                row = [t]
                for col in self.COLUMNS:
                    row += [self.mean[col][i], self.sd[col][i]]
                writer.writerow([repr(float(x)) for x in row])

    @classmethod
    def from_csv(cls, path, replicates: int) -> "EnsembleStats":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2, dtype=np.float64)
        mean = {c: data[:, 1 + 2 * i] for i, c in enumerate(cls.COLUMNS)}
        sd = {c: data[:, 2 + 2 * i] for i, c in enumerate(cls.COLUMNS)}
        return cls(data[:, 0], mean, sd, replicates)


@dataclass
class AbsResult:
    replicates: list
    stats: EnsembleStats


def run_abs(cfg: AbsConfig, p: ModelParams, actives: ActivesTable | None = None,
            workers: int = 1) -> AbsResult:
    """Run ``cfg.replicates`` independent replicates and summarise them.

    Replicate ``r`` draws from :func:`replicate_rng` ``(cfg.seed, r)``, so
    the ensemble does not depend on ``workers`` or scheduling order.
    """
    cfg.check_rates(p)
    indices = range(cfg.replicates)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trajs = list(pool.map(lambda r: run_replicate(cfg, p, actives, r), indices))
    else:
        trajs = [run_replicate(cfg, p, actives, r) for r in indices]
    return AbsResult(trajs, EnsembleStats.from_trajectories(trajs))


def with_overrides(cfg: AbsConfig, **changes) -> AbsConfig:
    return replace(cfg, **{k: v for k, v in changes.items() if v is not None})
