"""Deterministic stock-flow engine: fixed-step RK4 over the model right-hand side."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .model import ActivesTable, ModelParams, StateVector, _rhs

__all__ = [
    "IntegrationDiverged",
    "ClampEvent",
    "SdConfig",
    "Trajectory",
    "rk4_step",
    "run_sd",
    "grid_steps",
]

STOCKS = ("n", "np", "m")


class IntegrationDiverged(ArithmeticError):
    """A derivative or stock became non-finite during integration."""

    def __init__(self, t: float):
        super().__init__(f"integration diverged at t={t!r} (non-finite derivative or state)")
        self.t = t


@dataclass(frozen=True)
class ClampEvent:
    t: float
    stock: str
    value: float  # the negative value that was replaced by 0


def grid_steps(span: float, dt: float, what: str) -> int:
    """Number of ``dt`` steps in ``span``; ``span`` must be an integer multiple of ``dt``."""
    k = round(span / dt)
    if k < 1 or not math.isclose(k * dt, span, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError(f"{what}={span!r} is not a positive integer multiple of dt={dt!r}")
    return k


@dataclass(frozen=True)
class SdConfig:
    dt: float = 1.0 / 1024
    horizon: float = 100.0
    record_every: float = 0.25
    initial: StateVector = StateVector(0.0, 3673.0, 0.0, 0.0)

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be > 0, got {self.dt!r}")
        if not self.dt <= self.record_every <= self.horizon:
            raise ValueError(
                f"need 0 < dt <= record_every <= horizon, got dt={self.dt}, "
                f"record_every={self.record_every}, horizon={self.horizon}"
            )
        if self.initial.t > self.horizon:
            raise ValueError("initial time lies beyond the horizon")
        grid_steps(self.horizon - self.initial.t, self.dt, "horizon")
        grid_steps(self.record_every, self.dt, "record_every")


@dataclass
class Trajectory:
    """Stocks sampled on a time grid, with the TREC-positive naive percentage."""

    t: np.ndarray
    n: np.ndarray
    np: np.ndarray
    m: np.ndarray
    clamp_events: list = field(default_factory=list)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        self.n = np.asarray(self.n, dtype=np.float64)
        self.np = np.asarray(self.np, dtype=np.float64)
        self.m = np.asarray(self.m, dtype=np.float64)
        if not (self.t.shape == self.n.shape == self.np.shape == self.m.shape) or self.t.ndim != 1:
            raise ValueError("trajectory columns must be 1-D arrays of equal length")
        if len(self.t) > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self):
        return len(self.t)

    @property
    def trec_pct(self) -> np.ndarray:
        """``100 * n / (n + np)``; defined as 0 where the naive pool is empty."""
        total = self.n + self.np
        out = np.zeros_like(total)
        np.divide(100.0 * self.n, total, out=out, where=total > 0)
        return out

    def __getitem__(self, i) -> StateVector:
        return StateVector(float(self.t[i]), float(self.n[i]), float(self.np[i]), float(self.m[i]))

    def samples(self):
        for i in range(len(self)):
            yield self[i]

    def interp(self, column: str, t):
        values = self.trec_pct if column == "trec_pct" else getattr(self, column)
        return np.interp(t, self.t, values)

    def window(self, t0: float, t1: float) -> np.ndarray:
        """Boolean mask of samples with ``t0 <= t <= t1``."""
        return (self.t >= t0 - 1e-12) & (self.t <= t1 + 1e-12)

    def to_csv(self, path) -> None:
        """Write ``t,n,np,m,trec_pct`` at full (round-trip) precision."""
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "n", "np", "m", "trec_pct"])
            for row in zip(self.t, self.n, self.np, self.m, self.trec_pct):
                writer.writerow([repr(float(x)) for x in row])

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2, dtype=np.float64)
        with Path(path).open() as fh:
            header = fh.readline().strip().split(",")
        if header != ["t", "n", "np", "m", "trec_pct"]:
            raise ValueError(f"{path}: unexpected trajectory header {header!r}")
        return cls(data[:, 0], data[:, 1], data[:, 2], data[:, 3])

    def equals(self, other: "Trajectory") -> bool:
        """Bitwise equality of all columns."""
        return all(
            np.array_equal(getattr(self, c), getattr(other, c)) for c in ("t", "n", "np", "m")
        )


@njit(cache=True, inline="always")
def _rk4(t, n, q, m, dt, p, act_ages, act_vals):
    h = 0.5 * dt
    a1, b1, c1 = _rhs(t, n, q, m, p, act_ages, act_vals)
    a2, b2, c2 = _rhs(t + h, n + h * a1, q + h * b1, m + h * c1, p, act_ages, act_vals)
    a3, b3, c3 = _rhs(t + h, n + h * a2, q + h * b2, m + h * c2, p, act_ages, act_vals)
    a4, b4, c4 = _rhs(t + dt, n + dt * a3, q + dt * b3, m + dt * c3, p, act_ages, act_vals)
    n1 = n + dt * (a1 + 2.0 * a2 + 2.0 * a3 + a4) / 6.0
    q1 = q + dt * (b1 + 2.0 * b2 + 2.0 * b3 + b4) / 6.0
    m1 = m + dt * (c1 + 2.0 * c2 + 2.0 * c3 + c4) / 6.0
    ok = math.isfinite(n1) and math.isfinite(q1) and math.isfinite(m1)
    return n1, q1, m1, ok


@njit(cache=True)
def _integrate(t0, y0, dt, nsteps, stride, p, act_ages, act_vals):
    nrec = nsteps // stride + 1
    rec = np.empty((nrec, 3))
    times = np.empty(nrec)
    rec[0, :] = y0
    times[0] = t0
    # clamp log rows: (time, stock index, negative value)
    clamp_buf = np.empty((16, 3))
    nclamp = 0
    y = np.empty(3)
    n, q, m = y0[0], y0[1], y0[2]
    r = 1
    for k in range(nsteps):
        t = t0 + k * dt
        n, q, m, ok = _rk4(t, n, q, m, dt, p, act_ages, act_vals)
        if not ok:
            return times[:r], rec[:r], clamp_buf[:nclamp], t
        if n < 0.0 or q < 0.0 or m < 0.0:
            y[0], y[1], y[2] = n, q, m
            for i in range(3):
                if y[i] < 0.0:
                    if nclamp == clamp_buf.shape[0]:
                        grown = np.empty((2 * nclamp, 3))
                        grown[:nclamp] = clamp_buf[:nclamp]
                        clamp_buf = grown
                    clamp_buf[nclamp, 0] = t0 + (k + 1) * dt
                    clamp_buf[nclamp, 1] = i
                    clamp_buf[nclamp, 2] = y[i]
                    nclamp += 1
            n, q, m = max(n, 0.0), max(q, 0.0), max(m, 0.0)
        if (k + 1) % stride == 0:
            times[r] = t0 + (k + 1) * dt
            rec[r, 0] = n
            rec[r, 1] = q
            rec[r, 2] = m
            r += 1
    return times, rec, clamp_buf[:nclamp], -1.0


def _clamp_events(rows) -> list[ClampEvent]:
    return [ClampEvent(float(t), STOCKS[int(i)], float(v)) for t, i, v in rows]


def rk4_step(state: StateVector, dt: float, p: ModelParams, actives: ActivesTable | None = None,
             events: list | None = None) -> StateVector:
    """Advance ``state`` by one classic RK4 step of size ``dt``.

    Stocks that land below zero are set to 0; a :class:`ClampEvent` is
    appended to ``events`` when a list is supplied.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    actives = actives or ActivesTable()
    ages, vals = actives.arrays()
    n, q, m, ok = _rk4(state.t, state.n, state.np, state.m, float(dt), p.as_array(), ages, vals)
    y = [n, q, m]
    if not ok:
        raise IntegrationDiverged(state.t)
    t_new = state.t + dt
    for i, name in enumerate(STOCKS):
        if y[i] < 0:
            if events is not None:
                events.append(ClampEvent(t_new, name, float(y[i])))
            y[i] = 0.0
    return StateVector(t_new, float(y[0]), float(y[1]), float(y[2]))


def run_sd(cfg: SdConfig, p: ModelParams, actives: ActivesTable | None = None) -> Trajectory:
    """Integrate from ``cfg.initial`` to ``cfg.horizon`` and sample every ``cfg.record_every``."""
    actives = actives or ActivesTable()
    ages, vals = actives.arrays()
    t0 = cfg.initial.t
    nsteps = grid_steps(cfg.horizon - t0, cfg.dt, "horizon")
    stride = grid_steps(cfg.record_every, cfg.dt, "record_every")
    times, rec, clamps, fail_t = _integrate(
        t0, cfg.initial.as_array(), cfg.dt, nsteps, stride, p.as_array(), ages, vals
    )
    if fail_t >= 0:
        raise IntegrationDiverged(float(fail_t))
    return Trajectory(times, rec[:, 0], rec[:, 1], rec[:, 2], clamp_events=_clamp_events(clamps))
