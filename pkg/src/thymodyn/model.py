"""Naive T-cell repertoire model: parameters, homeostatic modifiers and the ODE right-hand side.

Three stocks are tracked, all in cells per mm^3 of peripheral blood:

* ``n``  -- naive cells of direct thymic origin (TREC-positive),
* ``np`` -- naive cells that have undergone peripheral proliferation,
* ``m``  -- memory cells.

The scalar kernels (``_export``, ``_death``, ``_dilution``, ``_rhs``) are
compiled with numba so the integrators in :mod:`thymodyn.sd` and
:mod:`thymodyn.agents` share one definition of the dynamics.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from numba import njit

__all__ = [
    "ModelParams",
    "StateVector",
    "ActivesTable",
    "export_modifier",
    "death_modifier",
    "dilution_modifier",
    "thymic_export_rate",
    "derivatives",
    "proliferation_rate_from_table1",
    "THYMIC_HALF_LIFE",
    "S0_DEFAULT",
]

THYMIC_HALF_LIFE = 15.7  # years
S0_DEFAULT = 56615.0  # cells mm^-3 year^-1

# Column order of the packed parameter vector consumed by the compiled kernels.
PARAM_ORDER = (
    "s0",
    "lambda_t",
    "lambda_n",
    "mu_n",
    "mu_np",
    "c",
    "lambda_mn",
    "mu_m",
    "lambda_a",
    "np_bar",
    "s_bar",
    "b",
)
(I_S0, I_LT, I_LN, I_MUN, I_MUNP, I_C, I_LMN, I_MUM, I_LA, I_NPBAR, I_SBAR, I_B) = range(12)


@dataclass(frozen=True, kw_only=True)
class ModelParams:
    """Rate constants and scaling constants of the naive T-cell model.

    Rates are per year. ``np_bar`` is in cells/mm^3; ``s_bar`` and ``b`` are
    dimensionless. The scenario-specific values (``lambda_n``, ``np_bar``,
    ``s_bar``, ``b``) have no defaults; see :mod:`thymodyn.scenarios` for the
    three presets.
    """

    lambda_n: float
    np_bar: float
    s_bar: float
    b: float
    s0: float = S0_DEFAULT
    lambda_t: float = math.log(2.0) / THYMIC_HALF_LIFE
    mu_n: float = 4.4
    mu_np: float = 0.13
    c: float = 0.0
    lambda_mn: float = 0.0
    mu_m: float = 0.05
    lambda_a: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise TypeError(f"{f.name} must be a number, got {value!r}")
            if not math.isfinite(value):
                raise ValueError(f"{f.name} must be finite, got {value!r}")
            if value < 0:
                raise ValueError(f"{f.name} must be >= 0, got {value!r}")
        if self.np_bar <= 0:
            raise ValueError(f"np_bar must be > 0, got {self.np_bar!r}")

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    def as_array(self) -> np.ndarray:
        """Pack into the float64 vector layout used by the compiled kernels."""
        return np.array([float(getattr(self, name)) for name in PARAM_ORDER], dtype=np.float64)

    def max_rate(self) -> float:
        """Largest per-capita transition rate any agent can face, in 1/year."""
        naive = self.mu_n * (1.0 + self.b) + self.lambda_n
        prolif = self.mu_np + self.c
        memory = self.mu_m + self.lambda_mn
        return max(naive, prolif, memory)


@dataclass(frozen=True)
class StateVector:
    """Stocks at time ``t`` (years), in cells/mm^3."""

    t: float
    n: float
    np: float
    m: float

    def __post_init__(self):
        for name in ("t", "n", "np", "m"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            if value < 0:
                raise ValueError(f"{name} must be >= 0, got {value!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.n, self.np, self.m], dtype=np.float64)


@dataclass(frozen=True)
class ActivesTable:
    """Activated CD4+ cells per mm^3 as a function of age.

    Lookup is piecewise linear between knots and clamped to the end values
    outside the table range. The default table is identically zero, which is
    harmless while ``lambda_a`` is 0.
    """

    ages: tuple[float, ...] = (0.0, 100.0)
    values: tuple[float, ...] = (0.0, 0.0)
    mode: str = field(default="linear")

    def __post_init__(self):
        ages = tuple(float(a) for a in self.ages)
        values = tuple(float(v) for v in self.values)
        object.__setattr__(self, "ages", ages)
        object.__setattr__(self, "values", values)
        if self.mode != "linear":
            raise ValueError(f"unsupported interpolation mode {self.mode!r}")
        if len(ages) == 0 or len(ages) != len(values):
            raise ValueError("ages and values must be non-empty and of equal length")
        if any(not math.isfinite(x) for x in ages + values):
            raise ValueError("actives table entries must be finite")
        if any(b <= a for a, b in zip(ages, ages[1:])):
            raise ValueError("actives table ages must be strictly increasing")
        if any(v < 0 for v in values):
            raise ValueError("active cell counts must be >= 0")

    def __call__(self, t: float) -> float:
        return float(np.interp(t, self.ages, self.values))

    lookup = __call__

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.ages, dtype=np.float64), np.asarray(self.values, dtype=np.float64)

    @classmethod
    def from_csv(cls, path) -> "ActivesTable":
        """Read a table with header ``age_years,active_cells_per_mm3``."""
        path = Path(path)
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["age_years", "active_cells_per_mm3"]:
                raise ValueError(f"{path}:1: expected header 'age_years,active_cells_per_mm3', got {header!r}")
            ages, values = [], []
            for lineno, row in enumerate(reader, start=2):
                if not row or all(not cell.strip() for cell in row):
                    continue
                if len(row) != 2:
                    raise ValueError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
                try:
                    ages.append(float(row[0]))
                    values.append(float(row[1]))
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: {exc}") from None
        try:
            return cls(tuple(ages), tuple(values))
        except ValueError as exc:
            raise ValueError(f"{path}: {exc}") from None

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["age_years", "active_cells_per_mm3"])
            for a, v in zip(self.ages, self.values):
                writer.writerow([repr(a), repr(v)])


# -- compiled scalar kernels ---------------------------------------------------


@njit(cache=True, inline="always")
def _export(np_, s_bar, np_bar):
    return 1.0 / (1.0 + s_bar * np_ / np_bar)


@njit(cache=True, inline="always")
def _death(np_, b, np_bar):
    x = np_ / np_bar
    return 1.0 + (b * x) / (1.0 + x)


@njit(cache=True, inline="always")
def _dilution(n, np_, np_bar):
    return 1.0 / (1.0 + (n + np_) / np_bar)


@njit(cache=True, inline="always")
def _lookup(t, ages, vals):
    # piecewise linear, clamped at both ends
    if t <= ages[0]:
        return vals[0]
    last = ages.shape[0] - 1
    if t >= ages[last]:
        return vals[last]
    i = np.searchsorted(ages, t, side="right") - 1
    w = (t - ages[i]) / (ages[i + 1] - ages[i])
    return vals[i] + w * (vals[i + 1] - vals[i])


@njit(cache=True, inline="always")
def _rhs(t, n, np_, m, p, act_ages, act_vals):
    thymus = p[I_S0] * math.exp(-p[I_LT] * t) * _export(np_, p[I_SBAR], p[I_NPBAR])
    dn = thymus - (p[I_LN] + p[I_MUN] * _death(np_, p[I_B], p[I_NPBAR])) * n
    dnp = p[I_LN] * n + (p[I_C] * _dilution(n, np_, p[I_NPBAR]) - p[I_MUNP]) * np_ + p[I_LMN] * m
    active = _lookup(t, act_ages, act_vals)
    dm = p[I_LA] * active - p[I_MUM] * m - p[I_LMN] * m
    return dn, dnp, dm


# -- public API ----------------------------------------------------------------


def export_modifier(np_: float, p: ModelParams) -> float:
    """Homeostatic reduction of thymic export, ``1 / (1 + s_bar*np/np_bar)``."""
    return float(_export(float(np_), p.s_bar, p.np_bar))


def death_modifier(np_: float, p: ModelParams) -> float:
    """Multiplier on the thymic-naive death rate; rises from 1 towards ``1 + b``."""
    return float(_death(float(np_), p.b, p.np_bar))


def dilution_modifier(n: float, np_: float, p: ModelParams) -> float:
    """Crowding factor on peripheral proliferation, ``1 / (1 + (n+np)/np_bar)``."""
    return float(_dilution(float(n), float(np_), p.np_bar))


def thymic_export_rate(t: float, np_: float, p: ModelParams) -> float:
    """Cells leaving the thymus per mm^3 per year at age ``t``."""
    return p.s0 * math.exp(-p.lambda_t * t) * export_modifier(np_, p)


def derivatives(state: StateVector, p: ModelParams, actives: ActivesTable | None = None):
    """Return ``(dN/dt, dNp/dt, dM/dt)`` for ``state``."""
    actives = actives or ActivesTable()
    ages, vals = actives.arrays()
    dn, dnp, dm = _rhs(state.t, state.n, state.np, state.m, p.as_array(), ages, vals)
    return float(dn), float(dnp), float(dm)


def proliferation_rate_from_table1(mu: float, np_bar: float) -> float:
    """Proliferation rate ``mu * (1 + 300/np_bar)``.

    With death rate ``mu`` on the proliferating pool this places the
    proliferation/death balance at ``n + np = 300`` cells/mm^3.
    """
    if np_bar <= 0:
        raise ValueError(f"np_bar must be > 0, got {np_bar!r}")
    return mu * (1.0 + 300.0 / np_bar)
