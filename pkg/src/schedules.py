"""Annealing schedules A(s), B(s) (GHz) and the onset-delayed linear-term schedule B'(s).

Times are in nanoseconds. The coefficient entering the dynamics is
``pi * A(s)`` (rad/ns), matching the ``pi A/h`` prefactor of the annealing
Hamiltonian with A/h in GHz.
"""

import math
from pathlib import Path
from typing import Dict, Literal, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .exceptions import ScheduleDomainError

STANDARD_COEFFICIENTS: Dict[str, float] = {
    "a1": 2.27, "a2": -8.22, "a3": 16.14, "a4": -27.59,
    "b1": 0.26, "b2": 2.46, "b3": 5.86,
}

FAST_COEFFICIENTS: Dict[str, float] = {
    "c1": 2.15, "c2": -2.66, "c3": -35.29, "c4": 143.48, "c5": 8.99, "c6": -30.63,
    "d1": -1.21, "d2": -1.24, "d3": 4.79, "d4": 3.38, "d5": 5.87,
    "a0": 5.00, "b0": 0.40,
}

_DOMAIN_SLACK = 1e-12

ArrayLike = Union[float, np.ndarray]


def _check_s(s: ArrayLike) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if np.any(s < -_DOMAIN_SLACK) or np.any(s > 1.0 + _DOMAIN_SLACK):
        raise ScheduleDomainError(f"Schedule parameter s must lie in [0, 1], got {s}")
    return np.clip(s, 0.0, 1.0)


def _unwrap(value: np.ndarray) -> ArrayLike:
    return float(value) if np.ndim(value) == 0 else value


class Schedule(BaseModel):
    """Closed-form fitted schedule (standard or fast protocol)."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["standard", "fast"] = "standard"
    coefficients: Dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="before")
    @classmethod
    def _fill_defaults(cls, data):
        if not isinstance(data, dict):
            return data
        kind = data.get("kind", "standard")
        defaults = STANDARD_COEFFICIENTS if kind == "standard" else FAST_COEFFICIENTS
        given = dict(data.get("coefficients") or {})
        unknown = set(given) - set(defaults)
        if unknown:
            raise ValueError(f"Unknown {kind} schedule coefficients: {sorted(unknown)}")
        return {**data, "coefficients": {**defaults, **given}}

    @classmethod
    def standard(cls) -> "Schedule":
        return cls(kind="standard")

    @classmethod
    def fast(cls) -> "Schedule":
        return cls(kind="fast")

    def A(self, s: ArrayLike) -> ArrayLike:
        s = _check_s(s)
        k = self.coefficients
        if self.kind == "standard":
            value = (1.0 - s) * np.exp(k["a1"] + k["a2"] * s + k["a3"] * s**2 + k["a4"] * s**3)
        else:
            f0 = self.f0(s)
            value = np.exp(
                f0 * (k["c1"] + k["c2"] * s + k["c3"] * s**3 + k["c4"] * s**4)
                + (1.0 - f0) * (k["c5"] + k["c6"] * s)
            )
        return _unwrap(value)

    def B(self, s: ArrayLike) -> ArrayLike:
        s = _check_s(s)
        k = self.coefficients
        if self.kind == "standard":
            value = k["b1"] + k["b2"] * s + k["b3"] * s**2
        else:
            value = np.exp(k["d1"] + k["d2"] * (1.0 - s) * np.tanh(k["d3"] * s**1.5) + k["d4"] * np.tanh(k["d5"] * s**2))
        return _unwrap(value)

    def f0(self, s: ArrayLike) -> ArrayLike:
        k = self.coefficients
        return 0.5 * (1.0 + np.tanh(k["a0"] * (k["b0"] - np.asarray(s, dtype=float))))


class TabulatedSchedule(BaseModel):
    """User-supplied (s, value) tables, linearly interpolated."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["tabulated"] = "tabulated"
    s_a: Tuple[float, ...]
    a_values: Tuple[float, ...]
    s_b: Tuple[float, ...]
    b_values: Tuple[float, ...]

    @model_validator(mode="after")
    def _check_tables(self) -> "TabulatedSchedule":
        for name, grid, values in (("A", self.s_a, self.a_values), ("B", self.s_b, self.b_values)):
            if len(grid) != len(values) or len(grid) < 2:
                raise ValueError(f"Table for {name} needs matching columns with at least two rows")
            if any(b <= a for a, b in zip(grid, grid[1:])):
                raise ValueError(f"Table for {name} must have strictly increasing s")
            if any(v < 0 for v in values):
                raise ValueError(f"Table for {name} has negative values")
        return self

    @classmethod
    def from_files(cls, a_path: Path, b_path: Path) -> "TabulatedSchedule":
        a = np.loadtxt(a_path, delimiter=",", ndmin=2)
        b = np.loadtxt(b_path, delimiter=",", ndmin=2)
        return cls(s_a=tuple(a[:, 0]), a_values=tuple(a[:, 1]), s_b=tuple(b[:, 0]), b_values=tuple(b[:, 1]))

    def A(self, s: ArrayLike) -> ArrayLike:
        return _unwrap(np.interp(_check_s(s), self.s_a, self.a_values))

    def B(self, s: ArrayLike) -> ArrayLike:
        return _unwrap(np.interp(_check_s(s), self.s_b, self.b_values))


AnySchedule = Union[Schedule, TabulatedSchedule]


class OnsetWindow(BaseModel):
    """Interval over which the linear-term schedule ramps from 0 to B(s). Times in ns."""

    model_config = ConfigDict(frozen=True)

    t_start: float = Field(default=0.0, ge=0.0, description="Onset start (ns)")
    t_end: float = Field(default=0.0, ge=0.0, description="Onset end (ns)")

    @model_validator(mode="after")
    def _ordered(self) -> "OnsetWindow":
        if self.t_end < self.t_start:
            raise ValueError(f"Onset window end {self.t_end} precedes start {self.t_start}")
        return self

    @classmethod
    def from_us(cls, t_start_us: float, t_end_us: float) -> "OnsetWindow":
        return cls(t_start=1e3 * t_start_us, t_end=1e3 * t_end_us)

    @classmethod
    def none(cls) -> "OnsetWindow":
        return cls(t_start=0.0, t_end=0.0)

    def factor(self, t: ArrayLike) -> ArrayLike:
        """Ratio B'(t)/B(s): 0 before the window, a quarter sine inside, 1 after."""
        t = np.asarray(t, dtype=float)
        width = self.t_end - self.t_start
        if width <= 0.0:
            # step at t_start; an empty window at t = 0 means the fields are on throughout
            value = np.where(t <= self.t_start, 0.0, 1.0) if self.t_start > 0.0 else np.ones_like(t)
        else:
            ramp = np.sin(0.5 * math.pi * np.clip((t - self.t_start) / width, 0.0, 1.0))
            value = np.where(t <= self.t_start, 0.0, ramp)
        return _unwrap(value)


def eval_A(sch: AnySchedule, s: ArrayLike) -> ArrayLike:
    """A(s)/h in GHz."""
    return sch.A(s)


def eval_B(sch: AnySchedule, s: ArrayLike) -> ArrayLike:
    """B(s)/h in GHz."""
    return sch.B(s)


def eval_B_prime(sch: AnySchedule, w: OnsetWindow, t: ArrayLike, t_a: float) -> ArrayLike:
    """Onset-modified B'(t/t_a) in GHz."""
    if t_a <= 0.0:
        raise ScheduleDomainError(f"Annealing time must be positive, got {t_a}")
    t = np.asarray(t, dtype=float)
    if np.any(t < -_DOMAIN_SLACK * t_a) or np.any(t > t_a * (1.0 + _DOMAIN_SLACK)):
        raise ScheduleDomainError(f"Time must lie in [0, {t_a}] ns")
    return _unwrap(np.asarray(w.factor(t)) * np.asarray(sch.B(t / t_a)))


def tabulate(sch: AnySchedule, points: int = 101, w: OnsetWindow = None, t_a: float = None) -> np.ndarray:
    """Rows of (s, A, B[, B']) for dumping schedule tables."""
    s = np.linspace(0.0, 1.0, points)
    columns = [s, np.asarray(sch.A(s)), np.asarray(sch.B(s))]
    if w is not None and t_a is not None:
        columns.append(np.asarray(eval_B_prime(sch, w, s * t_a, t_a)))
    return np.column_stack(columns)
