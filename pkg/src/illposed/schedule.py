"""Regularization schedules eps(t) and their admissibility diagnostics.

A schedule couples integration time to regularization strength: it must
be positive, strictly decreasing, and vanish as t grows, with the decay
slow enough that sup_{t/2<=s<=t} |eps'(s)| / eps(t)^2 -> 0.  The shipped
implementation is the power-law family eps(t) = c1 (c0 + t)^(-b).
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError, PreconditionError


class Schedule(abc.ABC):
    """Positive, strictly decreasing regularization strength eps(t)."""

    @abc.abstractmethod
    def eval(self, t):
        """eps(t) for t >= 0; accepts scalars or arrays."""

    @abc.abstractmethod
    def derivative(self, t):
        """d eps / dt at t >= 0 (negative); accepts scalars or arrays."""

    @abc.abstractmethod
    def invert(self, g: float) -> float:
        """The unique t >= 0 with eps(t) = g, for 0 < g <= eps(0)."""

    def sup_abs_derivative(self, lo: float, hi: float, samples: int = 513) -> float:
        """sup of |eps'(s)| over [lo, hi], by dense sampling by default."""
        ts = np.linspace(lo, hi, samples)
        return float(np.max(np.abs(self.derivative(ts))))

    def admissibility_report(self, t_grid) -> "AdmissibilityReport":
        """Numeric check of the decay conditions over an ascending grid.

        For each t reports q(t) = sup_{t/2<=s<=t} |eps'(s)| / eps(t)^2 and
        r(t) = exp(-t) / eps(t); the schedule is flagged admissible when
        both sequences strictly decrease over the tail (second half) of
        the grid.
        """
        ts = np.asarray(t_grid, dtype=float)
        if ts.ndim != 1 or ts.size == 0:
            raise PreconditionError("t_grid must be a nonempty 1-D array")
        if np.any(ts <= 0) or np.any(np.diff(ts) <= 0):
            raise PreconditionError("t_grid must be positive and strictly ascending")
        q = np.array([self.sup_abs_derivative(t / 2.0, t) * self.eval(t) ** -2.0
                      for t in ts])
        r = np.array([math.exp(-t) / self.eval(t) if t < 745.0 else 0.0
                      for t in ts])
        tail = slice(len(ts) // 2, None)
        q_ok = _decaying(q[tail])
        r_ok = _decaying(r[tail])
        return AdmissibilityReport(
            t_grid=ts, q_values=q, r_values=r,
            q_tail_decreasing=q_ok, r_tail_decreasing=r_ok,
            admissible=bool(q_ok and r_ok),
        )


def _decaying(x: np.ndarray) -> bool:
    """Strict decrease, except that a value already underflowed to zero
    counts as conclusively decayed."""
    if len(x) < 2:
        return True
    a, b = x[:-1], x[1:]
    return bool(np.all((b < a) | ((a == 0.0) & (b == 0.0))))


@dataclass(frozen=True)
class AdmissibilityReport:
    t_grid: np.ndarray
    q_values: np.ndarray
    r_values: np.ndarray
    q_tail_decreasing: bool
    r_tail_decreasing: bool
    admissible: bool

    def to_json_dict(self) -> dict:
        return {
            "t_grid": [float(t) for t in self.t_grid],
            "q_values": [float(q) for q in self.q_values],
            "r_values": [float(r) for r in self.r_values],
            "q_tail_decreasing": self.q_tail_decreasing,
            "r_tail_decreasing": self.r_tail_decreasing,
            "admissible": self.admissible,
        }


@dataclass(frozen=True)
class PowerLawSchedule(Schedule):
    """eps(t) = c1 (c0 + t)^(-b) with c0, c1 > 0 and 0 < b < 1.

    Closed-form derivative and inverse; |eps'| is decreasing, so the sup
    over [t/2, t] sits at the left endpoint.
    """

    c0: float = 1.0
    c1: float = 1.0
    b: float = 0.5

    def __post_init__(self):
        if not (self.c0 > 0 and math.isfinite(self.c0)):
            raise ConfigError(f"c0 must be positive, got {self.c0}")
        if not (self.c1 > 0 and math.isfinite(self.c1)):
            raise ConfigError(f"c1 must be positive, got {self.c1}")
        if not (0.0 < self.b < 1.0):
            raise ConfigError(f"b must lie in (0,1), got {self.b}")

    def eval(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise PreconditionError("t must be nonnegative")
        out = self.c1 * (self.c0 + t) ** (-self.b)
        return float(out) if out.ndim == 0 else out

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise PreconditionError("t must be nonnegative")
        out = -self.b * self.c1 * (self.c0 + t) ** (-self.b - 1.0)
        return float(out) if out.ndim == 0 else out

    def invert(self, g: float) -> float:
        if not (g > 0 and math.isfinite(g)):
            raise PreconditionError(f"schedule value must be positive, got {g}")
        eps0 = self.eval(0.0)
        if g > eps0:
            raise PreconditionError(
                f"schedule value {g} exceeds eps(0) = {eps0}; the root would be negative")
        log_shifted = math.log(self.c1 / g) / self.b
        if log_shifted > 709.0:
            raise NumericalError(
                f"schedule inverse overflows double precision for value {g}")
        return max(math.exp(log_shifted) - self.c0, 0.0)

    def sup_abs_derivative(self, lo: float, hi: float, samples: int = 513) -> float:
        return abs(self.derivative(lo))


def default_schedule() -> PowerLawSchedule:
    """The library default: c0 = 1, c1 = 1, b = 1/2 (so eps(0) = 1)."""
    return PowerLawSchedule(1.0, 1.0, 0.5)
