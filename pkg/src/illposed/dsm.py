"""Evolution of the regularized normal equation up to the stopping time.

The state obeys u' = -u + w(t) with w(t) = (A^T A + eps(t))^{-1} A^T f.
Two independent integrators act as mutual oracles: an exponential
integrator that evaluates the variation-of-constants form

    u(b) = e^{-(b-a)} u(a) + integral_0^{b-a} e^{-tau} w(b - tau) dtau

gap by gap with adaptive Gauss-Legendre panels, and an embedded
Dormand-Prince 5(4) pair with step-size control.  The exponential route
works in shifted exponents per gap, so stopping times far beyond the
underflow horizon of e^{-t} are handled exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .discrepancy import StoppingResult, build_profile, stop_from_profile
from .errors import (ConfigError, DimensionMismatchError, IllposedError,
                     NumericalError, PreconditionError)
from .operators import (SpectralDecomposition, _frozen, as_vector,
                        project_range_closure, regularized_normal_solve)
from .schedule import Schedule

INTEGRATORS = ("exponential_quadrature", "adaptive_runge_kutta")

# Weight e^{-tau} below e^{-60} ~ 9e-27 is droppable at double precision.
_WINDOW = 60.0
_MAX_PANEL_WIDTH = 2.0
_MAX_PANEL_DEPTH = 30
_RK_MAX_STEP = 3.0

_GL_X, _GL_W = np.polynomial.legendre.leggauss(7)
_GL_NODES = (_GL_X + 1.0) / 2.0
_GL_WEIGHTS = _GL_W / 2.0

# Null-space data below this relative mass counts as numerical dust and is
# projected away on C = 1 runs; anything larger is a genuine violation of
# the orthogonality assumption and gets rejected.
_NULL_DUST_REL = 1e-14


@dataclass(frozen=True)
class DSMConfig:
    """Integrator selection, tolerances, start state, and step budget."""

    integrator: str = "exponential_quadrature"
    relative_tolerance: float = 1e-8
    absolute_tolerance: float = 1e-12
    initial_state: np.ndarray | None = None
    max_steps: int = 10 ** 6
    trajectory_points: int = 512

    def __post_init__(self):
        if self.integrator not in INTEGRATORS:
            raise ConfigError(
                f"unknown integrator {self.integrator!r}; choose one of {INTEGRATORS}")
        if self.relative_tolerance <= 0 or self.absolute_tolerance <= 0:
            raise ConfigError("tolerances must be positive")
        if self.max_steps <= 0:
            raise ConfigError("max_steps must be positive")
        if self.trajectory_points < 2:
            raise ConfigError("trajectory_points must be at least 2")
        if self.initial_state is not None:
            object.__setattr__(self, "initial_state",
                               _frozen(as_vector(self.initial_state, "initial_state")))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States recorded along the evolution, with their data residuals."""

    times: np.ndarray
    states: np.ndarray
    residual_norms: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "times", _frozen(self.times))
        object.__setattr__(self, "states", _frozen(self.states))
        object.__setattr__(self, "residual_norms", _frozen(self.residual_norms))

    def __len__(self) -> int:
        return self.times.shape[0]

    def to_csv_rows(self, y_reference=None, include_state: bool = False):
        """Header and rows for CSV export: t, residual_norm, then the
        reference error when a reference is supplied, then optionally the
        full state.  Floats are rendered at full round-trip precision."""
        header = ["t", "residual_norm"]
        y = None
        if y_reference is not None:
            y = as_vector(y_reference, "reference solution")
            header.append("error_vs_reference")
        if include_state:
            header.extend(f"state_{i}" for i in range(self.states.shape[1]))
        rows = []
        for i, t in enumerate(self.times):
            row = [repr(float(t)), repr(float(self.residual_norms[i]))]
            if y is not None:
                row.append(repr(float(np.linalg.norm(self.states[i] - y))))
            if include_state:
                row.extend(repr(float(x)) for x in self.states[i])
            rows.append(row)
        return header, rows


@dataclass(frozen=True, eq=False)
class DSMResult:
    """Final state at the stopping time with diagnostics.

    ``w_final`` is the regularized normal-equation solution at the
    stopping regularization strength (the equilibrium the evolution
    tracks); the reference-error fields are filled when the true
    solution is known.
    """

    stopping: StoppingResult
    u_final: np.ndarray
    residual: float
    w_final: np.ndarray
    error_vs_reference: float | None = None
    tikhonov_error_vs_reference: float | None = None
    projected_null_mass: float = 0.0
    trajectory: Trajectory | None = None

    def __post_init__(self):
        object.__setattr__(self, "u_final", _frozen(self.u_final))
        object.__setattr__(self, "w_final", _frozen(self.w_final))

    def to_json_dict(self, include_solution: bool = True) -> dict:
        out = {
            "epsilon_star": self.stopping.epsilon_star,
            "t_delta": self.stopping.t_delta,
            "achieved_discrepancy": self.stopping.achieved_discrepancy,
            "iterations": self.stopping.iterations,
            "residual": self.residual,
            "projected_null_mass": self.projected_null_mass,
            "error_vs_reference": self.error_vs_reference,
            "tikhonov_error_vs_reference": self.tikhonov_error_vs_reference,
        }
        if include_solution:
            out["u_final"] = [float(x) for x in self.u_final]
        return out


class _TikhonovApplier:
    """Batched evaluation of w(eps) for a fixed decomposition and data."""

    def __init__(self, dec: SpectralDecomposition, f: np.ndarray):
        self._V = dec.right_vectors
        sigma = dec.singular_values
        self._coef = sigma * (dec.left_vectors.T @ f)
        self._lam = sigma * sigma

    def single(self, eps: float) -> np.ndarray:
        return self._V @ (self._coef / (self._lam + eps))

    def batch(self, eps: np.ndarray) -> np.ndarray:
        # returns states as columns, one per eps
        return self._V @ (self._coef[:, None] / (self._lam[:, None] + eps[None, :]))


def rhs(dec: SpectralDecomposition, schedule: Schedule, f_delta, t: float, u) -> np.ndarray:
    """Time derivative -u + w(t) of the evolution at state ``u``."""
    if t < 0:
        raise PreconditionError(f"t must be nonnegative, got {t}")
    v = as_vector(u, "state")
    if v.shape[0] != dec.cols:
        raise DimensionMismatchError(
            f"state has length {v.shape[0]}, operator has {dec.cols} columns")
    return regularized_normal_solve(dec, schedule.eval(t), f_delta) - v


def evolve(dec: SpectralDecomposition, schedule: Schedule, f_delta,
           t_end: float, cfg: DSMConfig | None = None) -> Trajectory:
    """Integrate the evolution from 0 to ``t_end`` and record the path."""
    cfg = cfg or DSMConfig()
    f = as_vector(f_delta, "data vector")
    if f.shape[0] != dec.rows:
        raise DimensionMismatchError(
            f"data vector has length {f.shape[0]}, operator has {dec.rows} rows")
    if not (t_end > 0 and math.isfinite(t_end)):
        raise PreconditionError(f"t_end must be positive and finite, got {t_end}")
    u0 = np.zeros(dec.cols) if cfg.initial_state is None else np.asarray(cfg.initial_state)
    if u0.shape[0] != dec.cols:
        raise DimensionMismatchError(
            f"initial state has length {u0.shape[0]}, operator has {dec.cols} columns")
    if cfg.integrator == "exponential_quadrature":
        return _evolve_exponential(dec, schedule, f, t_end, cfg, u0)
    return _evolve_rk(dec, schedule, f, t_end, cfg, u0)


def _report_grid(t_end: float, points: int) -> np.ndarray:
    if t_end <= 2.0 or points < 4:
        return np.linspace(0.0, t_end, max(2, min(points, 65)))
    interior = np.geomspace(1.0, t_end, points - 1)
    interior[-1] = t_end
    return np.unique(np.concatenate([[0.0], interior]))


class _StepBudget:
    def __init__(self, limit: int):
        self.limit = limit
        self.used = 0

    def charge(self, amount: int = 1) -> None:
        self.used += amount
        if self.used > self.limit:
            raise _BudgetExceeded()


class _BudgetExceeded(Exception):
    pass


def _finalize_trajectory(dec: SpectralDecomposition, f: np.ndarray,
                         times, states) -> Trajectory:
    ts = np.asarray(times, dtype=float)
    st = np.asarray(states, dtype=float)
    pred = (st @ dec.right_vectors * dec.singular_values) @ dec.left_vectors.T
    res = np.linalg.norm(pred - f, axis=1)
    return Trajectory(times=ts, states=st, residual_norms=res)


def _evolve_exponential(dec, schedule, f, t_end, cfg, u0) -> Trajectory:
    app = _TikhonovApplier(dec, f)
    times = _report_grid(t_end, cfg.trajectory_points)
    budget = _StepBudget(cfg.max_steps)
    states = [u0]
    u = u0
    try:
        for a, b in zip(times[:-1], times[1:]):
            gap = b - a
            window = min(gap, _WINDOW)
            scale = float(np.linalg.norm(app.single(schedule.eval(b))))
            tol = max(cfg.absolute_tolerance, cfg.relative_tolerance * scale)
            integral = _gap_integral(app, schedule, b, window, tol, budget)
            u = math.exp(-gap) * u + integral
            if not np.all(np.isfinite(u)):
                raise NumericalError(
                    "integration diverged",
                    trajectory=_finalize_trajectory(dec, f, times[:len(states)], states))
            states.append(u)
    except _BudgetExceeded:
        raise NumericalError(
            f"max_steps = {cfg.max_steps} exceeded at t = {times[len(states) - 1]}",
            trajectory=_finalize_trajectory(dec, f, times[:len(states)], states)) from None
    return _finalize_trajectory(dec, f, times, states)


def _gap_integral(app, schedule, t_right: float, window: float, tol: float,
                  budget: _StepBudget) -> np.ndarray:
    """integral_0^window e^{-tau} w(t_right - tau) dtau, adaptively."""
    n_panels = max(1, int(math.ceil(window / _MAX_PANEL_WIDTH)))
    edges = np.linspace(0.0, window, n_panels + 1)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        coarse = _gl_panel(app, schedule, t_right, lo, hi, budget)
        total = total + _refine_panel(app, schedule, t_right, lo, hi, coarse,
                                      tol * (hi - lo) / window, 0, budget)
    return total


def _refine_panel(app, schedule, t_right, lo, hi, coarse, tol, depth, budget):
    mid = 0.5 * (lo + hi)
    left = _gl_panel(app, schedule, t_right, lo, mid, budget)
    right = _gl_panel(app, schedule, t_right, mid, hi, budget)
    fine = left + right
    err = float(np.linalg.norm(fine - coarse))
    if err <= tol or depth >= _MAX_PANEL_DEPTH:
        return fine
    return (_refine_panel(app, schedule, t_right, lo, mid, left, tol / 2, depth + 1, budget)
            + _refine_panel(app, schedule, t_right, mid, hi, right, tol / 2, depth + 1, budget))


def _gl_panel(app, schedule, t_right, lo, hi, budget) -> np.ndarray:
    budget.charge()
    width = hi - lo
    tau = lo + width * _GL_NODES
    s = np.maximum(t_right - tau, 0.0)
    eps = np.asarray(schedule.eval(s), dtype=float)
    w = app.batch(eps)
    weights = _GL_WEIGHTS * width * np.exp(-tau)
    return w @ weights


# Dormand-Prince 5(4) tableau; the 5th-order solution propagates and the
# first stage is the last stage of the previous step (FSAL).
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
                   187 / 2100, 1 / 40])
_DP_ERR = _DP_B5 - _DP_B4


def _evolve_rk(dec, schedule, f, t_end, cfg, u0) -> Trajectory:
    app = _TikhonovApplier(dec, f)

    def deriv(t: float, u: np.ndarray) -> np.ndarray:
        return app.single(float(schedule.eval(t))) - u

    times = [0.0]
    states = [u0]
    cap = cfg.trajectory_points

    def record(t, u):
        times.append(t)
        states.append(u)
        if len(times) > 4 * cap:
            del times[1:-1:2]
            del states[1:-1:2]

    t, u = 0.0, u0
    h = min(0.01, t_end)
    k = [np.empty_like(u0) for _ in range(7)]
    k[0] = deriv(t, u)
    steps = 0
    while t < t_end:
        steps += 1
        if steps > cfg.max_steps:
            raise NumericalError(
                f"max_steps = {cfg.max_steps} exceeded at t = {t}",
                trajectory=_finalize_trajectory(dec, f, times, states))
        h = min(h, t_end - t)
        final = h == t_end - t
        for i in range(1, 7):
            incr = sum(aij * k[j] for j, aij in enumerate(_DP_A[i]))
            k[i] = deriv(t + _DP_C[i] * h, u + h * incr)
        u_new = u + h * sum(b * k[j] for j, b in enumerate(_DP_B5) if b != 0.0)
        err_vec = h * sum(e * k[j] for j, e in enumerate(_DP_ERR) if e != 0.0)
        scale = cfg.absolute_tolerance + cfg.relative_tolerance * max(
            float(np.linalg.norm(u)), float(np.linalg.norm(u_new)))
        err = float(np.linalg.norm(err_vec)) / scale
        if not math.isfinite(err):
            raise NumericalError(
                "integration diverged",
                trajectory=_finalize_trajectory(dec, f, times, states))
        if err <= 1.0:
            t = t_end if final else t + h
            u = u_new
            k[0] = k[6]
            record(t, u)
            factor = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            h = min(h * factor, _RK_MAX_STEP)
        else:
            # rejected: t, u unchanged, so the FSAL stage k[0] stays valid
            h *= max(0.2, 0.9 * err ** -0.2)
            if h < 1e-14 * max(t, 1.0):
                raise NumericalError(
                    "step size underflow",
                    trajectory=_finalize_trajectory(dec, f, times, states))
    idx = np.unique(np.round(np.linspace(0, len(times) - 1, cap)).astype(int))
    return _finalize_trajectory(dec, f, [times[i] for i in idx],
                                [states[i] for i in idx])


def run_dsm(dec: SpectralDecomposition, schedule: Schedule, f_delta,
            delta: float, C: float = 1.0, cfg: DSMConfig | None = None,
            y_reference=None, store_trajectory: bool = True) -> DSMResult:
    """Full pipeline: profile, discrepancy root, stopping time, evolution.

    On C = 1 runs against a rank-deficient operator the data must be
    orthogonal to the adjoint's null space; numerically tiny residue is
    projected away and reported in ``projected_null_mass``, anything
    larger is rejected (use C > 1 for data with genuine null-space
    content).
    """
    cfg = cfg or DSMConfig()
    f = as_vector(f_delta, "data vector")

    with _stage("projection"):
        profile = build_profile(dec, f)
        f_used = f
        projected_null = 0.0
        if C == 1.0 and dec.numerical_rank < dec.rows:
            if profile.null_mass > _NULL_DUST_REL * profile.data_norm_sq:
                raise PreconditionError(
                    "data has null-space component; project f_delta or increase C")
            f_used, projected_null = project_range_closure(dec, f)
            profile = build_profile(dec, f_used)

    with _stage("discrepancy"):
        stopping = stop_from_profile(profile, schedule, delta, C)

    with _stage("integration"):
        if stopping.t_delta == 0.0:
            u0 = np.zeros(dec.cols) if cfg.initial_state is None else np.asarray(cfg.initial_state)
            trajectory = _finalize_trajectory(dec, f_used, [0.0], [u0])
        else:
            trajectory = evolve(dec, schedule, f_used, stopping.t_delta, cfg)

    u_final = trajectory.states[-1]
    residual = float(trajectory.residual_norms[-1])
    w_final = regularized_normal_solve(dec, stopping.epsilon_star, f_used)

    error = tikh_error = None
    if y_reference is not None:
        y = as_vector(y_reference, "reference solution")
        error = float(np.linalg.norm(u_final - y))
        tikh_error = float(np.linalg.norm(w_final - y))

    return DSMResult(stopping=stopping, u_final=u_final, residual=residual,
                     w_final=w_final, error_vs_reference=error,
                     tikhonov_error_vs_reference=tikh_error,
                     projected_null_mass=projected_null,
                     trajectory=trajectory if store_trajectory else None)


class _stage:
    """Tag escaping library errors with the pipeline stage that failed."""

    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if isinstance(exc, IllposedError) and exc.stage is None:
            exc.stage = self.name
        return False
