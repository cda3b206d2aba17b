"""Semi-implicit integration of the parabolic system and trajectory fates.

One step solves

    (1 + dt(-Δ + 1)) u_j^{new} = u_j (1 + dt (u_j² + β Σ_{i≠j} u_i²))

so the stiff linear part is implicit and the cubic terms are explicit.  A step
is rejected (``dt`` halved) when the energy would rise by more than
``energy_increase_tol`` or when the explicit factor is not positive.  The
positivity guard matters for nodal counting: the implicit solve is a totally
nonnegative tridiagonal inverse, so with a positive factor the discrete step
cannot create sign changes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy.linalg import solveh_banded

from .grid import DomainKind, RadialGrid, stiffness_apply, stiffness_banded
from .nodal import DEFAULT_THRESHOLD, bump_l4_norms, nodal_counts
from .system import (ProblemSpec, as_state, coupling_sums, energy, h1_norm,
                     nonlinearity, residual_norm)


class StepUnderflow(RuntimeError):
    """The step size fell below ``dt_min`` while retrying a step."""


@dataclass(frozen=True)
class FlowParams:
    dt_init: float = 1e-3
    dt_min: float = 1e-10
    dt_max: float = 0.05
    t_max: float = 200.0
    energy_increase_tol: float = 1e-12
    decay_threshold: float = 1e-6
    blowup_cap: float = 1e6
    equilibrium_residual_tol: float = 1e-8
    sample_stride: int = 10
    enforce_dissipation: bool = True
    stop_on_negative_energy: bool = True

    def __post_init__(self):
        if not 0 < self.dt_min <= self.dt_init <= self.dt_max:
            raise ValueError("need 0 < dt_min <= dt_init <= dt_max")
        if self.t_max <= 0:
            raise ValueError("t_max must be positive")
        for name in ("energy_increase_tol", "decay_threshold", "blowup_cap",
                     "equilibrium_residual_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: dict) -> "FlowParams":
        return cls(**d)


@dataclass(frozen=True)
class FlowState:
    t: float
    U: np.ndarray
    energy: float
    dt: float
    streak: int = 0
    rejections: int = 0
    last_dI: float = 0.0


def initial_state(spec: ProblemSpec, grid: RadialGrid, params: FlowParams, U0) -> FlowState:
    U = as_state(grid, U0, spec.N).copy()
    U[:, ~grid.free] = 0.0
    return FlowState(0.0, U, energy(spec, grid, U), params.dt_init)


def implicit_solve(grid: RadialGrid, dt: float, rhs: np.ndarray) -> np.ndarray:
    """Solve ``(1 + dt(-Δ + 1)) x = rhs`` row by row, Dirichlet nodes zero."""
    diag, sup = stiffness_banded(grid)
    idx = np.flatnonzero(grid.free)
    w = grid.weights[idx]
    ab = np.zeros((2, idx.size))
    ab[0, 1:] = dt * sup
    ab[1] = (1.0 + dt) * w + dt * diag
    x = solveh_banded(ab, (rhs[:, idx] * w).T, check_finite=False)
    out = np.zeros_like(rhs)
    out[:, idx] = x.T
    return out


def step(spec: ProblemSpec, grid: RadialGrid, params: FlowParams, state: FlowState) -> FlowState:
    U = state.U
    growth = U * U + spec.beta * coupling_sums(U)
    dt = state.dt
    rejected = 0
    while True:
        if dt < params.dt_min:
            raise StepUnderflow(f"dt {dt:.3e} below dt_min at t = {state.t:.6g}")
        factor = 1.0 + dt * growth
        if params.enforce_dissipation and factor.min() <= 0.0:
            dt *= 0.5
            rejected += 1
            continue
        U_new = implicit_solve(grid, dt, U * factor)
        if not np.all(np.isfinite(U_new)):
            dt *= 0.5
            rejected += 1
            continue
        with np.errstate(over="ignore", invalid="ignore"):  # near blowup; rejected below
            E_new = energy(spec, grid, U_new)
        if (params.enforce_dissipation
                and not E_new <= state.energy + params.energy_increase_tol):
            dt *= 0.5
            rejected += 1
            continue
        break
    streak = 1 if rejected else state.streak + 1
    next_dt = dt
    if streak >= 5:
        next_dt = min(1.2 * dt, params.dt_max)
        streak = 0
    return FlowState(state.t + dt, U_new, E_new, next_dt, streak,
                     state.rejections + rejected, E_new - state.energy)


def iterate(spec: ProblemSpec, grid: RadialGrid, params: FlowParams,
            state: FlowState) -> Iterator[FlowState]:
    """Successive accepted states (the initial one excluded); never stops by itself."""
    while True:
        state = step(spec, grid, params, state)
        yield state


@dataclass
class FateReport:
    fate: str
    t_final: float
    exit_time: float | None = None
    reason: str = ""
    times: list[float] = field(default_factory=list)
    energy_trace: list[tuple[float, float]] = field(default_factory=list)
    nodal_trace: list[list[int]] = field(default_factory=list)
    bump_trace: list[list[list[float]]] = field(default_factory=list)
    residual_trace: list[float] = field(default_factory=list)
    final_U: np.ndarray | None = None
    best_U: np.ndarray | None = None
    best_t: float | None = None
    best_residual: float = math.inf
    n_steps: int = 0
    n_rejections: int = 0
    max_energy_increase: float = -math.inf
    first_violation: tuple[float, float] | None = None

    @property
    def decayed(self) -> bool:
        return self.fate == "decay"


def _exit_condition(spec: ProblemSpec, counts: list[int], norms: list[list[float]],
                    rho: float) -> bool:
    targets = spec.targets()
    if all(c <= t for c, t in zip(counts, targets)) and sum(counts) < sum(targets):
        return True
    for j, t in enumerate(targets):
        comp = norms[j]
        if len(comp) < t + 1 or min(comp[: t + 1], default=0.0) <= rho:
            return True
    return False


def evolve(spec: ProblemSpec, grid: RadialGrid, params: FlowParams, U0, *,
           threshold: float = DEFAULT_THRESHOLD, exit_rho: float | None = None,
           keep_best: bool = False, max_steps: int | None = None) -> FateReport:
    """Run the flow from ``U0`` until a fate is decided.

    With ``keep_best`` the state of least residual norm is kept; when
    ``exit_rho`` is also given only states before the exit time qualify.
    """
    state = initial_state(spec, grid, params, U0)
    report = FateReport("timeout", 0.0)
    exited = False

    def sample(s: FlowState) -> None:
        report.times.append(s.t)
        report.energy_trace.append((s.t, s.energy))
        report.nodal_trace.append(nodal_counts(s.U, threshold))
        report.bump_trace.append([bump_l4_norms(grid, u, threshold) for u in s.U])

    def classify(s: FlowState) -> str | None:
        nonlocal exited
        res = residual_norm(spec, grid, s.U)
        if sampled:
            report.residual_trace.append(res)
        if exit_rho is not None and not exited:
            counts = nodal_counts(s.U, threshold)
            norms = [bump_l4_norms(grid, u, threshold) for u in s.U]
            if _exit_condition(spec, counts, norms, exit_rho):
                exited = True
                report.exit_time = s.t
        if keep_best and not exited and res < report.best_residual:
            report.best_residual, report.best_U, report.best_t = res, s.U.copy(), s.t
        if h1_norm(grid, s.U) < params.decay_threshold:
            return "decay"
        if np.max(np.abs(s.U)) > params.blowup_cap:
            report.reason = "sup norm above cap"
            return "blowup"
        if params.stop_on_negative_energy and s.energy < 0.0:
            report.reason = "negative energy"
            return "blowup"
        if res < params.equilibrium_residual_tol:
            return "persist"
        if s.t >= params.t_max:
            return "timeout"
        return None

    sampled = True
    sample(state)
    fate = classify(state)
    k = 0
    try:
        while fate is None:
            if max_steps is not None and k >= max_steps:
                fate = "timeout"
                report.reason = "max_steps"
                break
            state = step(spec, grid, params, state)
            k += 1
            report.max_energy_increase = max(report.max_energy_increase, state.last_dI)
            if state.last_dI > params.energy_increase_tol and report.first_violation is None:
                report.first_violation = (state.t, state.last_dI)
            sampled = k % params.sample_stride == 0
            if sampled:
                sample(state)
            fate = classify(state)
    except StepUnderflow as exc:
        fate = "blowup"
        report.reason = f"step underflow: {exc}"
    if not sampled:
        sample(state)
        report.residual_trace.append(residual_norm(spec, grid, state.U))
    report.fate = fate
    report.t_final = state.t
    report.final_U = state.U
    report.n_steps = k
    report.n_rejections = state.rejections
    return report


def first_bump_exit_time(report: FateReport, rho: float, spec: ProblemSpec) -> float | None:
    """Earliest sampled time with a bump of L⁴ norm ≤ ``rho`` or a state in H."""
    for t, counts, norms in zip(report.times, report.nodal_trace, report.bump_trace):
        if _exit_condition(spec, counts, norms, rho):
            return t
    return None


def bump_l4_rate(spec: ProblemSpec, grid: RadialGrid, U: np.ndarray, j: int,
                 mask: np.ndarray) -> float:
    """``4 ∫ ∂_t u_j · u_{j,q}³`` with ``∂_t u_j = Δu_j - u_j + f_j(U)``."""
    dtu = -stiffness_apply(grid, U[j]) / grid.weights - U[j] + nonlinearity(spec, U)[j]
    dtu[~grid.free] = 0.0
    uq = np.where(mask, U[j], 0.0)
    return float(4.0 * np.sum(grid.weights * dtu * uq**3))


def critical_bump_l4(grid: RadialGrid, profile: np.ndarray) -> float:
    """L⁴ norm at which ``d/dt ∫u⁴`` of an isolated single bump ``a·profile`` turns nonnegative.

    For the bump alone the rate is ``4a⁴(⟨φ³,Δφ⟩ - ∫φ⁴) + 4a⁶∫φ⁶``; repulsive
    coupling and neighbouring bumps only add nonpositive terms.
    """
    w = grid.weights
    phi = np.asarray(profile, dtype=float)
    lap = -stiffness_apply(grid, phi) / w
    lap[~grid.free] = 0.0
    a2 = (np.sum(w * phi**4) - np.sum(w * phi**3 * lap)) / np.sum(w * phi**6)
    return float(math.sqrt(a2) * np.sum(w * phi**4) ** 0.25)


def calibrate_rho(grid: RadialGrid, n_widths: int = 12, n_centers: int = 9,
                  exponents: tuple[float, ...] = (1.5, 2.0, 3.0, 5.0),
                  safety: float = 0.5) -> float:
    """``safety`` times the smallest critical L⁴ norm over a family of bumps.

    The family is ``(1 - s²)^e`` on windows from eight grid spacings up to the
    whole radial interval (on a ball also centred at the origin).  A finite
    family only bounds the true infimum from above, hence the safety factor.
    """
    a, b = grid.domain.inner_radius, grid.domain.outer_radius
    r = grid.nodes
    shapes = []
    for width in np.geomspace(8 * grid.h, b - a, n_widths):
        for c in np.linspace(a + width / 2, b - width / 2, n_centers):
            shapes.append((r - c) / (width / 2))
        if grid.domain.kind is DomainKind.BALL:
            shapes.append(r / width)
    best = math.inf
    for s in shapes:
        base = np.where(np.abs(s) < 1, 1 - s * s, 0.0)
        base[~grid.free] = 0.0
        if np.count_nonzero(base) < 3:
            continue
        for e in exponents:
            best = min(best, critical_bump_l4(grid, base**e))
    return safety * best


def write_trace_csv(report: FateReport, path) -> None:
    """Columns ``t, I, n_1..n_N, l4_j_q`` (blank where a bump is absent)."""
    N = len(report.nodal_trace[0]) if report.nodal_trace else 0
    width = [max((len(b[j]) for b in report.bump_trace), default=0) for j in range(N)]
    header = ["t", "I"] + [f"n_{j + 1}" for j in range(N)]
    header += [f"l4_{j + 1}_{q + 1}" for j in range(N) for q in range(width[j])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for (t, I), counts, bumps in zip(report.energy_trace, report.nodal_trace, report.bump_trace):
            row = [repr(t), repr(I)] + [str(c) for c in counts]
            for j in range(N):
                row += [repr(bumps[j][q]) if q < len(bumps[j]) else "" for q in range(width[j])]
            w.writerow(row)


__all__ = [
    "FlowParams", "FlowState", "FateReport", "StepUnderflow", "initial_state", "step",
    "iterate", "evolve", "first_bump_exit_time", "implicit_solve", "calibrate_rho",
    "critical_bump_l4", "bump_l4_rate", "write_trace_csv",
]
