"""Randomized checks of the dynamical invariants of the discrete flow.

Every suite takes a ``numpy.random.Generator`` and returns a
``SuiteResult`` with per-trial metrics and the initial data of any
counterexample, so that a failing case can be replayed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .flow import FlowParams, FlowState, StepUnderflow, evolve, initial_state, step
from .grid import DomainKind, RadialGrid, apply_laplacian
from .nodal import bump_masks, comparison_matrix, permute_matrix
from .seed import SeedParams, build_seed, subdivide
from .system import GroupAction, ProblemSpec, apply_group_action, nonlinearity


@dataclass
class SuiteResult:
    name: str
    trials: int
    failures: list[dict] = field(default_factory=list)
    metrics: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "trials": self.trials,
                "metrics": self.metrics,
                "failures": [{k: v for k, v in f.items() if k != "U0"} for f in self.failures]}


def random_smooth_state(spec: ProblemSpec, grid: RadialGrid, rng: np.random.Generator,
                        amplitude: tuple[float, float] = (1.0, 8.0), modes: int = 6) -> np.ndarray:
    """Random combination of smooth radial modes satisfying the boundary conditions."""
    a, b = grid.domain.inner_radius, grid.domain.outer_radius
    x = (grid.nodes - a) / (b - a)
    k = np.arange(1, modes + 1)[:, None]
    if grid.domain.kind is DomainKind.BALL:
        basis = np.cos((k - 0.5) * np.pi * x)
    else:
        basis = np.sin(k * np.pi * x)
    U = np.empty((spec.N, grid.nodes.size))
    for j in range(spec.N):
        c = rng.normal(size=modes) / np.arange(1, modes + 1)
        u = c @ basis
        U[j] = rng.uniform(*amplitude) * u / np.max(np.abs(u))
    U[:, ~grid.free] = 0.0
    return U


def dissipation_suite(spec: ProblemSpec, grid: RadialGrid, params: FlowParams,
                      rng: np.random.Generator, trials: int = 100, max_steps: int = 300) -> SuiteResult:
    """Every accepted step lowers the energy up to ``energy_increase_tol``."""
    params = replace(params, stop_on_negative_energy=False)
    res = SuiteResult("dissipation", trials)
    worst = -np.inf
    steps = 0
    for k in range(trials):
        U0 = random_smooth_state(spec, grid, rng)
        rep = evolve(spec, grid, params, U0, max_steps=max_steps)
        worst = max(worst, rep.max_energy_increase)
        steps += rep.n_steps
        if rep.first_violation is not None:
            t, dI = rep.first_violation
            res.failures.append({"trial": k, "t": t, "energy_increase": dI, "U0": U0})
    res.metrics = {"max_energy_increase": worst, "accepted_steps": steps,
                   "tolerance": params.energy_increase_tol}
    return res


def monotonicity_suite(spec: ProblemSpec, grid: RadialGrid, params: FlowParams,
                       rng: np.random.Generator, trials: int = 50, max_steps: int = 300,
                       threshold: float = 1e-8) -> SuiteResult:
    """Per-component node counts never increase between sampled times."""
    params = replace(params, sample_stride=1, stop_on_negative_energy=False)
    res = SuiteResult("nodal_monotonicity", trials)
    samples = 0
    for k in range(trials):
        U0 = random_smooth_state(spec, grid, rng)
        rep = evolve(spec, grid, params, U0, max_steps=max_steps, threshold=threshold)
        trace = np.array(rep.nodal_trace)
        samples += len(trace)
        up = np.argwhere(np.diff(trace, axis=0) > 0)
        if up.size:
            i, j = up[0]
            res.failures.append({"trial": k, "t": rep.times[i + 1], "component": int(j) + 1,
                                 "before": int(trace[i, j]), "after": int(trace[i + 1, j]), "U0": U0})
    res.metrics = {"samples": samples, "threshold": threshold}
    return res


def _bump_integral(grid, u, mask):
    return float(np.sum(grid.weights[mask] * u[mask] ** 4))


def bump_identity_suite(spec: ProblemSpec, grid: RadialGrid, rng: np.random.Generator,
                         trials: int = 20, dt: float = 1e-6, warmup: int = 20,
                         rel_tol: float = 1e-4) -> SuiteResult:
    """Centred difference of ``∫|u_{j,q}|⁴`` against ``4∫∂_t u_j (u_{j,q})³``.

    ``∂_t u_j`` is the centred difference of the scheme; the PDE right-hand
    side ``Δu - u + f(U)`` is reported alongside as a second estimate.
    """
    params = FlowParams(dt_init=dt, dt_min=dt, dt_max=dt, stop_on_negative_energy=False)
    res = SuiteResult("bump_derivative_identity", trials)
    worst = worst_rhs = 0.0
    for k in range(trials):
        U0 = random_smooth_state(spec, grid, rng, amplitude=(1.0, 4.0), modes=4)
        # a few large steps smooth the data before the fine segment
        s = initial_state(spec, grid, FlowParams(dt_init=1e-4, dt_max=1e-4), U0)
        for _ in range(warmup):
            s = step(spec, grid, FlowParams(dt_init=1e-4, dt_max=1e-4), s)
        s = FlowState(0.0, s.U, s.energy, dt)
        prev = s
        mid = step(spec, grid, params, prev)
        nxt = step(spec, grid, params, mid)
        j = int(rng.integers(spec.N))
        masks = bump_masks(grid, mid.U[j])
        q = int(rng.integers(len(masks)))
        mask = masks[q][0]
        lhs = (_bump_integral(grid, nxt.U[j], mask) - _bump_integral(grid, prev.U[j], mask)) / (2 * dt)
        dtu = (nxt.U[j] - prev.U[j]) / (2 * dt)
        u = np.where(mask, mid.U[j], 0.0)
        rhs = 4.0 * float(np.sum(grid.weights * dtu * u**3))
        pde = apply_laplacian(grid, mid.U[j]) - mid.U[j] + nonlinearity(spec, mid.U)[j]
        pde[~grid.free] = 0.0
        rhs_pde = 4.0 * float(np.sum(grid.weights * pde * u**3))
        err = abs(lhs - rhs) / max(abs(rhs), 1e-300)
        err_pde = abs(lhs - rhs_pde) / max(abs(rhs_pde), 1e-300)
        worst, worst_rhs = max(worst, err), max(worst_rhs, err_pde)
        if not err < rel_tol:
            res.failures.append({"trial": k, "component": j + 1, "bump": q + 1, "lhs": lhs,
                                 "rhs": rhs, "relative_error": err, "U0": U0})
    res.metrics = {"max_relative_error": worst, "max_relative_error_pde_rhs": worst_rhs,
                   "dt": dt, "tolerance": rel_tol}
    return res


def small_bump_suite(spec: ProblemSpec, grid: RadialGrid, params: FlowParams, rho: float,
                     rng: np.random.Generator, trials: int = 20, max_steps: int = 4000) -> SuiteResult:
    """A bump started at L⁴ norm ``rho/2`` shrinks strictly and stays positive.

    ``spec`` must give some component at least two bumps.  The remaining
    bumps get random amplitudes; the tracked bump is followed until it
    disappears (node count drops), another bump blows up, or the step
    budget runs out.
    """
    targets = spec.targets()
    if max(targets) < 1:
        raise ValueError("small-bump suite needs a component with a node")
    params = replace(params, sample_stride=1, stop_on_negative_energy=False)
    part = subdivide(grid.domain, spec, 1, grid)
    res = SuiteResult("small_bump", trials)
    lifetimes = []
    for k in range(trials):
        base = SeedParams.random(spec, 1, rng, amp_range=(2.0, 12.0))
        U0 = build_seed(spec, part, base, grid)
        j = int(rng.choice([i for i, t in enumerate(targets) if t >= 1]))
        masks = bump_masks(grid, U0[j])
        q = int(rng.integers(len(masks)))
        mask = masks[q][0]
        l4 = _bump_integral(grid, U0[j], mask) ** 0.25
        U0[j, mask] *= 0.5 * rho / l4
        state = initial_state(spec, grid, params, U0)
        norms = [0.5 * rho]
        count0 = len(masks)
        failure = None
        for n in range(max_steps):
            try:
                state = step(spec, grid, params, state)
            except StepUnderflow:
                break  # another bump blew up; the observation window ends here
            m = bump_masks(grid, state.U[j])
            if len(m) != count0:
                break
            val = _bump_integral(grid, state.U[j], m[q][0]) ** 0.25
            if not (0.0 < val < norms[-1]):
                failure = {"trial": k, "component": j + 1, "bump": q + 1, "t": state.t,
                           "previous": norms[-1], "value": val, "U0": U0}
                break
            norms.append(val)
        lifetimes.append(state.t)
        if failure:
            res.failures.append(failure)
    res.metrics = {"rho": rho, "initial_l4": 0.5 * rho, "median_lifetime": float(np.median(lifetimes))}
    return res


def equivariance_suite(spec: ProblemSpec, grid: RadialGrid, params: FlowParams,
                       rng: np.random.Generator, trials: int = 20, steps: int = 5,
                       tol: float = 1e-12) -> SuiteResult:
    """``σ∘step = step∘σ`` and the comparison matrix permutes with ``σ``."""
    if spec.B < 1:
        raise ValueError("equivariance needs at least one group")
    res = SuiteResult("equivariance", trials)
    worst = 0.0
    for k in range(trials):
        U0 = random_smooth_state(spec, grid, rng, amplitude=(0.5, 4.0))
        a = GroupAction(int(rng.integers(1, spec.p)))
        s1 = initial_state(spec, grid, params, apply_group_action(a, U0, spec))
        s2 = initial_state(spec, grid, params, U0)
        for _ in range(steps):
            s1, s2 = step(spec, grid, params, s1), step(spec, grid, params, s2)
        scale = max(1.0, float(np.max(np.abs(s2.U))))
        diff = float(np.max(np.abs(s1.U - apply_group_action(a, s2.U, spec)))) / scale
        worst = max(worst, diff)
        cm = comparison_matrix(spec, grid, s2.U)
        cm_sigma = comparison_matrix(spec, grid, apply_group_action(a, s2.U, spec))
        cov = np.array_equal(cm_sigma.matrix(), permute_matrix(cm, spec, a))
        if not (diff < tol and cov and s1.t == s2.t):
            res.failures.append({"trial": k, "k": a.k, "max_difference": diff,
                                 "matrix_covariant": cov, "U0": U0})
    res.metrics = {"max_relative_difference": worst, "tolerance": tol}
    return res


__all__ = ["SuiteResult", "random_smooth_state", "dissipation_suite", "monotonicity_suite",
           "bump_identity_suite", "small_bump_suite", "equivariance_suite"]
