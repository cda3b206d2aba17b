"""Equilibria on the boundary of the basin of attraction of zero.

A seed direction ``d`` spans the ray ``λ d``.  Small ``λ`` decays under the
flow and large ``λ`` does not, so bisection on ``λ`` brackets the boundary.
Trajectories started just inside and just outside linger near an equilibrium
before leaving; the state of least residual is handed to a damped Newton
iteration.  When the ray only finds an equilibrium with the wrong nodal data
(typically one with a component or bump lost) a bump-balanced flow is used
instead: after every flow step each bump is rescaled so that the derivative
of the energy along every bump vanishes.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .bounds import BoundSchedule, pair_bounds, difference_lower_bound
from .flow import (FateReport, FlowParams, FlowState, StepUnderflow, evolve,
                   initial_state, step)
from .grid import RadialGrid, build_grid, stiffness_banded
from .nodal import (DEFAULT_THRESHOLD, ComparisonMatrix, NodalProfile, bump_masks,
                    comparison_matrix, nodal_profile)
from .system import (ProblemSpec, as_state, coupling_sums, energy, h1_norm, nonlinearity,
                     residual, residual_norm, weak_identity_gap)


class BracketError(RuntimeError):
    pass


class ExtractionError(RuntimeError):
    pass


class NewtonError(RuntimeError):
    pass


@dataclass(frozen=True)
class BisectionParams:
    lambda_lo: float = 0.0
    lambda_hi: float = 1.0
    lambda_tol: float = 1e-9
    max_bisections: int = 80
    handoff: float = 1e-2
    max_retries: int = 3

    def __post_init__(self):
        if not 0 <= self.lambda_lo < self.lambda_hi:
            raise ValueError("need 0 <= lambda_lo < lambda_hi")
        if not self.lambda_tol > 0 or not self.handoff > 0:
            raise ValueError("lambda_tol and handoff must be positive")
        if self.max_bisections < 1 or self.max_retries < 0:
            raise ValueError("max_bisections >= 1 and max_retries >= 0 required")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: dict) -> "BisectionParams":
        return cls(**d)


@dataclass
class BisectionResult:
    lambda_star: float
    lambda_lo: float
    lambda_hi: float
    history: list[tuple[float, str]]
    lo_report: FateReport
    hi_report: FateReport
    persist_report: FateReport | None = None


def _run(spec, grid, flow_params, U0, exit_rho, threshold):
    return evolve(spec, grid, flow_params, U0, threshold=threshold,
                  exit_rho=exit_rho, keep_best=True)


def bisect_boundary(spec: ProblemSpec, grid: RadialGrid, flow_params: FlowParams,
                    direction: np.ndarray, params: BisectionParams = BisectionParams(), *,
                    exit_rho: float | None = None, threshold: float = DEFAULT_THRESHOLD,
                    lo_report: FateReport | None = None,
                    hi_report: FateReport | None = None) -> BisectionResult:
    """Bisect the ray ``λ · direction`` between decay and non-decay.

    A trajectory that settles on a nonzero equilibrium ends the search early.
    """
    d = as_state(grid, direction, spec.N)
    lo, hi = params.lambda_lo, params.lambda_hi
    rep_lo = lo_report or _run(spec, grid, flow_params, lo * d, exit_rho, threshold)
    rep_hi = hi_report or _run(spec, grid, flow_params, hi * d, exit_rho, threshold)
    history = [(lo, rep_lo.fate), (hi, rep_hi.fate)]
    if rep_lo.fate != "decay" and rep_hi.fate != "decay":
        raise BracketError(f"neither endpoint decays (fates {rep_lo.fate}, {rep_hi.fate}); lower lambda_lo")
    if rep_lo.fate == "decay" and rep_hi.fate == "decay":
        raise BracketError("both endpoints decay; raise lambda_hi")
    if rep_lo.fate != "decay":
        raise BracketError("lambda_lo does not decay but lambda_hi does; non-monotone ray")
    if rep_hi.fate == "timeout":
        raise BracketError("fate at lambda_hi undetermined (timeout)")
    if rep_hi.fate == "persist":
        return BisectionResult(hi, lo, hi, history, rep_lo, rep_hi, rep_hi)
    for _ in range(params.max_bisections):
        if hi - lo <= params.lambda_tol:
            break
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        rep = _run(spec, grid, flow_params, mid * d, exit_rho, threshold)
        history.append((mid, rep.fate))
        if rep.fate == "decay":
            lo, rep_lo = mid, rep
        elif rep.fate == "persist":
            return BisectionResult(mid, lo, hi, history, rep_lo, rep, rep)
        elif rep.fate == "blowup":
            hi, rep_hi = mid, rep
        else:
            raise BracketError(f"fate at lambda = {mid!r} undetermined ({rep.fate}); non-monotone bracket")
    else:
        if hi - lo > params.lambda_tol:
            raise BracketError(f"bracket [{lo!r}, {hi!r}] still wider than lambda_tol "
                               f"after {params.max_bisections} bisections")
    return BisectionResult(0.5 * (lo + hi), lo, hi, history, rep_lo, rep_hi)


def find_bracket(spec: ProblemSpec, grid: RadialGrid, flow_params: FlowParams,
                 direction: np.ndarray, lam: float = 1.0, max_doublings: int = 30,
                 threshold: float = DEFAULT_THRESHOLD) -> tuple[float, float]:
    """Double or halve ``lam`` until ``[lo, hi]`` separates decay from non-decay."""
    d = as_state(grid, direction, spec.N)
    decays = lambda x: evolve(spec, grid, flow_params, x * d, threshold=threshold).fate == "decay"  # noqa: E731
    if decays(lam):
        lo = lam
        for _ in range(max_doublings):
            lam *= 2
            if not decays(lam):
                return lo, lam
            lo = lam
        raise BracketError("direction decays at every tried amplitude")
    hi = lam
    for _ in range(max_doublings):
        lam /= 2
        if decays(lam):
            return lam, hi
        hi = lam
    raise BracketError("no decaying amplitude found")


@dataclass
class Candidate:
    U: np.ndarray
    residual: float
    source: str
    lam: float | None = None
    t: float | None = None


def extract_equilibrium(spec: ProblemSpec, grid: RadialGrid, flow_params: FlowParams,
                        direction: np.ndarray, bisection: BisectionResult,
                        params: BisectionParams = BisectionParams(), *,
                        exit_rho: float | None = None,
                        threshold: float = DEFAULT_THRESHOLD) -> Candidate:
    """Least-residual state near the boundary point, re-bracketing if needed.

    Only states before the exit time count when ``exit_rho`` is given.
    """
    bis = bisection
    tol = params.lambda_tol
    for attempt in range(params.max_retries + 1):
        options = [(bis.lo_report, bis.lambda_lo), (bis.hi_report, bis.lambda_hi)]
        if bis.persist_report is not None:
            options.append((bis.persist_report, bis.lambda_star))
        rep, lam = min(options, key=lambda o: o[0].best_residual)
        if rep.best_U is not None and rep.best_residual <= params.handoff:
            return Candidate(rep.best_U, rep.best_residual, "ray", lam, rep.best_t)
        if attempt == params.max_retries:
            break
        tol = max(tol * 1e-3, 4 * np.finfo(float).eps * bis.lambda_hi)
        sub = BisectionParams(bis.lambda_lo, bis.lambda_hi, tol, params.max_bisections,
                              params.handoff, params.max_retries)
        bis = bisect_boundary(spec, grid, flow_params, direction, sub, exit_rho=exit_rho,
                              threshold=threshold, lo_report=bis.lo_report, hi_report=bis.hi_report)
    best = min(bis.lo_report.best_residual, bis.hi_report.best_residual)
    raise ExtractionError(f"no state within handoff {params.handoff:g} of equilibrium "
                          f"(best residual {best:.3e}) after {params.max_retries} retries")


def _pieces(U: np.ndarray, grid: RadialGrid, threshold: float) -> list[tuple[int, np.ndarray]]:
    out = []
    for j, u in enumerate(U):
        for mask, _ in bump_masks(grid, u, threshold):
            out.append((j, np.where(mask, u, 0.0)))
    return out


def nehari_scaling(spec: ProblemSpec, grid: RadialGrid, pieces: list[tuple[int, np.ndarray]],
                   max_iter: int = 50) -> np.ndarray | None:
    """Scale factors ``t`` with ``∂I(Σ t_k v_k)/∂t_k = 0`` for every piece, or None.

    With ``A`` the H¹ Gram matrix and ``C`` the quartic interaction matrix
    the conditions read ``(A t)_k = t_k Σ_l C_kl t_l²``.
    """
    K = len(pieces)
    if K == 0:
        return None
    w = grid.weights
    A = np.zeros((K, K))
    C = np.zeros((K, K))
    for k, (jk, vk) in enumerate(pieces):
        for l in range(k, K):
            jl, vl = pieces[l]
            if jk == jl:
                A[k, l] = A[l, k] = (np.sum(grid.edge_coeffs * np.diff(vk) * np.diff(vl))
                                     + np.sum(w * vk * vl))
                if k == l:
                    C[k, k] = np.sum(w * vk**4)
            else:
                C[k, l] = C[l, k] = spec.beta * np.sum(w * vk**2 * vl**2)
    if np.any(np.diag(C) <= 0):
        return None
    # start from the decoupled solution, which avoids the trivial root t = 0
    t = np.sqrt(np.maximum(np.diag(A), 0.0) / np.diag(C))
    for _ in range(max_iter):
        q = C @ (t * t)
        G = A @ t - t * q
        if np.max(np.abs(G)) < 1e-13 * max(1.0, np.max(np.abs(A @ t))):
            break
        J = A - np.diag(q) - 2.0 * t[:, None] * C * t[None, :]
        try:
            dt_ = np.linalg.solve(J, G)
        except np.linalg.LinAlgError:
            return None
        t = t - dt_
        if not np.all(np.isfinite(t)):
            return None
    else:
        return None
    if np.any(t <= 0):
        return None
    return t


def bump_balanced_flow(spec: ProblemSpec, grid: RadialGrid, flow_params: FlowParams,
                       U0: np.ndarray, *, tol: float = 1e-2, max_steps: int = 200_000,
                       threshold: float = DEFAULT_THRESHOLD) -> Candidate:
    """Flow steps alternated with per-bump rescaling onto ``∂I/∂t_k = 0``.

    Stops once the residual falls below ``tol``.  The nodal pattern of the
    initial state is kept: a step that changes a node count is rejected with
    a halved step size.
    """
    def project(U):
        pieces = _pieces(U, grid, threshold)
        t = nehari_scaling(spec, grid, pieces)
        if t is None:
            return U
        V = np.zeros_like(U)
        for (j, v), tk in zip(pieces, t):
            V[j] += tk * v
        return V

    U = project(as_state(grid, U0, spec.N).copy())
    counts = [len(bump_masks(grid, u, threshold)) for u in U]
    state = initial_state(spec, grid, flow_params, U)
    best = Candidate(state.U, residual_norm(spec, grid, state.U), "balanced", None, 0.0)
    for k in range(max_steps):
        res = residual_norm(spec, grid, state.U)
        if res < best.residual:
            best = Candidate(state.U, res, "balanced", None, state.t)
        if res < tol:
            return best
        if h1_norm(grid, state.U) < flow_params.decay_threshold:
            raise ExtractionError("bump-balanced flow collapsed to zero")
        try:
            nxt = step(spec, grid, flow_params, state)
        except StepUnderflow as exc:
            raise ExtractionError(f"bump-balanced flow stalled: {exc}") from exc
        V = project(nxt.U)
        if [len(bump_masks(grid, v, threshold)) for v in V] != counts:
            if state.dt / 2 < flow_params.dt_min:
                raise ExtractionError("bump-balanced flow cannot keep the nodal pattern")
            state = FlowState(state.t, state.U, state.energy, state.dt / 2, 0, state.rejections + 1)
            continue
        state = FlowState(nxt.t, V, energy(spec, grid, V), nxt.dt, nxt.streak, nxt.rejections)
    raise ExtractionError(f"bump-balanced flow did not reach residual {tol:g} "
                          f"(best {best.residual:.3e})")


def jacobian(spec: ProblemSpec, grid: RadialGrid, U: np.ndarray) -> sparse.csc_matrix:
    """Symmetric Jacobian of ``W · residual`` on the free nodes (component-major)."""
    idx = np.flatnonzero(grid.free)
    w = grid.weights[idx]
    diag, sup = stiffness_banded(grid)
    S = sparse.diags([sup, diag, sup], [-1, 0, 1])
    Uf = U[:, idx]
    cs = coupling_sums(Uf)
    beta = spec.beta
    blocks = [[None] * spec.N for _ in range(spec.N)]
    for j in range(spec.N):
        blocks[j][j] = S + sparse.diags(w * (1.0 - 3.0 * Uf[j] ** 2 - beta * cs[j]))
        for i in range(spec.N):
            if i != j:
                blocks[j][i] = sparse.diags(w * (-2.0 * beta * Uf[j] * Uf[i]))
    return sparse.bmat(blocks, format="csc")


def residual_floor(spec: ProblemSpec, grid: RadialGrid, U: np.ndarray) -> float:
    """Rounding level of ``residual_norm`` for a state stored in double precision."""
    absS = np.zeros_like(U)
    flux = grid.edge_coeffs * (np.abs(U[:, 1:]) + np.abs(U[:, :-1]))
    absS[:, :-1] += flux
    absS[:, 1:] += flux
    scale = absS / grid.weights + np.abs(U) + np.abs(nonlinearity(spec, U))
    scale[:, ~grid.free] = 0.0
    return float(np.finfo(float).eps * np.sqrt(((scale * scale) @ grid.weights).sum()))


@dataclass
class EquilibriumResult:
    spec: ProblemSpec
    grid: RadialGrid
    U: np.ndarray
    residual_norm: float
    energy: float
    nodal: NodalProfile
    comparisons: ComparisonMatrix
    converged: bool
    residual_floor: float = 0.0
    newton_history: list[float] = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    @property
    def semi_trivial(self) -> bool:
        return any(c.degenerate for c in self.nodal.components)

    def summary(self) -> dict:
        return {"residual_norm": self.residual_norm, "residual_floor": self.residual_floor,
                "energy": self.energy, "converged": self.converged,
                "node_counts": self.nodal.counts, "newton_history": self.newton_history,
                "nodal": self.nodal.to_dict(), "comparisons": self.comparisons.to_dict(),
                "comparison_matrix": self.comparisons.matrix().tolist(),
                "checks": self.checks, "provenance": self.provenance}


def _result(spec, grid, U, history, floor, converged, threshold):
    return EquilibriumResult(spec, grid, U, residual_norm(spec, grid, U), energy(spec, grid, U),
                             nodal_profile(grid, U, threshold), comparison_matrix(spec, grid, U, threshold),
                             converged, floor, history)


def assess_state(spec: ProblemSpec, grid: RadialGrid, U: np.ndarray, *, tol: float = 1e-10,
                 threshold: float = DEFAULT_THRESHOLD) -> EquilibriumResult:
    """Wrap a given state (e.g. a stored profile) as a result without iterating."""
    U = as_state(grid, U, spec.N).copy()
    U[:, ~grid.free] = 0.0
    floor = residual_floor(spec, grid, U)
    res = residual_norm(spec, grid, U)
    return _result(spec, grid, U, [res], floor, res < max(tol, 10 * floor), threshold)


def newton_refine(spec: ProblemSpec, grid: RadialGrid, U0: np.ndarray, *, tol: float = 1e-10,
                  max_iter: int = 60, threshold: float = DEFAULT_THRESHOLD,
                  collapse_tol: float = 1e-6) -> EquilibriumResult:
    """Damped Newton iteration on the discrete elliptic system.

    Steps are halved until the residual norm drops by the Armijo factor.
    The iteration stops at ``tol``, or once it stalls within a factor 10 of
    the rounding floor of the residual (which exceeds ``tol`` on fine grids).
    """
    U = as_state(grid, U0, spec.N).copy()
    U[:, ~grid.free] = 0.0
    if h1_norm(grid, U) < collapse_tol:
        raise NewtonError("initial state is the zero field")
    idx = np.flatnonzero(grid.free)
    res = residual_norm(spec, grid, U)
    history = [res]
    stalls = 0
    for _ in range(max_iter):
        floor = residual_floor(spec, grid, U)
        if res < tol:
            break
        if res < 10 * floor and stalls >= 2:
            break
        R = residual(spec, grid, U)[:, idx] * grid.weights[idx]
        try:
            delta = splu(jacobian(spec, grid, U)).solve(R.ravel()).reshape(spec.N, -1)
        except RuntimeError as exc:
            raise NewtonError(f"Jacobian solve failed: {exc}") from exc
        if not np.all(np.isfinite(delta)):
            raise NewtonError("Jacobian solve produced non-finite values")
        alpha = 1.0
        while True:
            V = U.copy()
            V[:, idx] -= alpha * delta
            new = residual_norm(spec, grid, V)
            if new <= (1 - 1e-4 * alpha) * res:
                break
            alpha *= 0.5
            if alpha < 2.0**-20:
                break
        if alpha < 2.0**-20:
            if res < 10 * floor:
                break
            raise NewtonError(f"no descent step at residual {res:.3e}")
        stalls = stalls + 1 if new > 0.5 * res else 0
        U, res = V, new
        history.append(res)
        if h1_norm(grid, U) < collapse_tol:
            raise NewtonError("iteration collapsed to the zero field")
    else:
        if res >= max(tol, 10 * residual_floor(spec, grid, U)):
            raise NewtonError(f"no convergence in {max_iter} iterations (residual {res:.3e})")
    floor = residual_floor(spec, grid, U)
    converged = res < max(tol, 10 * floor)
    if not converged:
        raise NewtonError(f"diverged: residual {res:.3e}")
    return _result(spec, grid, U, history, floor, converged, threshold)


def interpolate_state(grid: RadialGrid, U: np.ndarray, target: RadialGrid) -> np.ndarray:
    V = np.array([np.interp(target.nodes, grid.nodes, u) for u in U])
    V[:, ~target.free] = 0.0
    return V


def refine_solution(result: EquilibriumResult, factor: int = 2, **newton_kw) -> EquilibriumResult:
    """Re-solve on a grid ``factor`` times finer, starting from the interpolated solution."""
    fine = build_grid(result.grid.domain, result.grid.m * factor)
    U = interpolate_state(result.grid, result.U, fine)
    return newton_refine(result.spec, fine, U, **newton_kw)


def richardson(results: list[EquilibriumResult]) -> np.ndarray:
    """Repeated second-order extrapolation on the coarsest nodes.

    ``results`` are solutions on grids ``m, 2m, 4m, ...``; with error
    expansion in even powers of ``h`` each level removes one term.
    """
    base = results[0].grid.m
    cols = []
    for k, res in enumerate(results):
        if res.grid.m != base * 2**k:
            raise ValueError("grids must double in size")
        cols.append(res.U[:, :: 2**k])
    for level in range(1, len(cols)):
        f = 4.0**level
        cols = [(f * b - a) / (f - 1.0) for a, b in zip(cols[:-1], cols[1:])]
    return cols[0]


def refinement_ladder(result: EquilibriumResult, levels: int = 2, **newton_kw) -> list[EquilibriumResult]:
    """``result`` followed by re-solves on grids 2, 4, ... times finer."""
    out = [result]
    for _ in range(levels):
        out.append(refine_solution(out[-1], 2, **newton_kw))
    return out


@dataclass
class Check:
    name: str
    passed: bool
    value: object
    bound: object
    hard: bool = True
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "value": self.value,
                "bound": self.bound, "hard": self.hard, "detail": self.detail}


@dataclass
class CheckReport:
    checks: list[Check]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.hard)

    def failures(self, hard_only: bool = True) -> list[Check]:
        return [c for c in self.checks if not c.passed and (c.hard or not hard_only)]

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks]}


def verify_solution(spec: ProblemSpec, result: EquilibriumResult,
                    schedule: BoundSchedule | None = None, *, s: int = 1,
                    residual_tol: float = 1e-10, gap_tol: float = 1e-6,
                    bump_floor: float = 1e-3) -> CheckReport:
    """Record every nodal and identity check for a computed solution.

    In-group interval checks are soft: the desk-scale solutions are not the
    highly oscillatory ones the intervals describe.  Lower bounds for pairs
    are only required when both components are nontrivial.
    """
    checks = []
    floor = result.residual_floor
    checks.append(Check("residual", result.residual_norm < max(residual_tol, 10 * floor),
                        result.residual_norm, residual_tol,
                        detail=f"rounding floor {floor:.2e}"))
    checks.append(Check("energy_positive", result.energy > 0, result.energy, 0.0))
    targets = spec.targets()
    for j, (c, t) in enumerate(zip(result.nodal.counts, targets)):
        item = "group target" if spec.group_of(j) is not None else "remainder target"
        checks.append(Check(f"nodes_u{j + 1}", c == t, c, t, detail=item))
    gaps = weak_identity_gap(spec, result.grid, result.U)
    for j, g in enumerate(gaps):
        checks.append(Check(f"weak_gap_u{j + 1}", abs(g) < gap_tol, g, gap_tol))
    for j, comp in enumerate(result.nodal.components):
        norms = [b.l4 for b in comp.bumps]
        ok = bool(norms) and min(norms) > bump_floor
        checks.append(Check(f"bumps_u{j + 1}", ok, norms, bump_floor,
                            detail="component vanishes" if comp.degenerate else ""))
    bounds = pair_bounds(spec, s, schedule) if spec.N > 1 else []
    cm = result.comparisons
    counts = result.nodal.counts
    for pb in bounds:
        n = cm.count(pb.i, pb.j)
        name = f"diff_u{pb.i + 1}_u{pb.j + 1}"
        if pb.label[0] == "in-group":
            checks.append(Check(name + "_interval", pb.contains(n), n, [pb.lower, pb.upper],
                                hard=False, detail=pb.provenance))
            checks.append(Check(name + "_interval_x4", pb.contains(n, alternate=True), n,
                                [pb.alt_lower, pb.alt_upper], hard=False, detail=pb.provenance))
        else:
            checks.append(Check(name + "_upper", n <= pb.upper, n, pb.upper, detail=pb.provenance))
        ci, cj = result.nodal.components[pb.i], result.nodal.components[pb.j]
        if ci.degenerate or cj.degenerate:
            checks.append(Check(name + "_lower", True, n, None, hard=False,
                                detail="semi-trivial pair; lower bound not applicable"))
        else:
            lb = difference_lower_bound(counts[pb.i], counts[pb.j])
            checks.append(Check(name + "_lower", n >= lb, n, lb, detail="nonexistence bound"))
    return CheckReport(checks)


def solve_ray(spec: ProblemSpec, grid: RadialGrid, flow_params: FlowParams,
              direction: np.ndarray, params: BisectionParams = BisectionParams(), *,
              exit_rho: float | None = None, threshold: float = DEFAULT_THRESHOLD,
              newton_tol: float = 1e-10, fallback: bool = True) -> EquilibriumResult:
    """Bisection, extraction and Newton along one ray, with the balanced fallback.

    The fallback runs when the ray gives no usable candidate or when its
    Newton limit misses the nodal targets or loses a component.
    """
    t0 = time.perf_counter()
    d = as_state(grid, direction, spec.N)
    prov: dict = {"direction_h1": h1_norm(grid, d)}
    result = None
    bis = None
    try:
        bis = bisect_boundary(spec, grid, flow_params, d, params, exit_rho=exit_rho, threshold=threshold)
        prov.update(lambda_star=bis.lambda_star, lambda_lo=bis.lambda_lo, lambda_hi=bis.lambda_hi,
                    bisections=len(bis.history) - 2, fate_lo=bis.lo_report.fate,
                    fate_hi=bis.hi_report.fate, t_exit_lo=bis.lo_report.exit_time,
                    t_exit_hi=bis.hi_report.exit_time)
        cand = extract_equilibrium(spec, grid, flow_params, d, bis, params,
                                   exit_rho=exit_rho, threshold=threshold)
        prov.update(candidate_residual=cand.residual, candidate_t=cand.t, candidate_lambda=cand.lam)
        result = newton_refine(spec, grid, cand.U, tol=newton_tol, threshold=threshold)
        prov["method"] = "ray"
    except (ExtractionError, NewtonError) as exc:
        prov["ray_failure"] = str(exc)
    if result is not None:
        ok = result.nodal.counts == spec.targets() and not result.semi_trivial
        if not ok:
            prov["ray_counts"] = result.nodal.counts
            prov["ray_energy"] = result.energy
    if fallback and (result is None or prov.get("ray_counts") is not None):
        lam = bis.lambda_star if bis is not None else 1.0
        cand = bump_balanced_flow(spec, grid, flow_params, lam * d, tol=params.handoff,
                                  threshold=threshold)
        prov.update(method="balanced", candidate_residual=cand.residual, candidate_t=cand.t)
        result = newton_refine(spec, grid, cand.U, tol=newton_tol, threshold=threshold)
    if result is None:
        raise ExtractionError(prov.get("ray_failure", "no candidate"))
    prov["seconds"] = time.perf_counter() - t0
    result.provenance = prov
    return result


__all__ = [
    "BisectionParams", "BisectionResult", "BracketError", "Candidate", "Check", "CheckReport",
    "EquilibriumResult", "ExtractionError", "NewtonError", "assess_state", "bisect_boundary", "bump_balanced_flow",
    "extract_equilibrium", "find_bracket", "interpolate_state", "jacobian", "nehari_scaling",
    "newton_refine", "refine_solution", "refinement_ladder", "residual_floor", "richardson", "solve_ray",
    "verify_solution",
]
