"""Independent checks: radial ODE shooting and dense sign scans.

The radial steady state solves ``u'' + (n-1)/r u' - u + f(u) = 0`` with
``u(outer) = 0``.  On a ball the solution starts from ``u(0) = a, u'(0) = 0``
via the series ``u ≈ a + (a - a³) r² / (2n)``; on an annulus from
``u(inner) = 0, u'(inner) = a``.  The scalar case bisects ``a`` on the number
of interior zeros, which jumps from ``k`` to ``k + 1`` exactly where the
terminal value crosses zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq, root

from .grid import DomainKind, RadialDomain, RadialGrid

RTOL = 1e-12
ATOL = 1e-13
ESCAPE = 1e4


class ShootingError(RuntimeError):
    pass


@dataclass
class ShotResult:
    """One integration from the start radius to the outer radius."""

    amplitude: np.ndarray
    zeros: list[int]
    terminal: np.ndarray
    sol: Callable | None
    escaped: bool = False

    r0: float = 0.0
    series: np.ndarray | None = None

    def profile(self, r) -> np.ndarray:
        """Component values at radii ``r``, shape ``(N, len(r))``.

        Radii below the start radius use the series ``a + c r²``.
        """
        r = np.atleast_1d(np.asarray(r, dtype=float))
        y = self.sol(np.maximum(r, self.r0))[: self.amplitude.size]
        if self.series is not None:
            near = r < self.r0
            y[:, near] = self.amplitude[:, None] + self.series[:, None] * r[near] ** 2
        return y


def _start(domain: RadialDomain, a: np.ndarray, beta: float):
    """Start radius, initial state and (ball only) the series coefficient."""
    n = domain.dimension
    N = a.size
    if domain.kind is DomainKind.BALL:
        r0 = 1e-5 * domain.outer_radius
        sq = a * a
        f = a * (sq + beta * (sq.sum() - sq))
        c = (a - f) / (2 * n)
        return r0, np.concatenate((a + c * r0 * r0, 2 * c * r0)), c
    return domain.inner_radius, np.concatenate((np.zeros(N), a)), None


def _rhs(n: int, beta: float, N: int):
    def rhs(r, y):
        u, du = y[:N], y[N:]
        sq = u * u
        f = u * (sq + beta * (sq.sum() - sq))
        return np.concatenate((du, -(n - 1) / r * du + u - f))
    return rhs


def shoot(domain: RadialDomain, amplitude, beta: float = -1.0, dense: bool = True) -> ShotResult:
    """Integrate the radial system from the given start amplitudes."""
    a = np.atleast_1d(np.asarray(amplitude, dtype=float))
    N = a.size
    r0, y0, series = _start(domain, a, beta)
    escape = lambda r, y: ESCAPE - np.max(np.abs(y[:N]))  # noqa: E731
    escape.terminal = True
    crossings = []
    for j in range(N):
        ev = (lambda jj: lambda r, y: y[jj])(j)
        crossings.append(ev)
    sol = solve_ivp(_rhs(domain.dimension, beta, N), (r0, domain.outer_radius), y0,
                    method="DOP853", rtol=RTOL, atol=ATOL, dense_output=dense,
                    events=[escape, *crossings])
    if sol.status == -1:
        raise ShootingError(sol.message)
    escaped = sol.status == 1
    # crossings at the end points are boundary values, not interior zeros
    R = domain.outer_radius
    lo, hi = r0 + 1e-13 * R, R * (1 - 1e-13)
    zeros = [int(np.count_nonzero((np.asarray(t) > lo) & (np.asarray(t) < hi)))
             for t in sol.t_events[1:]]
    for j in range(N):
        if a[j] == 0.0:
            zeros[j] = 0
    return ShotResult(a, zeros, sol.y[:N, -1], sol.sol if dense else None, escaped, r0, series)


@dataclass
class ScalarSolution:
    amplitude: float
    zero_count: int
    domain: RadialDomain
    shot: ShotResult = field(repr=False)

    def __call__(self, r) -> np.ndarray:
        u = self.shot.profile(r)[0]
        u = np.where(np.asarray(r) >= self.domain.outer_radius, 0.0, u)
        return u

    def on_grid(self, grid: RadialGrid) -> np.ndarray:
        u = self.shot.profile(grid.nodes)[0]
        u[~grid.free] = 0.0
        return u


def _too_many(domain: RadialDomain, a: float, k: int) -> bool:
    """Whether amplitude ``a`` overshoots: more than ``k`` interior zeros (or escape)."""
    s = shoot(domain, a, dense=False)
    return s.escaped or s.zeros[0] > k


def shoot_scalar(domain: RadialDomain, zero_count: int = 0,
                 bracket: tuple[float, float] | None = None, rel_tol: float = 1e-15) -> ScalarSolution:
    """Radial solution of ``-Δu + u = u³`` with exactly ``zero_count`` interior zeros."""
    if zero_count < 0:
        raise ValueError("zero_count must be >= 0")
    k = zero_count
    if bracket is None:
        lo, hi = 1e-3, 1.0
        while not _too_many(domain, hi, k):
            lo, hi = hi, 2 * hi
            if hi > 1e4:
                raise ShootingError("no overshooting amplitude below 1e4")
    else:
        lo, hi = bracket
        if _too_many(domain, lo, k) or not _too_many(domain, hi, k):
            raise ShootingError(f"bracket {bracket} does not straddle zero_count {k}")
    while hi - lo > 1e-6 * hi:
        mid = 0.5 * (lo + hi)
        if _too_many(domain, mid, k):
            hi = mid
        else:
            lo = mid
    # near the jump the terminal value changes sign continuously
    g = lambda a: shoot(domain, a, dense=False).terminal[0]  # noqa: E731
    s_hi = shoot(domain, hi, dense=False)
    if not s_hi.escaped and s_hi.zeros[0] == k + 1 and g(lo) * s_hi.terminal[0] < 0:
        x = brentq(g, lo, hi, xtol=rel_tol * hi, rtol=4 * np.finfo(float).eps)
        # keep the side of the root that still has k interior zeros
        for _ in range(8):
            if not _too_many(domain, x, k):
                lo = x
                break
            x = np.nextafter(x, 0.0) - rel_tol * hi
    else:
        while hi - lo > rel_tol * hi:
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi):
                break
            if _too_many(domain, mid, k):
                hi = mid
            else:
                lo = mid
    s = shoot(domain, lo)
    if s.zeros[0] != k:
        raise ShootingError(f"bisection ended with {s.zeros[0]} zeros, wanted {k}")
    return ScalarSolution(lo, k, domain, s)


@dataclass(frozen=True)
class ShootSpec:
    domain: RadialDomain
    N: int
    beta: float
    zero_counts: tuple[int, ...]
    guess: tuple[float, ...]

    def __post_init__(self):
        if not 1 <= self.N <= 3:
            raise ValueError("system shooting supports 1 <= N <= 3")
        if len(self.zero_counts) != self.N or len(self.guess) != self.N:
            raise ValueError("zero_counts and guess need N entries")
        if self.beta > -1:
            raise ValueError("beta must be <= -1")


@dataclass
class SystemSolution:
    converged: bool
    amplitudes: np.ndarray
    zeros: list[int]
    terminal: np.ndarray
    semi_trivial: bool
    message: str
    targets: list[int]
    shot: ShotResult | None = field(default=None, repr=False)

    @property
    def matches_targets(self) -> bool:
        return self.converged and self.targets == self.zeros

    def on_grid(self, grid: RadialGrid) -> np.ndarray:
        U = self.shot.profile(grid.nodes)
        U[:, ~grid.free] = 0.0
        return U


def shoot_system(spec: ShootSpec, tol: float = 1e-11) -> SystemSolution:
    """Solve for start amplitudes with vanishing terminal values (best effort)."""
    def F(a):
        s = shoot(spec.domain, a, spec.beta, dense=False)
        if s.escaped:
            return np.full(spec.N, ESCAPE)
        return s.terminal

    sol = root(F, np.asarray(spec.guess, dtype=float), method="hybr", options={"xtol": 1e-14})
    a = sol.x
    s = shoot(spec.domain, a, spec.beta)
    ok = bool(not s.escaped and np.max(np.abs(s.terminal)) < tol)
    semi = bool(np.any(np.abs(a) < 1e-12 * max(1.0, np.max(np.abs(a)))))
    msg = sol.message if ok else f"not converged: {sol.message}; terminal {np.max(np.abs(s.terminal)):.2e}"
    return SystemSolution(ok, a, s.zeros, s.terminal, semi, msg, list(spec.zero_counts), s)


def oracle_nodal_count(source, multiplier: int = 8, grid: RadialGrid | None = None,
                       domain: RadialDomain | None = None, m: int = 512) -> int:
    """Exact sign changes of a profile sampled ``multiplier`` times more densely.

    ``source`` is either a callable of radius (then ``domain`` and ``m`` fix
    the base resolution) or nodal values on ``grid``, interpolated with a
    shape-preserving cubic so the interpolant adds no spurious crossings.
    """
    if multiplier < 4:
        raise ValueError("multiplier must be >= 4")
    if callable(source):
        if domain is None:
            domain = grid.domain if grid is not None else RadialDomain.ball()
        base = grid.m if grid is not None else m
        r = np.linspace(domain.inner_radius, domain.outer_radius, base * multiplier + 1)
        v = np.asarray(source(r), dtype=float)
    else:
        if grid is None:
            raise ValueError("nodal values need their grid")
        v0 = np.asarray(source, dtype=float)
        r = np.linspace(grid.nodes[0], grid.nodes[-1], grid.m * multiplier + 1)
        v = PchipInterpolator(grid.nodes, v0)(r)
    s = np.sign(v[v != 0])
    return int(np.count_nonzero(s[1:] != s[:-1]))


def ground_state_reference(domain: RadialDomain | None = None) -> float:
    """Centre amplitude of the positive solution (unit ball, n = 3 by default)."""
    return shoot_scalar(domain or RadialDomain.ball(), 0).amplitude


__all__ = ["shoot", "shoot_scalar", "shoot_system", "ShootSpec", "ScalarSolution",
           "SystemSolution", "ShotResult", "ShootingError", "oracle_nodal_count",
           "ground_state_reference"]
