"""The coupled cubic system, its energy, residual and the cyclic group action.

A state ``U`` is an ``(N, m + 1)`` float array: one row per component,
sampled at the grid nodes, with zeros at the Dirichlet nodes.

    I(U) = ½ Σ_j ∫ |∇u_j|² + u_j²  -  ¼ Σ_j ∫ u_j⁴  -  ¼ β Σ_{i≠j} ∫ u_i² u_j²

and the residual ``-Δu_j + u_j - u_j³ - β u_j Σ_{i≠j} u_i²`` is the gradient of
``I`` in the quadrature inner product.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import RadialDomain, RadialGrid, dirichlet_form, stiffness_apply


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    return all(p % d for d in range(2, int(p**0.5) + 1))


@dataclass(frozen=True)
class ProblemSpec:
    """Component layout ``N = B p + R`` with nodal targets per group/remainder.

    ``B = 0`` is accepted for remainder-only layouts (the scalar case N = 1).
    """

    N: int
    beta: float
    p: int
    B: int
    R: int
    P: tuple[int, ...]
    Q: tuple[int, ...]
    domain: RadialDomain = field(default_factory=RadialDomain.ball)

    def __post_init__(self):
        object.__setattr__(self, "P", tuple(int(x) for x in self.P))
        object.__setattr__(self, "Q", tuple(int(x) for x in self.Q))
        if not is_prime(self.p):
            raise ValueError(f"p = {self.p} is not prime")
        if self.B < 0 or self.R < 0:
            raise ValueError("B and R must be nonnegative")
        if self.N != self.B * self.p + self.R or self.N < 1:
            raise ValueError(f"N = {self.N} != B p + R = {self.B * self.p + self.R}")
        if self.beta > -1:
            raise ValueError(f"beta must be <= -1, got {self.beta}")
        if len(self.P) != self.B or len(self.Q) != self.R:
            raise ValueError("need len(P) == B and len(Q) == R")
        if any(x < 0 for x in self.P + self.Q):
            raise ValueError("nodal targets must be nonnegative")

    @classmethod
    def scalar(cls, zero_count: int = 0, domain: RadialDomain | None = None) -> "ProblemSpec":
        return cls(1, -1.0, 2, 0, 1, (), (zero_count,), domain or RadialDomain.ball())

    def targets(self) -> list[int]:
        """Prescribed node count for every component, in component order."""
        out = [Pb for Pb in self.P for _ in range(self.p)]
        return out + list(self.Q)

    def group_of(self, j: int) -> int | None:
        """Group index ``b`` (0-based) of component ``j``, or None for remainder."""
        return j // self.p if j < self.B * self.p else None

    def to_dict(self) -> dict:
        return {"N": self.N, "beta": self.beta, "p": self.p, "B": self.B, "R": self.R,
                "P": list(self.P), "Q": list(self.Q), "domain": self.domain.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemSpec":
        return cls(int(d["N"]), float(d["beta"]), int(d["p"]), int(d["B"]), int(d["R"]),
                   tuple(d["P"]), tuple(d["Q"]), RadialDomain.from_dict(d["domain"]))


def as_state(grid: RadialGrid, U, N: int | None = None) -> np.ndarray:
    a = np.atleast_2d(np.asarray(U, dtype=float))
    if a.shape[-1] != grid.nodes.size:
        raise ValueError(f"state has {a.shape[-1]} nodes, grid has {grid.nodes.size}")
    if N is not None and a.shape[0] != N:
        raise ValueError(f"state has {a.shape[0]} components, expected {N}")
    return a


def coupling_sums(U: np.ndarray) -> np.ndarray:
    """``Σ_{i≠j} u_i²`` for every ``j``."""
    sq = U * U
    return sq.sum(axis=0) - sq


def energy(spec: ProblemSpec, grid: RadialGrid, U) -> float:
    U = as_state(grid, U, spec.N)
    w = grid.weights
    sq = U * U
    quad = 0.5 * (dirichlet_form(grid, U).sum() + (sq @ w).sum())
    quartic = 0.25 * ((sq * sq) @ w).sum()
    coupling = 0.25 * spec.beta * ((sq * coupling_sums(U)) @ w).sum()
    return float(quad - quartic - coupling)


def nonlinearity(spec: ProblemSpec, U: np.ndarray) -> np.ndarray:
    """``u_j³ + β u_j Σ_{i≠j} u_i²``."""
    return U * (U * U + spec.beta * coupling_sums(U))


def residual(spec: ProblemSpec, grid: RadialGrid, U) -> np.ndarray:
    U = as_state(grid, U, spec.N)
    r = stiffness_apply(grid, U) / grid.weights + U - nonlinearity(spec, U)
    r[:, ~grid.free] = 0.0
    return r


def residual_norm(spec: ProblemSpec, grid: RadialGrid, U) -> float:
    r = residual(spec, grid, U)
    return float(np.sqrt(((r * r) @ grid.weights).sum()))


def h1_norm(grid: RadialGrid, U: np.ndarray) -> float:
    return float(np.sqrt(dirichlet_form(grid, U).sum() + ((U * U) @ grid.weights).sum()))


def weak_identity_gap(spec: ProblemSpec, grid: RadialGrid, U) -> list[float]:
    """``∫|∇u_j|² + u_j² - ∫u_j⁴ - β Σ_{i≠j} ∫u_j² u_i²`` for each component."""
    U = as_state(grid, U, spec.N)
    w = grid.weights
    sq = U * U
    gaps = dirichlet_form(grid, U) + sq @ w - (sq * sq) @ w - spec.beta * ((sq * coupling_sums(U)) @ w)
    return [float(g) for g in gaps]


@dataclass(frozen=True)
class GroupAction:
    """``σ^k``: cyclic shift by ``k`` inside every group of ``p`` components."""

    k: int

    def permutation(self, spec: ProblemSpec) -> np.ndarray:
        """Index array ``perm`` with ``(σ^k U)[i] = U[perm[i]]``."""
        p = spec.p
        perm = np.arange(spec.N)
        for b in range(spec.B):
            base = b * p
            perm[base:base + p] = base + (np.arange(p) + self.k) % p
        return perm


def apply_group_action(a: GroupAction, U: np.ndarray, spec: ProblemSpec) -> np.ndarray:
    U = np.asarray(U)
    return U[a.permutation(spec)].copy()
