"""Radial domains, vertex-centred grids and the conservative radial Laplacian.

A radial function on a ball or annulus in R^n (n = 2, 3) is stored by its
values at the grid radii.  Every node owns the control volume between the
neighbouring midpoints, so the quadrature weights sum to the exact volume of
the domain, and the Laplacian is the flux-form difference

    (Δu)_i = -(S u)_i / W_i,    (S u)_i = Σ_edges c_e (u_i - u_neighbour),

with ``c_e = ω r_e^{n-1} / (r_{i+1} - r_i)`` at the edge midpoint ``r_e``.
``S`` is symmetric, so Δ is self-adjoint in the weighted inner product.  On a
ball the centre node has a single outgoing edge, which is the reflection
(zero-slope) condition at r = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

MIN_NODES = 16


class DomainKind(str, Enum):
    BALL = "ball"
    ANNULUS = "annulus"


@dataclass(frozen=True)
class RadialDomain:
    kind: DomainKind
    inner_radius: float
    outer_radius: float
    dimension: int

    def __post_init__(self):
        object.__setattr__(self, "kind", DomainKind(self.kind))
        if self.dimension not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {self.dimension}")
        if not (self.outer_radius > self.inner_radius >= 0.0):
            raise ValueError("need outer_radius > inner_radius >= 0")
        if self.kind is DomainKind.BALL and self.inner_radius != 0.0:
            raise ValueError("a ball has inner_radius 0")
        if self.kind is DomainKind.ANNULUS and self.inner_radius <= 0.0:
            raise ValueError("an annulus needs inner_radius > 0")

    @classmethod
    def ball(cls, radius: float = 1.0, dimension: int = 3) -> "RadialDomain":
        return cls(DomainKind.BALL, 0.0, float(radius), dimension)

    @classmethod
    def annulus(cls, inner: float, outer: float, dimension: int = 3) -> "RadialDomain":
        return cls(DomainKind.ANNULUS, float(inner), float(outer), dimension)

    @property
    def sphere_area(self) -> float:
        """Surface measure of the unit sphere S^{n-1}."""
        return 2.0 * math.pi if self.dimension == 2 else 4.0 * math.pi

    @property
    def volume(self) -> float:
        n = self.dimension
        return self.sphere_area / n * (self.outer_radius**n - self.inner_radius**n)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "inner_radius": self.inner_radius,
            "outer_radius": self.outer_radius,
            "dimension": self.dimension,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RadialDomain":
        # a ball needs no inner radius; the dimension defaults to 3
        return cls(DomainKind(d["kind"]), float(d.get("inner_radius", 0.0)),
                   float(d["outer_radius"]), int(d.get("dimension", 3)))


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Immutable radial grid with control-volume weights.

    ``free`` marks the nodes that carry unknowns: everything except the
    Dirichlet nodes on the outer sphere (and the inner sphere of an annulus).
    """

    domain: RadialDomain
    nodes: np.ndarray
    weights: np.ndarray
    edge_coeffs: np.ndarray
    free: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return self.nodes.size - 1

    @property
    def h(self) -> float:
        """Largest node spacing."""
        return float(np.max(np.diff(self.nodes)))

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        return float(np.dot(self.weights, f * g))


def _check_size(grid: RadialGrid, field_: np.ndarray) -> np.ndarray:
    a = np.asarray(field_, dtype=float)
    if a.shape[-1] != grid.nodes.size:
        raise ValueError(
            f"field has {a.shape[-1]} nodes, grid has {grid.nodes.size}")
    return a


def build_grid(domain: RadialDomain, m: int, nodes: np.ndarray | None = None) -> RadialGrid:
    """Grid with ``m + 1`` nodes spanning the domain, uniform unless ``nodes`` is given."""
    if m < MIN_NODES:
        raise ValueError(f"m must be >= {MIN_NODES}, got {m}")
    a, b = domain.inner_radius, domain.outer_radius
    if nodes is None:
        r = np.linspace(a, b, m + 1)
    else:
        r = np.asarray(nodes, dtype=float)
        if r.size != m + 1:
            raise ValueError("nodes must have m + 1 entries")
        if not np.all(np.diff(r) > 0) or r[0] != a or r[-1] != b:
            raise ValueError("nodes must increase strictly from inner to outer radius")
    n = domain.dimension
    omega = domain.sphere_area
    mids = 0.5 * (r[1:] + r[:-1])
    faces = np.concatenate(([a], mids, [b]))
    weights = omega / n * (faces[1:] ** n - faces[:-1] ** n)
    edge_coeffs = omega * mids ** (n - 1) / np.diff(r)
    free = np.ones(m + 1, dtype=bool)
    free[-1] = False
    if domain.kind is DomainKind.ANNULUS:
        free[0] = False
    for arr in (r, weights, edge_coeffs, free):
        arr.setflags(write=False)
    return RadialGrid(domain, r, weights, edge_coeffs, free)


def graded_nodes(domain: RadialDomain, m: int, strength: float) -> np.ndarray:
    """Nodes clustered toward the Dirichlet boundaries (``strength`` in [0, 1))."""
    if not 0.0 <= strength < 1.0:
        raise ValueError("strength must lie in [0, 1)")
    xi = np.linspace(0.0, 1.0, m + 1)
    if domain.kind is DomainKind.BALL:
        s = xi + strength * (np.sin(0.5 * np.pi * xi) - xi)
    else:
        s = xi - strength * np.sin(2 * np.pi * xi) / (2 * np.pi)
    s[0], s[-1] = 0.0, 1.0
    return domain.inner_radius + (domain.outer_radius - domain.inner_radius) * s


def stiffness_apply(grid: RadialGrid, u: np.ndarray) -> np.ndarray:
    """``S u`` along the last axis (no boundary masking)."""
    flux = grid.edge_coeffs * np.diff(u, axis=-1)
    out = np.zeros_like(u, dtype=float)
    out[..., :-1] -= flux
    out[..., 1:] += flux
    return out


def dirichlet_form(grid: RadialGrid, u: np.ndarray) -> np.ndarray:
    """``u^T S u = ∫|∇u|^2`` for each leading index."""
    return np.sum(grid.edge_coeffs * np.diff(u, axis=-1) ** 2, axis=-1)


def apply_laplacian(grid: RadialGrid, field_: np.ndarray) -> np.ndarray:
    """Discrete radial Laplacian; zero at Dirichlet nodes."""
    u = _check_size(grid, field_)
    out = -stiffness_apply(grid, u) / grid.weights
    out[..., ~grid.free] = 0.0
    return out


def integrate(grid: RadialGrid, field_: np.ndarray) -> float | np.ndarray:
    """Quadrature ``∫_Ω f dx`` against the radial measure ω r^{n-1} dr."""
    f = _check_size(grid, field_)
    return f @ grid.weights


def stiffness_banded(grid: RadialGrid) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and super-diagonal of ``S`` restricted to the free nodes."""
    c = grid.edge_coeffs
    diag = np.zeros(grid.nodes.size)
    diag[:-1] += c
    diag[1:] += c
    idx = np.flatnonzero(grid.free)
    return diag[idx], -c[idx[:-1]]
