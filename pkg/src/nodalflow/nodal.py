"""Nodal counts, bump decomposition and pairwise difference comparisons.

Signs are read only from samples whose magnitude exceeds ``threshold`` times
the sup of the field; the count is the number of sign alternations in that
subsequence.  A node radius is the linear-interpolation zero between the two
qualifying samples that straddle it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import RadialGrid
from .system import GroupAction, ProblemSpec

DEFAULT_THRESHOLD = 1e-8


def _qualifying(u: np.ndarray, threshold: float) -> tuple[np.ndarray, np.ndarray]:
    peak = np.max(np.abs(u)) if u.size else 0.0
    if peak == 0.0:
        return np.empty(0, dtype=int), np.empty(0)
    idx = np.flatnonzero(np.abs(u) > threshold * peak)
    return idx, np.sign(u[idx])


def nodal_count(grid: RadialGrid | None, u, threshold: float = DEFAULT_THRESHOLD) -> int:
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    _, s = _qualifying(np.asarray(u, dtype=float), threshold)
    return int(np.count_nonzero(s[1:] != s[:-1]))


def nodal_counts(U: np.ndarray, threshold: float = DEFAULT_THRESHOLD) -> list[int]:
    return [nodal_count(None, u, threshold) for u in np.atleast_2d(U)]


def node_radii(grid: RadialGrid, u, threshold: float = DEFAULT_THRESHOLD) -> list[float]:
    u = np.asarray(u, dtype=float)
    idx, s = _qualifying(u, threshold)
    flips = np.flatnonzero(s[1:] != s[:-1])
    r = grid.nodes
    out = []
    for f in flips:
        i, k = idx[f], idx[f + 1]
        out.append(float(r[i] + (r[k] - r[i]) * u[i] / (u[i] - u[k])))
    return out


@dataclass(frozen=True)
class Bump:
    r_lo: float
    r_hi: float
    sign: int
    l4: float

    def to_dict(self) -> dict:
        return {"r_lo": self.r_lo, "r_hi": self.r_hi, "sign": self.sign, "l4": self.l4}


@dataclass(frozen=True)
class ComponentProfile:
    node_count: int
    node_radii: tuple[float, ...]
    bumps: tuple[Bump, ...]
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {"node_count": self.node_count, "node_radii": list(self.node_radii),
                "bumps": [b.to_dict() for b in self.bumps], "degenerate": self.degenerate}


@dataclass(frozen=True)
class NodalProfile:
    components: tuple[ComponentProfile, ...]

    @property
    def counts(self) -> list[int]:
        return [c.node_count for c in self.components]

    def to_dict(self) -> dict:
        return {"components": [c.to_dict() for c in self.components]}


def bump_masks(grid: RadialGrid, u, threshold: float = DEFAULT_THRESHOLD) -> list[tuple[np.ndarray, int]]:
    """Node masks and signs of the bumps of ``u``, innermost first.

    Bump ``q`` keeps the samples between nodes ``q-1`` and ``q`` that carry the
    sign of the bump, i.e. the indicator truncation of the definition.
    """
    u = np.asarray(u, dtype=float)
    idx, s = _qualifying(u, threshold)
    if idx.size == 0:
        return []
    radii = node_radii(grid, u, threshold)
    edges = np.concatenate(([-np.inf], radii, [np.inf]))
    flips = np.flatnonzero(s[1:] != s[:-1])
    signs = np.concatenate(([s[0]], s[flips + 1])).astype(int)
    r = grid.nodes
    out = []
    for q, sg in enumerate(signs):
        inside = (r > edges[q]) & (r < edges[q + 1])
        out.append((inside & (np.sign(u) == sg), int(sg)))
    return out


def bump_l4_norms(grid: RadialGrid, u, threshold: float = DEFAULT_THRESHOLD) -> list[float]:
    u = np.asarray(u, dtype=float)
    u4 = u**4 * grid.weights
    return [float(np.sum(u4[mask]) ** 0.25) for mask, _ in bump_masks(grid, u, threshold)]


def bump_decompose(grid: RadialGrid, u, threshold: float = DEFAULT_THRESHOLD) -> ComponentProfile:
    u = np.asarray(u, dtype=float)
    masks = bump_masks(grid, u, threshold)
    if not masks:
        return ComponentProfile(0, (), (), degenerate=True)
    radii = node_radii(grid, u, threshold)
    edges = [grid.domain.inner_radius, *radii, grid.domain.outer_radius]
    u4 = u**4 * grid.weights
    bumps = tuple(
        Bump(float(edges[q]), float(edges[q + 1]), sg, float(np.sum(u4[mask]) ** 0.25))
        for q, (mask, sg) in enumerate(masks))
    return ComponentProfile(len(radii), tuple(radii), bumps)


def nodal_profile(grid: RadialGrid, U, threshold: float = DEFAULT_THRESHOLD) -> NodalProfile:
    return NodalProfile(tuple(bump_decompose(grid, u, threshold) for u in np.atleast_2d(U)))


def pair_label(spec: ProblemSpec, i: int, j: int) -> tuple:
    """Classify the unordered pair ``i < j`` (0-based components)."""
    bi, bj = spec.group_of(i), spec.group_of(j)
    if bi is not None and bi == bj:
        d = (j - i) % spec.p
        return ("in-group", bi, min(d, spec.p - d))
    if bi is not None and bj is not None:
        return ("cross-group", bi, bj)
    if bi is not None:
        return ("group-remainder", bi, j - spec.B * spec.p)
    rb = spec.B * spec.p
    return ("remainder", i - rb, j - rb)


@dataclass
class ComparisonMatrix:
    N: int
    counts: dict[tuple[int, int], int]
    labels: dict[tuple[int, int], tuple]
    degenerate: set[tuple[int, int]] = field(default_factory=set)

    def count(self, i: int, j: int) -> int:
        return self.counts[(min(i, j), max(i, j))]

    def matrix(self) -> np.ndarray:
        """Symmetric integer matrix, ``-1`` on the (undefined) diagonal."""
        M = -np.ones((self.N, self.N), dtype=int)
        for (i, j), c in self.counts.items():
            M[i, j] = M[j, i] = c
        return M

    def to_dict(self) -> dict:
        return {"N": self.N,
                "pairs": [{"i": i + 1, "j": j + 1, "nodes": c, "label": list(self.labels[(i, j)]),
                           "degenerate": (i, j) in self.degenerate}
                          for (i, j), c in sorted(self.counts.items())]}


def comparison_matrix(spec: ProblemSpec, grid: RadialGrid, U,
                      threshold: float = DEFAULT_THRESHOLD) -> ComparisonMatrix:
    U = np.atleast_2d(np.asarray(U, dtype=float))
    counts, labels, degenerate = {}, {}, set()
    for i in range(spec.N):
        for j in range(i + 1, spec.N):
            d = U[i] - U[j]
            counts[(i, j)] = nodal_count(grid, d, threshold)
            labels[(i, j)] = pair_label(spec, i, j)
            if not np.any(d):
                degenerate.add((i, j))
    return ComparisonMatrix(spec.N, counts, labels, degenerate)


def permute_matrix(cm: ComparisonMatrix, spec: ProblemSpec, action: GroupAction) -> np.ndarray:
    """The comparison matrix ``cm`` re-indexed as it should look for ``σ^k U``."""
    perm = action.permutation(spec)
    M = cm.matrix()
    return M[np.ix_(perm, perm)]


def in_H(spec: ProblemSpec, profile: NodalProfile) -> bool:
    counts = profile.counts
    targets = spec.targets()
    if any(c > t for c, t in zip(counts, targets)):
        return False
    return sum(counts) < sum(targets)


def in_C(spec: ProblemSpec, report, j: int, q: int, eps: float) -> bool:
    """Whether bump ``q`` of component ``j`` (0-based) ever has L⁴ norm ≤ ``eps``.

    A bump that no longer exists at a sampled time counts as norm zero.
    """
    for norms in report.bump_trace:
        comp = norms[j]
        if q >= len(comp) or comp[q] <= eps:
            return True
    return False
