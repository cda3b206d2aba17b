"""Initial data with prescribed nodal structure.

The radial interval is cut into ``B + R`` blocks (groups first, then the
remainder components), each block into ``P_b + 1`` (or ``Q_r + 1``) cells and
each cell into ``K`` micro-cells.  Inside a micro-cell a group component is a
phase-dependent bump

    w(θ, r) = Σ_{s=0}^{p} φ_s(θ) b_s(r)

where ``b_s`` is a polynomial bump on the s-th of ``p + 1`` equal radial slots
and ``φ_s`` is a plateau weight on the s-th of ``p + 1`` slightly overlapping
arcs of the circle.  Phases ``θ`` and ``θ + 2π/p`` never share an arc, so the two
radial profiles have disjoint supports; component ``j`` of a group uses phase
``θ + 2π j / p``.  Cells alternate in sign, giving ``P_b`` nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import RadialDomain, RadialGrid
from .nodal import DEFAULT_THRESHOLD, nodal_count
from .system import ProblemSpec

TWO_PI = 2.0 * math.pi
MIN_CELLS_PER_SLOT = 4


@dataclass(frozen=True)
class PartitionSpec:
    """Nested cut radii.

    ``block_edges`` has ``B + R + 1`` entries; ``cell_edges[i]`` splits block
    ``i``; ``micro_edges[i][c]`` splits cell ``c`` of block ``i`` into ``K``.
    """

    block_edges: tuple[float, ...]
    cell_edges: tuple[tuple[float, ...], ...]
    micro_edges: tuple[tuple[tuple[float, ...], ...], ...]

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.block_edges, self.block_edges[1:])):
            raise ValueError("block edges must increase strictly")
        for i, cells in enumerate(self.cell_edges):
            lo, hi = self.block_edges[i], self.block_edges[i + 1]
            if cells[0] != lo or cells[-1] != hi or any(b <= a for a, b in zip(cells, cells[1:])):
                raise ValueError(f"cells of block {i} are not nested in it")
            for c, micro in enumerate(self.micro_edges[i]):
                if (micro[0] != cells[c] or micro[-1] != cells[c + 1]
                        or any(b <= a for a, b in zip(micro, micro[1:]))):
                    raise ValueError(f"micro-cells of block {i}, cell {c} are not nested")

    @property
    def K(self) -> int:
        return len(self.micro_edges[0][0]) - 1

    def micro_cells(self, block: int, cell: int) -> list[tuple[float, float]]:
        e = self.micro_edges[block][cell]
        return list(zip(e[:-1], e[1:]))

    def min_micro_width(self) -> float:
        return min(b - a for blk in self.micro_edges for e in blk for a, b in zip(e, e[1:]))

    def all_cuts(self) -> list[float]:
        """Every distinct cut radius strictly inside the domain, sorted."""
        cuts = {x for blk in self.micro_edges for e in blk for x in e}
        return sorted(cuts - {self.block_edges[0], self.block_edges[-1]})

    def to_dict(self) -> dict:
        return {"block_edges": list(self.block_edges),
                "cell_edges": [list(c) for c in self.cell_edges],
                "micro_edges": [[list(m) for m in blk] for blk in self.micro_edges]}


def _split(lo: float, hi: float, k: int) -> tuple[float, ...]:
    e = np.linspace(lo, hi, k + 1)
    e[0], e[-1] = lo, hi
    return tuple(float(x) for x in e)


def subdivide(domain: RadialDomain, spec: ProblemSpec, K: int,
              grid: RadialGrid | None = None) -> PartitionSpec:
    """Equal-width nested partition; with ``grid`` every slot must span 4 grid cells."""
    if K < 1:
        raise ValueError("K must be >= 1")
    n_cells = [Pb + 1 for Pb in spec.P] + [Qr + 1 for Qr in spec.Q]
    blocks = _split(domain.inner_radius, domain.outer_radius, spec.B + spec.R)
    cells = tuple(_split(blocks[i], blocks[i + 1], n) for i, n in enumerate(n_cells))
    micro = tuple(tuple(_split(c[k], c[k + 1], K) for k in range(len(c) - 1)) for c in cells)
    part = PartitionSpec(blocks, cells, micro)
    if grid is not None:
        slots = spec.p + 1 if spec.B else 1
        need = MIN_CELLS_PER_SLOT * grid.h * slots
        if part.min_micro_width() < need * (1 - 1e-12):
            raise ValueError(
                f"micro-cell width {part.min_micro_width():.4g} cannot hold {slots} slots of "
                f"{MIN_CELLS_PER_SLOT} grid cells (h = {grid.h:.4g}); refine the grid or lower K")
    return part


def arc_overlap(p: int) -> float:
    """Overlap half-width δ of neighbouring arcs, as a fraction of the arc length.

    Phases ``2π/p`` apart stay on disjoint arcs as long as δ < 1/(2p).
    """
    return min(0.1, 0.45 / p)


def default_phase(p: int) -> float:
    """Phase at which every ``θ + 2πj/p`` sits well inside a single arc."""
    return TWO_PI / (p + 1) / (2 * p)


def _profile(s: np.ndarray, sharpness: float) -> np.ndarray:
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    out[inside] = (1.0 - s[inside] ** 2) ** sharpness
    return out


def smoothstep(x: np.ndarray) -> np.ndarray:
    """C⁴ transition from 0 (x ≤ 0) to 1 (x ≥ 1)."""
    x = np.clip(x, 0.0, 1.0)
    return x**5 * (126 + x * (-420 + x * (540 + x * (-315 + 70 * x))))


def angular_weights(theta: float, p: int) -> np.ndarray:
    """``φ_s(θ)`` for the ``p + 1`` arcs ``[sL - δL, (s+1)L + δL]`` (cyclic).

    Each weight is 1 on the core of its arc and falls smoothly to 0 across
    the overlap band of width ``2δL`` shared with the neighbouring arc.
    """
    L = TWO_PI / (p + 1)
    delta = arc_overlap(p) * L
    centres = L * (np.arange(p + 1) + 0.5)
    d = np.abs(np.mod(theta - centres + math.pi, TWO_PI) - math.pi)
    return smoothstep((0.5 * L + delta - d) / (2 * delta))


def aux_bump(r: np.ndarray, micro_cell: tuple[float, float], theta: float, p: int,
             sharpness: float = 5.0) -> np.ndarray:
    """``w(θ, ·)`` on one micro-cell, evaluated at radii ``r``."""
    if sharpness <= 4:
        raise ValueError("sharpness must exceed 4 for a C⁴ profile")
    lo, hi = micro_cell
    if not hi > lo:
        raise ValueError("empty micro-cell")
    r = np.asarray(r, dtype=float)
    phi = angular_weights(theta % TWO_PI, p)
    width = (hi - lo) / (p + 1)
    out = np.zeros_like(r)
    for s in np.flatnonzero(phi):
        c = lo + (s + 0.5) * width
        out += phi[s] * _profile((r - c) / (0.5 * width), sharpness)
    return out


def plain_bump(r: np.ndarray, micro_cell: tuple[float, float], sharpness: float = 5.0) -> np.ndarray:
    """Phase-free bump filling the whole micro-cell."""
    lo, hi = micro_cell
    return _profile((np.asarray(r, dtype=float) - 0.5 * (lo + hi)) / (0.5 * (hi - lo)), sharpness)


@dataclass(frozen=True)
class SeedParams:
    """Amplitudes and phases of a seed.

    ``group_amplitudes[b]`` has shape ``(p, P_b + 1, K)`` (component, cell,
    micro-cell), ``group_phases[b]`` shape ``(P_b + 1, K)``, and
    ``remainder_amplitudes[r]`` shape ``(Q_r + 1, K)``.
    """

    K: int
    group_amplitudes: tuple[np.ndarray, ...]
    group_phases: tuple[np.ndarray, ...]
    remainder_amplitudes: tuple[np.ndarray, ...]
    sharpness: float = 5.0

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.sharpness <= 4:
            raise ValueError("sharpness must exceed 4")
        conv = lambda arrs: tuple(np.array(a, dtype=float) for a in arrs)  # noqa: E731
        for name in ("group_amplitudes", "group_phases", "remainder_amplitudes"):
            object.__setattr__(self, name, conv(getattr(self, name)))
        for a in self.group_amplitudes + self.remainder_amplitudes:
            if np.any(a < 0) or not np.all(np.isfinite(a)):
                raise ValueError("amplitudes must be finite and >= 0")
            if a.shape[-1] != self.K:
                raise ValueError("amplitude arrays must end in a K axis")
        for t in self.group_phases:
            if np.any(t < 0) or np.any(t >= TWO_PI):
                raise ValueError("phases must lie in [0, 2π)")

    @classmethod
    def uniform(cls, spec: ProblemSpec, K: int = 1, amplitude: float = 1.0,
                phase: float | None = None, sharpness: float = 5.0) -> "SeedParams":
        theta = default_phase(spec.p) if phase is None else phase
        return cls(
            K,
            tuple(np.full((spec.p, Pb + 1, K), amplitude) for Pb in spec.P),
            tuple(np.full((Pb + 1, K), theta) for Pb in spec.P),
            tuple(np.full((Qr + 1, K), amplitude) for Qr in spec.Q),
            sharpness)

    @classmethod
    def random(cls, spec: ProblemSpec, K: int, rng: np.random.Generator,
               amp_range: tuple[float, float] = (0.5, 2.0), sharpness: float = 5.0) -> "SeedParams":
        lo, hi = amp_range
        return cls(
            K,
            tuple(rng.uniform(lo, hi, (spec.p, Pb + 1, K)) for Pb in spec.P),
            tuple(rng.uniform(0, TWO_PI, (Pb + 1, K)) for Pb in spec.P),
            tuple(rng.uniform(lo, hi, (Qr + 1, K)) for Qr in spec.Q),
            sharpness)

    def scaled(self, lam: float) -> "SeedParams":
        return SeedParams(self.K, tuple(lam * a for a in self.group_amplitudes), self.group_phases,
                          tuple(lam * a for a in self.remainder_amplitudes), self.sharpness)

    def shifted(self, dtheta: float) -> "SeedParams":
        return SeedParams(self.K, self.group_amplitudes,
                          tuple(np.mod(t + dtheta, TWO_PI) for t in self.group_phases),
                          self.remainder_amplitudes, self.sharpness)

    def check(self, spec: ProblemSpec) -> list[str]:
        """Shape mismatches and zero amplitude rows (targets cannot be met)."""
        issues = []
        if len(self.group_amplitudes) != spec.B or len(self.remainder_amplitudes) != spec.R:
            return ["number of amplitude blocks does not match B and R"]
        for b, Pb in enumerate(spec.P):
            if self.group_amplitudes[b].shape != (spec.p, Pb + 1, self.K):
                issues.append(f"group {b}: amplitude shape {self.group_amplitudes[b].shape}")
            elif self.group_phases[b].shape != (Pb + 1, self.K):
                issues.append(f"group {b}: phase shape {self.group_phases[b].shape}")
            else:
                for j, q in zip(*np.nonzero(self.group_amplitudes[b].max(axis=2) == 0)):
                    issues.append(f"component {b * spec.p + j + 1}: cell {q + 1} has zero amplitude")
        for r, Qr in enumerate(spec.Q):
            if self.remainder_amplitudes[r].shape != (Qr + 1, self.K):
                issues.append(f"remainder {r}: amplitude shape {self.remainder_amplitudes[r].shape}")
            else:
                for q in np.flatnonzero(self.remainder_amplitudes[r].max(axis=1) == 0):
                    issues.append(f"component {spec.B * spec.p + r + 1}: cell {q + 1} has zero amplitude")
        return issues

    def to_dict(self) -> dict:
        return {"K": self.K, "sharpness": self.sharpness,
                "group_amplitudes": [a.tolist() for a in self.group_amplitudes],
                "group_phases": [t.tolist() for t in self.group_phases],
                "remainder_amplitudes": [a.tolist() for a in self.remainder_amplitudes]}

    @classmethod
    def from_dict(cls, d: dict) -> "SeedParams":
        return cls(int(d["K"]), tuple(d["group_amplitudes"]), tuple(d["group_phases"]),
                   tuple(d["remainder_amplitudes"]), float(d.get("sharpness", 5.0)))


def seed_function(spec: ProblemSpec, partition: PartitionSpec,
                  params: SeedParams) -> Callable[[np.ndarray], np.ndarray]:
    """The seed as a function of radius, returning an ``(N, len(r))`` array."""
    issues = [i for i in params.check(spec) if "shape" in i or "number" in i]
    if issues:
        raise ValueError("; ".join(issues))
    if partition.K != params.K:
        raise ValueError("partition and params disagree on K")
    p = spec.p

    def evaluate(r: np.ndarray) -> np.ndarray:
        r = np.atleast_1d(np.asarray(r, dtype=float))
        U = np.zeros((spec.N, r.size))
        for b, Pb in enumerate(spec.P):
            amps, phases = params.group_amplitudes[b], params.group_phases[b]
            for q in range(Pb + 1):
                sign = 1.0 if q % 2 == 0 else -1.0
                for k, cell in enumerate(partition.micro_cells(b, q)):
                    window = (r > cell[0]) & (r < cell[1])
                    if not window.any():
                        continue
                    for j in range(p):
                        a = amps[j, q, k]
                        if a:
                            theta = phases[q, k] + TWO_PI * j / p
                            U[b * p + j, window] += sign * a * aux_bump(
                                r[window], cell, theta, p, params.sharpness)
        for rr, Qr in enumerate(spec.Q):
            blk = spec.B + rr
            for q in range(Qr + 1):
                sign = 1.0 if q % 2 == 0 else -1.0
                for k, cell in enumerate(partition.micro_cells(blk, q)):
                    a = params.remainder_amplitudes[rr][q, k]
                    if a:
                        U[spec.B * p + rr] += sign * a * plain_bump(r, cell, params.sharpness)
        return U

    return evaluate


def build_seed(spec: ProblemSpec, partition: PartitionSpec, params: SeedParams,
               grid: RadialGrid) -> np.ndarray:
    """The seed sampled on ``grid`` (Dirichlet nodes set to zero)."""
    U = seed_function(spec, partition, params)(grid.nodes)
    U[:, ~grid.free] = 0.0
    return U


def dense_nodal_count(values: np.ndarray, threshold: float = 0.0) -> int:
    """Sign changes of densely sampled values.

    Samples with ``|v| <= threshold * max|v|`` are skipped (exact zeros always).
    """
    values = np.asarray(values, dtype=float)
    peak = np.max(np.abs(values)) if values.size else 0.0
    s = np.sign(values[np.abs(values) > threshold * peak])
    return int(np.count_nonzero(s[1:] != s[:-1]))


def in_group_seed_bound(Pb: int, K: int) -> int:
    """Largest node count of an in-group difference the construction allows."""
    return 4 * (Pb + 1) * K + 1


@dataclass
class SeedInspection:
    """Node counts of a seed on the grid and on a dense sampling of its formula."""

    targets: list[int]
    grid_counts: list[int]
    dense_counts: list[int]
    differences: dict
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"targets": self.targets, "grid_counts": self.grid_counts,
                "dense_counts": self.dense_counts, "ok": self.ok,
                "differences": {f"{i + 1},{j + 1}": v for (i, j), v in self.differences.items()},
                "violations": self.violations}


def inspect_seed(spec: ProblemSpec, partition: PartitionSpec, params: SeedParams,
                 grid: RadialGrid, samples_per_slot: int = 200,
                 threshold: float = DEFAULT_THRESHOLD) -> SeedInspection:
    """Check component node counts and in-group difference counts of a seed.

    Grid counts use the thresholded sign scan; the dense counts evaluate the
    seed formula ``samples_per_slot`` times per radial slot, apply the same
    relative threshold, and must agree.
    """
    f = seed_function(spec, partition, params)
    U = build_seed(spec, partition, params, grid)
    slot = partition.min_micro_width() / (spec.p + 1 if spec.B else 1)
    a, b = grid.domain.inner_radius, grid.domain.outer_radius
    r = np.linspace(a, b, int(math.ceil(samples_per_slot * (b - a) / slot)) + 1)
    V = f(r)
    targets = spec.targets()
    grid_counts = [nodal_count(grid, u, threshold) for u in U]
    dense_counts = [dense_nodal_count(v, threshold) for v in V]
    violations = []
    for j, (t, g, d) in enumerate(zip(targets, grid_counts, dense_counts)):
        if not t == g == d:
            violations.append(f"u{j + 1}: target {t}, grid {g}, dense {d}")
    diffs = {}
    for bb, Pb in enumerate(spec.P):
        bound = in_group_seed_bound(Pb, params.K)
        for i in range(bb * spec.p, (bb + 1) * spec.p):
            for j in range(i + 1, (bb + 1) * spec.p):
                g = nodal_count(grid, U[i] - U[j], threshold)
                d = dense_nodal_count(V[i] - V[j], threshold)
                diffs[(i, j)] = {"grid": g, "dense": d, "bound": bound}
                if g != d or d > bound:
                    violations.append(f"u{i + 1}-u{j + 1}: grid {g}, dense {d}, bound {bound}")
    return SeedInspection(targets, grid_counts, dense_counts, diffs, violations)
