"""Integer bounds on nodal counts of component differences.

Everything here is exact integer arithmetic (Python ints never overflow).
``K_s`` is the recursive sequence that brackets the nodes of in-group
differences for the s-th solution; the remaining bounds cover pairs taken
from different groups or from the remainder.
"""

from __future__ import annotations

from dataclasses import dataclass

from .nodal import pair_label
from .system import ProblemSpec, is_prime


@dataclass(frozen=True)
class BoundSchedule:
    """``K_1 .. K_{s_max}`` for a group layout ``(p, B, P)``."""

    p: int
    B: int
    P: tuple[int, ...]
    K: tuple[int, ...]

    def __post_init__(self):
        if any(k <= 0 for k in self.K) or any(b <= a for a, b in zip(self.K, self.K[1:])):
            raise ValueError("K must be positive and strictly increasing")

    @property
    def s_max(self) -> int:
        return len(self.K)

    def k(self, s: int) -> int:
        """``K_s`` with 1-based ``s``."""
        return self.K[s - 1]

    def to_dict(self) -> dict:
        return {"p": self.p, "B": self.B, "P": list(self.P), "K": list(self.K)}


def ks_sequence(p: int, B: int, P, s_max: int = 2) -> BoundSchedule:
    """The recursion

        K_1 = 8p(p+1) Σ(P_b+1) + 5Bp²
        K_{s+1} = 8(p-1)² Σ(P_b+1) K_s + 5B(p-1)² + (p-1) Σ(P_b+1) + 1
    """
    P = tuple(int(x) for x in P)
    if not is_prime(p):
        raise ValueError(f"p = {p} is not prime")
    if B < 1 or len(P) != B or any(x < 0 for x in P):
        raise ValueError("need B >= 1 and B nonnegative targets P_b")
    if s_max < 1:
        raise ValueError("s_max must be >= 1")
    S = sum(x + 1 for x in P)
    ks = [8 * p * (p + 1) * S + 5 * B * p * p]
    while len(ks) < s_max:
        ks.append(8 * (p - 1) ** 2 * S * ks[-1] + 5 * B * (p - 1) ** 2 + (p - 1) * S + 1)
    return BoundSchedule(p, B, P, tuple(ks))


@dataclass(frozen=True)
class PairBounds:
    """Bounds on ``n(u_i - u_j)`` for one unordered pair (0-based indices).

    ``alt_lower``/``alt_upper`` hold the in-group interval with the extra
    factor 4 on ``(P_b+1)K``; they are None for other pairs.
    """

    i: int
    j: int
    label: tuple
    provenance: str
    lower: int | None = None
    upper: int | None = None
    alt_lower: int | None = None
    alt_upper: int | None = None

    def __post_init__(self):
        for lo, hi in ((self.lower, self.upper), (self.alt_lower, self.alt_upper)):
            if lo is not None and hi is not None and lo > hi:
                raise ValueError("lower bound exceeds upper bound")

    def contains(self, n: int, alternate: bool = False) -> bool:
        lo, hi = (self.alt_lower, self.alt_upper) if alternate else (self.lower, self.upper)
        return (lo is None or n >= lo) and (hi is None or n <= hi)

    def to_dict(self) -> dict:
        return {"i": self.i + 1, "j": self.j + 1, "label": list(self.label),
                "provenance": self.provenance, "lower": self.lower, "upper": self.upper,
                "alt_lower": self.alt_lower, "alt_upper": self.alt_upper}


def in_group_interval(Pb: int, schedule: BoundSchedule, s: int, scale: int = 1) -> tuple[int, int]:
    """``[(P_b+1) c K_s + 2, (P_b+1) c K_{s+1} + 1]`` with ``c = scale``."""
    if not 1 <= s < schedule.s_max:
        raise ValueError(f"schedule must cover s + 1 = {s + 1}")
    return ((Pb + 1) * scale * schedule.k(s) + 2, (Pb + 1) * scale * schedule.k(s + 1) + 1)


def cross_upper_bound(spec: ProblemSpec, label: tuple) -> int:
    kind, x, y = label
    if kind == "cross-group":
        return spec.P[x] + spec.P[y] + 1
    if kind == "group-remainder":
        return spec.P[x] + spec.Q[y] + 1
    if kind == "remainder":
        return spec.Q[x] + spec.Q[y] + 1
    raise ValueError(f"no cross bound for {kind} pairs")


_PROVENANCE = {"in-group": "in-group interval", "cross-group": "cross-group upper bound",
               "group-remainder": "group-remainder upper bound", "remainder": "remainder upper bound"}


def pair_bounds(spec: ProblemSpec, s: int = 1,
                        schedule: BoundSchedule | None = None) -> list[PairBounds]:
    """Bounds for every unordered component pair of the ``s``-th solution."""
    if s < 1:
        raise ValueError("s must be >= 1")
    if schedule is None and spec.B:
        schedule = ks_sequence(spec.p, spec.B, spec.P, s + 1)
    out = []
    for i in range(spec.N):
        for j in range(i + 1, spec.N):
            label = pair_label(spec, i, j)
            prov = _PROVENANCE[label[0]]
            if label[0] == "in-group":
                Pb = spec.P[label[1]]
                lo, hi = in_group_interval(Pb, schedule, s)
                alo, ahi = in_group_interval(Pb, schedule, s, scale=4)
                out.append(PairBounds(i, j, label, prov, lo, hi, alo, ahi))
            else:
                out.append(PairBounds(i, j, label, prov, upper=cross_upper_bound(spec, label)))
    return out


def difference_lower_bound(n_i: int, n_j: int) -> int:
    """Lower bound on ``n(u_i - u_j)`` from the node counts of ``u_i`` and ``u_j``.

    The floor ``[(min - 1)/2]`` is clamped at 0 when one count is 0.
    """
    if n_i < 0 or n_j < 0:
        raise ValueError("node counts must be nonnegative")
    if n_i == 0 and n_j == 0:
        return 1
    return max(0, (min(n_i, n_j) - 1) // 2)


@dataclass(frozen=True)
class CoupleCase:
    """Group ``b`` (0-based), distance class ``q`` and its 1-based index couples."""

    b: int
    q: int
    couples: tuple[tuple[int, int], ...]


def enumerate_couples(p: int, B: int = 1) -> list[CoupleCase]:
    """Couples ``(j, j+q mod p)`` per group and distance class ``q = 1..(p-1)/2``.

    ``p = 2`` has the single couple ``(1, 2)`` in its one class.
    """
    if not is_prime(p):
        raise ValueError(f"p = {p} is not prime")
    cases = []
    for b in range(B):
        if p == 2:
            cases.append(CoupleCase(b, 1, ((1, 2),)))
            continue
        for q in range(1, (p - 1) // 2 + 1):
            cases.append(CoupleCase(b, q, tuple((j, (j - 1 + q) % p + 1) for j in range(1, p + 1))))
    return cases
