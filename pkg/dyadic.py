#!/usr/bin/env python3
"""
Dyadic cube forests on finite metric measure spaces.

Cubes come from nested greedy nets: N_k is a maximal set of points
pairwise more than delta^k apart, grown from N_{k-1} by scanning points in
tie-break order. Every level-(k+1) center is attached to its nearest
level-k center, so cubes nest by construction; the finest level is made of
singletons and the coarsest is the whole space.
"""
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from errors import InvalidParameterError
from space import Ball, FiniteSpace, doubling_constant


# =============================================================================
# TYPES
# =============================================================================

@dataclass(frozen=True, eq=False)
class Cube:
    """Q_alpha^k: level k, index alpha, center z, members, parent/children links."""
    level: int
    index: int
    center: int
    members: np.ndarray
    mass: float
    parent: int | None = None
    children: tuple[int, ...] = ()


@dataclass(frozen=True, eq=False)
class DyadicForest:
    """Cubes per resolution k in [k_min, k_max] with the realized constants."""
    space: FiniteSpace
    delta: float
    k_min: int
    k_max: int
    levels: tuple[tuple[Cube, ...], ...]
    realized_a0: float
    realized_c1: float

    @property
    def resolutions(self) -> range:
        return range(self.k_min, self.k_max + 1)

    def cubes(self, k: int) -> tuple[Cube, ...]:
        if k not in self.resolutions:
            raise InvalidParameterError(f"Resolution {k} outside [{self.k_min}, {self.k_max}]")
        return self.levels[k - self.k_min]

    def scale(self, k: int) -> float:
        return self.delta ** k

    @cached_property
    def _labels(self) -> dict[int, np.ndarray]:
        out = {}
        for k in self.resolutions:
            labels = np.full(self.space.n, -1, dtype=int)
            for cube in self.cubes(k):
                labels[cube.members] = cube.index
            out[k] = labels
        return out

    def labels(self, k: int) -> np.ndarray:
        """Cube index of every point at resolution k."""
        self.cubes(k)
        return self._labels[k]

    def cube_of(self, point: int, k: int) -> Cube:
        return self.cubes(k)[self.labels(k)[point]]


@dataclass
class ForestReport:
    """Outcome of verify_forest; violations must be empty."""
    violations: list[str] = field(default_factory=list)
    realized_a0: float = 1.0
    realized_c1: float = 1.0
    cubes_checked: int = 0

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "violations": self.violations,
            "realizedA0": self.realized_a0,
            "realizedC1": self.realized_c1,
            "cubesChecked": self.cubes_checked,
        }


# =============================================================================
# CONSTRUCTION
# =============================================================================

def _tie_order(n: int, tie_break: str, seed: int) -> np.ndarray:
    if tie_break == "id":
        return np.arange(n)
    if tie_break == "random":
        return np.random.default_rng(seed).permutation(n)
    raise InvalidParameterError(f"Unknown tie_break: {tie_break}. Must be 'id' or 'random'")


def resolution_range(space: FiniteSpace, delta: float) -> tuple[int, int]:
    """
    (k_min, k_max): k_min is the largest k with delta^k >= diam, k_max the
    smallest k with delta^k below the minimum distance.
    """
    if space.n == 1:
        return 0, 0
    log_delta = math.log(delta)
    k_min = math.floor(math.log(space.diameter) / log_delta)
    while delta ** k_min < space.diameter:
        k_min -= 1
    while delta ** (k_min + 1) >= space.diameter:
        k_min += 1
    k_max = math.floor(math.log(space.min_distance) / log_delta) + 1
    while delta ** (k_max - 1) < space.min_distance:
        k_max -= 1
    while not delta ** k_max < space.min_distance:
        k_max += 1
    return k_min, max(k_min, k_max)


def build_forest(space: FiniteSpace, delta: float, tie_break: str = "id",
                 seed: int = 0) -> DyadicForest:
    """
    Build the dyadic forest of a space.

    Args:
        space: Space with a finite metric.
        delta: Scale ratio in (0, 1).
        tie_break: "id" (index order) or "random" (seeded permutation).
        seed: Permutation seed for tie_break="random".

    Raises:
        InvalidParameterError: delta outside (0, 1) or infinite distances.
    """
    if not 0 < delta < 1:
        raise InvalidParameterError(f"delta must lie in (0, 1), got {delta}")
    if not space.is_finite_metric:
        raise InvalidParameterError("Dyadic forests need a finite metric (connected space)")

    d = space.dist
    order = _tie_order(space.n, tie_break, seed)
    rank = np.empty(space.n, dtype=int)
    rank[order] = np.arange(space.n)
    k_min, k_max = resolution_range(space, delta)

    nets: list[list[int]] = []
    net: list[int] = []
    gap = np.full(space.n, np.inf)
    for k in range(k_min, k_max + 1):
        threshold = delta ** k
        for x in order:
            if gap[x] > threshold:
                net.append(int(x))
                gap = np.minimum(gap, d[x])
        nets.append(list(net))

    # finest level: singleton cubes in net order
    members = [np.array([z]) for z in nets[-1]]
    levels: list[tuple[Cube, ...]] = []
    child_level: list[Cube] = [
        Cube(k_max, i, z, members[i], space.measure(members[i])) for i, z in enumerate(nets[-1])
    ]
    for k in range(k_max - 1, k_min - 1, -1):
        centers = np.array(nets[k - k_min])
        parent_of = []
        for child in child_level:
            row = d[child.center, centers]
            parent_of.append(int(np.lexsort((rank[centers], row))[0]))
        groups: list[list[int]] = [[] for _ in centers]
        for ci, p in enumerate(parent_of):
            groups[p].append(ci)
        level = []
        for i, z in enumerate(centers):
            pts = np.sort(np.concatenate([child_level[ci].members for ci in groups[i]]))
            level.append(Cube(k, i, int(z), pts, space.measure(pts), None, tuple(groups[i])))
        levels.append(tuple(
            Cube(c.level, c.index, c.center, c.members, c.mass, parent_of[c.index], c.children)
            for c in child_level
        ))
        child_level = level
    levels.append(tuple(child_level))
    levels.reverse()

    a0, c1 = realized_constants(space, delta, k_min, levels)
    return DyadicForest(space, float(delta), k_min, k_max, tuple(levels), a0, c1)


def realized_constants(space: FiniteSpace, delta: float, k_min: int,
                       levels) -> tuple[float, float]:
    """
    (a0, C1): largest inner-ball ratio and smallest diameter ratio valid
    for every cube. Degenerate cases (all cubes singletons, or all cubes
    the whole space) fall back to 1.
    """
    d = space.dist
    c1, a0 = 0.0, math.inf
    for offset, level in enumerate(levels):
        scale = delta ** (k_min + offset)
        for cube in level:
            diam = float(d[np.ix_(cube.members, cube.members)].max())
            c1 = max(c1, diam / scale)
            outside = np.ones(space.n, dtype=bool)
            outside[cube.members] = False
            if outside.any():
                a0 = min(a0, float(d[cube.center, outside].min()) / scale)
    return (a0 if math.isfinite(a0) else 1.0), (c1 if c1 > 0 else 1.0)


def base_resolution(forest: DyadicForest) -> int:
    """Coarsest k whose cubes all have diameter <= diam/4."""
    d = forest.space.dist
    limit = forest.space.diameter / 4
    for k in forest.resolutions:
        if all(d[np.ix_(c.members, c.members)].max() <= limit for c in forest.cubes(k)):
            return k
    return forest.k_max


# =============================================================================
# VERIFICATION
# =============================================================================

def verify_forest(forest: DyadicForest) -> ForestReport:
    """Check partition, nesting, unique ancestry, diameter and inner-ball bounds."""
    space = forest.space
    d = space.dist
    report = ForestReport(realized_a0=forest.realized_a0, realized_c1=forest.realized_c1)
    tol = 1e-12
    for k in forest.resolutions:
        cubes = forest.cubes(k)
        counts = np.bincount(np.concatenate([c.members for c in cubes]), minlength=space.n)
        for p in np.flatnonzero(counts != 1):
            report.violations.append(
                f"partition: level {k}, point {space.points[p]} lies in {counts[p]} cubes"
            )
        scale = forest.scale(k)
        for cube in cubes:
            report.cubes_checked += 1
            if cube.center not in cube.members:
                report.violations.append(f"center: cube ({k},{cube.index}) misses its center")
            diam = float(d[np.ix_(cube.members, cube.members)].max())
            if diam > forest.realized_c1 * scale * (1 + tol):
                report.violations.append(
                    f"diameter: cube ({k},{cube.index}) has diam {diam} > C1*delta^k"
                )
            inner = np.flatnonzero(d[cube.center] < forest.realized_a0 * scale * (1 - tol))
            if not np.isin(inner, cube.members).all():
                report.violations.append(f"inner ball: cube ({k},{cube.index}) misses B(z, a0*delta^k)")

            if k == forest.k_min:
                if cube.parent is not None:
                    report.violations.append(f"ancestor: coarsest cube ({k},{cube.index}) has a parent")
                continue
            parents = forest.cubes(k - 1)
            if cube.parent is None or not 0 <= cube.parent < len(parents):
                report.violations.append(f"ancestor: cube ({k},{cube.index}) has no valid parent")
                continue
            parent = parents[cube.parent]
            if cube.index not in parent.children:
                report.violations.append(f"ancestor: cube ({k},{cube.index}) missing from parent's children")
            if not np.isin(cube.members, parent.members).all():
                report.violations.append(f"nesting: cube ({k},{cube.index}) not inside its parent")
            for other in parents:
                if other.index != cube.parent and np.intersect1d(other.members, cube.members).size:
                    report.violations.append(
                        f"nesting: cube ({k},{cube.index}) meets non-parent ({k - 1},{other.index})"
                    )
    return report


# =============================================================================
# CUBE / BALL INTERACTION
# =============================================================================

@dataclass
class InteractionReport:
    """mu(B cap Q) against mu(Q) or mu(B)/D."""
    mu_cap: float
    mu_cube: float
    mu_ball: float
    case: str
    constant: float
    holds: bool

    def to_dict(self) -> dict:
        return {
            "muBallCapCube": self.mu_cap,
            "muCube": self.mu_cube,
            "muBall": self.mu_ball,
            "case": self.case,
            "constant": self.constant,
            "holds": self.holds,
        }


def interaction_constant(forest: DyadicForest, k: int) -> float:
    """
    D_{tau, b} bounding mu(B) / mu(B cap Q) for cubes of resolution k.

    The bare constant is D_{C1/(a0 delta), delta^k}. tau is raised to 2 and
    b to max(1, a0) delta^k; D is nondecreasing in both, so the value still
    bounds the bare constant and the inner ball B(z_Q, a0 delta^(k+1)) stays
    inside the b-family.
    """
    tau = max(2.0, forest.realized_c1 / (forest.realized_a0 * forest.delta))
    b = max(1.0, forest.realized_a0) * forest.scale(k)
    return doubling_constant(forest.space, tau, b).value


def cube_ball_interaction(forest: DyadicForest, B: Ball, cube: Cube,
                          constant: float | None = None) -> InteractionReport:
    """
    Compare mu(B cap Q) with mu(Q) (when r_B > C1 delta^k, so Q lies in B)
    or with mu(B)/D otherwise.

    Raises:
        InvalidParameterError: the ball center is not in the cube.
    """
    if B.center not in cube.members:
        raise InvalidParameterError(
            f"Ball center {B.center} is not in cube ({cube.level},{cube.index})"
        )
    space = forest.space
    cap = np.intersect1d(B.members, cube.members)
    mu_cap = space.measure(cap)
    if B.radius > forest.realized_c1 * forest.scale(cube.level):
        holds = abs(mu_cap - cube.mass) <= 1e-12 * cube.mass
        return InteractionReport(mu_cap, cube.mass, B.mass, "contained", 1.0, holds)
    if constant is None:
        constant = interaction_constant(forest, cube.level)
    holds = mu_cap >= B.mass / constant * (1 - 1e-12)
    return InteractionReport(mu_cap, cube.mass, B.mass, "lower-bound", constant, holds)


@dataclass
class PackingReport:
    """Cubes of the ball's resolution that meet it, against the dilate and count bound."""
    level: int
    cubes: list[int]
    dilate_radius: float
    contained: bool
    count_bound: float

    @property
    def holds(self) -> bool:
        return self.contained and len(self.cubes) <= self.count_bound * (1 + 1e-12)


def ball_resolution(forest: DyadicForest, radius: float) -> int:
    """k with delta^k <= radius < delta^(k-1), clamped to the forest range."""
    k = math.ceil(math.log(radius) / math.log(forest.delta))
    while forest.delta ** k > radius:
        k += 1
    while forest.delta ** (k - 1) <= radius:
        k -= 1
    return min(forest.k_max, max(forest.k_min, k))


def cubes_meeting_ball(forest: DyadicForest, B: Ball, b: float,
                       count_bound: float | None = None) -> PackingReport:
    """Cubes of 𝓠^k meeting B lie in B(c_B, (1+C1) r_B) and number at most D."""
    space = forest.space
    k = ball_resolution(forest, B.radius)
    labels = forest.labels(k)
    hit = sorted(set(int(i) for i in labels[B.members]))
    dilate = (1 + forest.realized_c1) * B.radius
    members = np.concatenate([forest.cubes(k)[i].members for i in hit])
    contained = bool((space.dist[B.center, members] < dilate).all())
    if count_bound is None:
        count_bound = packing_constant(forest, b)
    return PackingReport(k, hit, dilate, contained, count_bound)


def packing_constant(forest: DyadicForest, b: float) -> float:
    """D_{(1+C1)/(a0 delta), max(1,a0) b}: bound on cubes meeting a ball of radius <= b."""
    tau = max(2.0, (1 + forest.realized_c1) / (forest.realized_a0 * forest.delta))
    return doubling_constant(forest.space, tau, max(1.0, forest.realized_a0) * b).value


def cube_doubling(forest: DyadicForest) -> float:
    """max mu(parent)/mu(Q) over all non-root cubes (1 for a one-level forest)."""
    worst = 1.0
    for k in forest.resolutions[1:]:
        parents = forest.cubes(k - 1)
        for cube in forest.cubes(k):
            worst = max(worst, parents[cube.parent].mass / cube.mass)
    return worst


# =============================================================================
# COVERING SELECTION
# =============================================================================

@dataclass
class CoveringSelection:
    """Disjoint boundary-proximal cubes carrying a fixed share of mu(A)."""
    cubes: list[Cube]
    input_set: np.ndarray
    kappa: float
    target_fraction: float
    achieved_fraction: float
    feasible: bool
    distances: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "cubes": [[c.level, c.index] for c in self.cubes],
            "kappa": self.kappa,
            "targetFraction": self.target_fraction,
            "achievedFraction": self.achieved_fraction,
            "feasible": self.feasible,
            "distancesToComplement": self.distances,
        }


def maximal_cubes_inside(forest: DyadicForest, inside: np.ndarray, nu_min: int) -> list[Cube]:
    """Coarsest cubes of resolution >= nu_min contained in a point set."""
    covered = np.zeros(forest.space.n, dtype=bool)
    chosen = []
    for k in range(nu_min, forest.k_max + 1):
        for cube in forest.cubes(k):
            if inside[cube.members].all() and not covered[cube.members].any():
                chosen.append(cube)
                covered[cube.members] = True
    return chosen


def covering_select(forest: DyadicForest, A, kappa: float, nu_min: int, i_hat: float,
                    collection: list[Cube] | None = None) -> CoveringSelection:
    """
    Select disjoint cubes near the boundary of A.

    Keeps the cubes of the collection meeting A_kappa, reduces them to the
    maximal ones and accumulates them by decreasing mass until their total
    reaches (1 - e^{-I kappa})/2 of mu(A).

    Raises:
        InvalidParameterError: A empty or the whole space, kappa <= 0, or
            nu_min outside the forest range.
    """
    space = forest.space
    A = np.asarray(A)
    if A.dtype == bool:
        mask = A.copy()
    else:
        mask = np.zeros(space.n, dtype=bool)
        mask[A] = True
    if not mask.any() or mask.all():
        raise InvalidParameterError("A must be a nonempty proper subset")
    if not kappa > 0:
        raise InvalidParameterError(f"kappa must be positive, got {kappa}")
    forest.cubes(nu_min)

    if collection is None:
        collection = maximal_cubes_inside(forest, mask, nu_min)
    to_complement = space.dist[:, ~mask].min(axis=1)
    band = mask & (to_complement <= kappa)

    meeting = sorted((c for c in collection if band[c.members].any()),
                     key=lambda c: (c.level, c.index))
    taken = np.zeros(space.n, dtype=bool)
    maximal = []
    for cube in meeting:
        if not taken[cube.members].any():
            maximal.append(cube)
            taken[cube.members] = True

    mass_a = space.measure(mask)
    target = (1.0 - math.exp(-i_hat * kappa)) / 2.0
    selected, total = [], 0.0
    for cube in sorted(maximal, key=lambda c: (-c.mass, c.level, c.index)):
        if total >= target * mass_a:
            break
        selected.append(cube)
        total += cube.mass
    achieved = total / mass_a
    return CoveringSelection(
        cubes=selected,
        input_set=mask,
        kappa=float(kappa),
        target_fraction=target,
        achieved_fraction=achieved,
        feasible=achieved >= target * (1 - 1e-12),
        distances=[float(to_complement[c.members].min()) for c in selected],
    )


# =============================================================================
# SERIALIZATION
# =============================================================================

def forest_to_dict(forest: DyadicForest) -> dict:
    pts = forest.space.points
    return {
        "delta": forest.delta,
        "kMin": forest.k_min,
        "kMax": forest.k_max,
        "realizedA0": forest.realized_a0,
        "realizedC1": forest.realized_c1,
        "levels": [
            {
                "k": k,
                "cubes": [
                    {"center": pts[c.center], "memberIds": [pts[i] for i in c.members],
                     "parent": c.parent}
                    for c in forest.cubes(k)
                ],
            }
            for k in forest.resolutions
        ],
    }


def forest_from_dict(space: FiniteSpace, doc: dict) -> DyadicForest:
    """Rebuild a forest from its JSON document (children derived from parents)."""
    levels = []
    for level_doc in doc["levels"]:
        k = int(level_doc["k"])
        level = []
        for i, cube_doc in enumerate(level_doc["cubes"]):
            members = np.array(sorted(space.index_of(p) for p in cube_doc["memberIds"]), dtype=int)
            level.append(Cube(k, i, space.index_of(cube_doc["center"]), members,
                              space.measure(members), cube_doc.get("parent")))
        levels.append(level)
    linked = []
    for offset, level in enumerate(levels):
        children = levels[offset + 1] if offset + 1 < len(levels) else []
        linked.append(tuple(
            Cube(c.level, c.index, c.center, c.members, c.mass, c.parent,
                 tuple(ch.index for ch in children if ch.parent == c.index))
            for c in level
        ))
    return DyadicForest(space, float(doc["delta"]), int(doc["kMin"]), int(doc["kMax"]),
                        tuple(linked), float(doc["realizedA0"]), float(doc["realizedC1"]))
