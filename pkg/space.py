#!/usr/bin/env python3
"""
Finite metric measure spaces.

A FiniteSpace is a point set with an exact distance matrix and positive
point weights. This module generates the test corpus (trees, paths, grids,
Poincare-disk samples), enumerates the finite family of distinguishable
open balls, and computes the geometric constants: local doubling
constants, the isoperimetric profile, the approximate midpoint property,
and the graph Cheeger constant and spectral gap.
"""
import math
from dataclasses import dataclass, field
from functools import cached_property

import networkx as nx
import numpy as np
from scipy.linalg import eigh
from scipy.sparse.csgraph import shortest_path

from errors import (
    DegenerateSpaceError,
    InvalidParameterError,
    SpaceDataError,
)


# =============================================================================
# CONSTANTS
# =============================================================================

MAX_POINTS = 100_000
METRIC_TOLERANCE = 1e-12
EXACT_ISOPERIMETRIC_LIMIT = 18
EXACT_CHEEGER_LIMIT = 20
MAX_DENSE_EIGEN = 2000
SUBSET_CHUNK_ELEMENTS = 4_000_000


# =============================================================================
# MEASURE HELPERS
# =============================================================================

def compensated_row_sums(matrix: np.ndarray) -> np.ndarray:
    """Row sums of a 2-D array with math.fsum (exact rounding)."""
    matrix = np.atleast_2d(matrix)
    return np.fromiter((math.fsum(row) for row in matrix), dtype=float, count=matrix.shape[0])


def lp_norm(space: "FiniteSpace", f: np.ndarray, p: float) -> float:
    """Weighted L^p norm: (sum_x w(x)|f(x)|^p)^(1/p); p = inf gives the max."""
    values = np.abs(np.asarray(f))
    if math.isinf(p):
        return float(values.max()) if values.size else 0.0
    return math.fsum(space.weight * values ** p) ** (1.0 / p)


def inner(space: "FiniteSpace", f: np.ndarray, g: np.ndarray) -> float:
    """Pairing <f, g> = sum_x w(x) f(x) g(x)."""
    return math.fsum(space.weight * np.asarray(f, dtype=float) * np.asarray(g, dtype=float))


def mean_value(space: "FiniteSpace", f: np.ndarray, members=None) -> float:
    """Weighted average of f over a point set (whole space by default)."""
    if members is None:
        members = np.arange(space.n)
    w = space.weight[members]
    return math.fsum(w * np.asarray(f)[members]) / math.fsum(w)


# =============================================================================
# FINITE SPACE
# =============================================================================

@dataclass(frozen=True, eq=False)
class FiniteSpace:
    """
    Finite metric measure space.

    Points are referred to by index everywhere inside the library; the
    opaque ids in `points` only appear at the JSON boundary. `interior`
    marks points away from the truncation shell of a generated space; it
    is None when every point counts as interior.
    """
    points: tuple[str, ...]
    dist: np.ndarray
    weight: np.ndarray
    edges: tuple[tuple[int, int], ...] | None = None
    interior: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        dist = np.array(self.dist, dtype=float)
        weight = np.array(self.weight, dtype=float)
        n = len(self.points)
        if dist.shape != (n, n):
            raise SpaceDataError(f"dist must be {n}x{n}, got {dist.shape}")
        if weight.shape != (n,):
            raise SpaceDataError(f"weights must have length {n}, got {weight.shape}")
        if n == 0:
            raise SpaceDataError("space must have at least one point")
        dist.setflags(write=False)
        weight.setflags(write=False)
        object.__setattr__(self, "points", tuple(str(p) for p in self.points))
        object.__setattr__(self, "dist", dist)
        object.__setattr__(self, "weight", weight)
        if self.edges is not None:
            edges = tuple(sorted((min(int(u), int(v)), max(int(u), int(v))) for u, v in self.edges))
            object.__setattr__(self, "edges", edges)
        if self.interior is not None:
            interior = np.array(self.interior, dtype=bool)
            interior.setflags(write=False)
            object.__setattr__(self, "interior", interior)

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def has_adjacency(self) -> bool:
        return self.edges is not None

    @cached_property
    def total_mass(self) -> float:
        return math.fsum(self.weight)

    @cached_property
    def diameter(self) -> float:
        finite = self.dist[np.isfinite(self.dist)]
        return float(finite.max()) if finite.size else 0.0

    @cached_property
    def min_distance(self) -> float:
        """Smallest positive distance (inf for a single point)."""
        if self.n == 1:
            return math.inf
        off = self.dist[~np.eye(self.n, dtype=bool)]
        return float(off.min())

    @cached_property
    def is_finite_metric(self) -> bool:
        return bool(np.isfinite(self.dist).all())

    @cached_property
    def interior_mask(self) -> np.ndarray:
        if self.interior is None:
            return np.ones(self.n, dtype=bool)
        return self.interior

    @cached_property
    def _index(self) -> dict:
        return {pid: i for i, pid in enumerate(self.points)}

    def index_of(self, point_id) -> int:
        try:
            return self._index[str(point_id)]
        except KeyError:
            raise InvalidParameterError(f"Unknown point id: {point_id}") from None

    def measure(self, members) -> float:
        """mu of a point set given as index array or boolean mask."""
        return math.fsum(self.weight[members])

    def graph(self) -> nx.Graph:
        """Adjacency as a networkx graph on nodes 0..n-1."""
        if self.edges is None:
            raise InvalidParameterError(f"Space '{self.name}' has no adjacency")
        G = nx.Graph()
        G.add_nodes_from(range(self.n))
        G.add_edges_from(self.edges)
        return G

    def masses_within(self, radius: float) -> np.ndarray:
        """mu(B(c, radius)) for every center c."""
        return compensated_row_sums(np.where(self.dist < radius, self.weight, 0.0))


def validate_space(space: FiniteSpace, tol: float = METRIC_TOLERANCE) -> None:
    """
    Check the metric and weight axioms.

    Raises:
        SpaceDataError: naming the first violating pair or triple.
    """
    d = space.dist
    if np.isnan(d).any():
        i, j = np.argwhere(np.isnan(d))[0]
        raise SpaceDataError(f"dist({i},{j}) is NaN", (int(i), int(j)))
    bad = np.argwhere(~(np.isfinite(space.weight) & (space.weight > 0)))
    if bad.size:
        i = int(bad[0][0])
        raise SpaceDataError(f"weight of point {space.points[i]} must be positive", (i,))
    diag = np.flatnonzero(np.diag(d) != 0)
    if diag.size:
        i = int(diag[0])
        raise SpaceDataError(f"dist({i},{i}) must be 0", (i, i))
    # inf - inf between disconnected components is NaN and counts as symmetric
    with np.errstate(invalid="ignore"):
        skew = np.nan_to_num(d - d.T, nan=0.0)
    asym = np.argwhere(np.abs(skew) > tol * (1 + np.abs(np.nan_to_num(d, posinf=0.0))))
    if asym.size:
        i, j = (int(v) for v in asym[0])
        raise SpaceDataError(f"dist is not symmetric at ({i}, {j})", (i, j))
    off = ~np.eye(space.n, dtype=bool)
    dup = np.argwhere(off & (d <= 0))
    if dup.size:
        i, j = (int(v) for v in dup[0])
        raise SpaceDataError(f"points {i} and {j} coincide (dist {d[i, j]})", (i, j))
    for k in range(space.n):
        through = d[:, k:k + 1] + d[k:k + 1, :]
        viol = np.argwhere(d > through + tol * (1 + np.where(np.isfinite(d), d, 0.0)))
        if viol.size:
            i, j = (int(v) for v in viol[0])
            raise SpaceDataError(
                f"triangle inequality fails for ({i}, {k}, {j}): "
                f"{d[i, j]} > {d[i, k]} + {d[k, j]}",
                (i, k, j),
            )


# =============================================================================
# GENERATORS
# =============================================================================

def from_graph(G: nx.Graph, nodes: list, name: str = "",
               interior: np.ndarray | None = None,
               ids: list[str] | None = None) -> FiniteSpace:
    """Unit-weight space with the shortest-path metric of G over `nodes`."""
    adjacency = nx.to_scipy_sparse_array(G, nodelist=nodes, format="csr")
    dist = shortest_path(adjacency, directed=False, unweighted=True)
    position = {node: i for i, node in enumerate(nodes)}
    edges = [(position[u], position[v]) for u, v in G.edges()]
    return FiniteSpace(
        points=tuple(ids if ids is not None else (str(i) for i in range(len(nodes)))),
        dist=dist,
        weight=np.ones(len(nodes)),
        edges=tuple(edges),
        interior=interior,
        name=name,
    )


def tree_size(q: int, depth: int) -> int:
    """Number of vertices of the q-regular tree truncated at `depth`."""
    total, layer = 1, 0
    for level in range(1, depth + 1):
        layer = q if level == 1 else layer * (q - 1)
        total += layer
        if total > MAX_POINTS:
            break
    return total


def gen_tree(q: int, depth: int) -> FiniteSpace:
    """
    Rooted q-regular tree truncated at `depth`, counting measure.

    The root has q children and every other inner vertex q-1, so all
    vertices above the last layer have degree q. Vertex 0 is the root and
    ids follow breadth-first order.
    """
    if q < 2:
        raise InvalidParameterError(f"Tree degree must be >= 2, got {q}")
    if depth < 0:
        raise InvalidParameterError(f"Tree depth must be >= 0, got {depth}")
    if tree_size(q, depth) > MAX_POINTS:
        raise InvalidParameterError(f"gen_tree({q}, {depth}) exceeds {MAX_POINTS} points")

    G = nx.Graph()
    G.add_node(0)
    depth_of = [0]
    frontier = [0]
    for level in range(1, depth + 1):
        children = q if level == 1 else q - 1
        next_frontier = []
        for parent in frontier:
            for _ in range(children):
                child = len(depth_of)
                G.add_edge(parent, child)
                depth_of.append(level)
                next_frontier.append(child)
        frontier = next_frontier

    interior = None
    if depth >= 1:
        interior = np.array(depth_of) < depth
    return from_graph(G, list(range(len(depth_of))), name=f"tree(q={q},depth={depth})",
                      interior=interior)


def gen_path(n: int) -> FiniteSpace:
    """Path graph on n vertices."""
    if n < 1:
        raise InvalidParameterError(f"Path length must be >= 1, got {n}")
    if n > MAX_POINTS:
        raise InvalidParameterError(f"gen_path({n}) exceeds {MAX_POINTS} points")
    interior = None
    if n >= 3:
        interior = np.zeros(n, dtype=bool)
        interior[1:-1] = True
    return from_graph(nx.path_graph(n), list(range(n)), name=f"path(n={n})", interior=interior)


def gen_grid(d: int, n: int) -> FiniteSpace:
    """d-dimensional grid graph (d in {1, 2}) with side n."""
    if d not in (1, 2):
        raise InvalidParameterError(f"Grid dimension must be 1 or 2, got {d}")
    if n < 1:
        raise InvalidParameterError(f"Grid side must be >= 1, got {n}")
    if n ** d > MAX_POINTS:
        raise InvalidParameterError(f"gen_grid({d}, {n}) exceeds {MAX_POINTS} points")
    if d == 1:
        return gen_path(n)

    G = nx.grid_2d_graph(n, n)
    nodes = sorted(G.nodes())
    interior = None
    if n >= 3:
        interior = np.array([0 < i < n - 1 and 0 < j < n - 1 for i, j in nodes])
    return from_graph(G, nodes, name=f"grid(d=2,n={n})", interior=interior,
                      ids=[f"{i},{j}" for i, j in nodes])


def hyperbolic_density(z: np.ndarray) -> np.ndarray:
    """Poincare-disk area density 4/(1-|z|^2)^2 at points z (shape (..., 2))."""
    r2 = np.sum(np.asarray(z, dtype=float) ** 2, axis=-1)
    return 4.0 / (1.0 - r2) ** 2


def hyperbolic_distance(z: np.ndarray) -> np.ndarray:
    """
    Pairwise Poincare-disk distances.

    Uses 2*asinh(|z-w| / sqrt((1-|z|^2)(1-|w|^2))), which equals
    arccosh(1 + 2|z-w|^2/((1-|z|^2)(1-|w|^2))) and stays accurate for
    nearby points.
    """
    z = np.asarray(z, dtype=float)
    diff = z[:, None, :] - z[None, :, :]
    sq = np.sum(diff ** 2, axis=-1)
    s = 1.0 - np.sum(z ** 2, axis=-1)
    dist = 2.0 * np.arcsinh(np.sqrt(sq / np.outer(s, s)))
    np.fill_diagonal(dist, 0.0)
    return dist


def gen_hyperbolic_disk(n_cells: int, max_radius: float, seed: int = 0) -> FiniteSpace:
    """
    Jittered-grid sample of the hyperbolic disk of radius `max_radius`.

    The disk is the Euclidean disk of radius tanh(max_radius/2). A square
    grid of side h is shrunk until it has at least n_cells cell centers
    inside, the n_cells centers closest to the origin are kept, and each is
    jittered uniformly within its cell. Weights are the hyperbolic density
    times the cell area h^2.
    """
    if n_cells < 1:
        raise InvalidParameterError(f"n_cells must be >= 1, got {n_cells}")
    if n_cells > MAX_POINTS:
        raise InvalidParameterError(f"n_cells exceeds {MAX_POINTS}")
    if not max_radius > 0:
        raise InvalidParameterError(f"max_radius must be positive, got {max_radius}")

    rho = math.tanh(max_radius / 2.0)
    h = math.sqrt(math.pi / n_cells) * rho
    while True:
        m = int(math.ceil(rho / h))
        ii, jj = np.meshgrid(np.arange(-m, m + 1), np.arange(-m, m + 1), indexing="ij")
        ii, jj = ii.ravel(), jj.ravel()
        centers = h * np.stack([ii, jj], axis=1).astype(float)
        radius = np.hypot(centers[:, 0], centers[:, 1])
        inside = radius < rho
        if inside.sum() >= n_cells:
            break
        h *= 0.97

    order = np.lexsort((jj[inside], ii[inside], radius[inside]))[:n_cells]
    centers = centers[inside][order]

    rng = np.random.default_rng(seed)
    samples = np.empty_like(centers)
    for idx, c in enumerate(centers):
        samples[idx] = c
        for _ in range(16):
            candidate = c + rng.uniform(-0.4 * h, 0.4 * h, size=2)
            if np.hypot(*candidate) < 1.0:
                samples[idx] = candidate
                break

    dist = hyperbolic_distance(samples)
    weight = hyperbolic_density(samples) * h * h
    hyperbolic_radius = 2.0 * np.arctanh(np.hypot(samples[:, 0], samples[:, 1]))
    interior = hyperbolic_radius < 0.75 * max_radius
    space = FiniteSpace(
        points=tuple(str(i) for i in range(n_cells)),
        dist=dist,
        weight=weight,
        interior=interior if interior.sum() >= 2 else None,
        name=f"hyperbolic(n={n_cells},R={max_radius},seed={seed})",
    )
    validate_space(space)
    return space


# =============================================================================
# BALLS AND BALL FAMILIES
# =============================================================================

@dataclass(frozen=True, eq=False)
class Ball:
    """Open ball {y : d(center, y) < radius} with its member indices and mass."""
    center: int
    radius: float
    members: np.ndarray
    mass: float

    def mask(self, n: int) -> np.ndarray:
        m = np.zeros(n, dtype=bool)
        m[self.members] = True
        return m

    def contains(self, point: int) -> bool:
        return bool(np.isin(point, self.members))

    @property
    def size(self) -> int:
        return int(self.members.size)

    def to_dict(self, space: FiniteSpace) -> dict:
        return {
            "center": space.points[self.center],
            "radius": self.radius,
            "memberIds": [space.points[i] for i in self.members],
        }


def ball(space: FiniteSpace, center: int, radius: float) -> Ball:
    """Open ball of the given center (index) and radius."""
    if not radius > 0:
        raise InvalidParameterError(f"Ball radius must be positive, got {radius}")
    if not 0 <= center < space.n:
        raise InvalidParameterError(f"Center index {center} outside space of {space.n} points")
    members = np.flatnonzero(space.dist[center] < radius)
    return Ball(int(center), float(radius), members, space.measure(members))


def next_distance(space: FiniteSpace, center: int, level: float) -> float:
    """Smallest distance from `center` strictly greater than `level` (inf if none)."""
    row = space.dist[center]
    above = row[row > level]
    return float(above.min()) if above.size else math.inf


@dataclass(frozen=True, eq=False)
class BallFamily:
    """Deduplicated open balls of radius <= bound, with vectorized views."""
    bound: float
    balls: tuple[Ball, ...]
    n: int

    def __len__(self) -> int:
        return len(self.balls)

    @cached_property
    def masks(self) -> np.ndarray:
        out = np.zeros((len(self.balls), self.n), dtype=bool)
        for i, b in enumerate(self.balls):
            out[i, b.members] = True
        return out

    @cached_property
    def masses(self) -> np.ndarray:
        return np.array([b.mass for b in self.balls])

    @cached_property
    def radii(self) -> np.ndarray:
        return np.array([b.radius for b in self.balls])

    @cached_property
    def centers(self) -> np.ndarray:
        return np.array([b.center for b in self.balls], dtype=int)

    @cached_property
    def distinct_sets(self) -> list[int]:
        """Indices of the first ball carrying each distinct member set."""
        seen, keep = set(), []
        for i, b in enumerate(self.balls):
            key = b.members.tobytes()
            if key not in seen:
                seen.add(key)
                keep.append(i)
        return keep


def enumerate_balls(space: FiniteSpace, b: float) -> BallFamily:
    """
    All distinguishable open balls of radius <= b.

    Per center the achievable member sets are the distance-sorted
    prefixes {d <= u} with u < b; each gets the canonical radius
    min(b, next distinct distance). Balls from different centers merge
    only when member set and canonical radius both coincide.
    """
    if not b > 0:
        raise InvalidParameterError(f"Ball-family bound must be positive, got {b}")
    balls, seen = [], set()
    for c in range(space.n):
        row = space.dist[c]
        levels = np.unique(row)
        for m, u in enumerate(levels):
            if not u < b:
                break
            nxt = levels[m + 1] if m + 1 < len(levels) else math.inf
            radius = float(min(b, nxt))
            members = np.flatnonzero(row <= u)
            key = (members.tobytes(), radius)
            if key in seen:
                continue
            seen.add(key)
            balls.append(Ball(c, radius, members, space.measure(members)))
    return BallFamily(float(b), tuple(balls), space.n)


def ball_averages(space: FiniteSpace, family: BallFamily, f: np.ndarray) -> np.ndarray:
    """f_B for every ball of the family."""
    weighted = family.masks * space.weight
    return (weighted @ np.asarray(f)) / family.masses


def mean_oscillations(space: FiniteSpace, family: BallFamily, f: np.ndarray,
                      q: float = 1.0) -> np.ndarray:
    """((1/mu(B)) sum_B w |f - f_B|^q)^(1/q) for every ball of the family."""
    f = np.asarray(f)
    weighted = family.masks * space.weight
    avg = (weighted @ f) / family.masses
    dev = np.abs(f[None, :] - avg[:, None]) ** q
    return (np.sum(weighted * dev, axis=1) / family.masses) ** (1.0 / q)


# =============================================================================
# LOCAL DOUBLING
# =============================================================================

@dataclass
class DoublingEntry:
    """D_{tau,b} with the pair of balls attaining it."""
    tau: float
    b: float
    value: float
    inner: Ball | None = None
    outer_center: int | None = None
    outer_radius: float | None = None

    def to_dict(self, space: FiniteSpace) -> dict:
        return {
            "tau": self.tau,
            "b": self.b,
            "value": self.value,
            "inner": self.inner.to_dict(space) if self.inner else None,
            "outerCenter": space.points[self.outer_center] if self.outer_center is not None else None,
            "outerRadius": self.outer_radius,
        }


def doubling_constant(space: FiniteSpace, tau: float, b: float,
                      family: BallFamily | None = None) -> DoublingEntry:
    """
    D_{tau,b}: max of mu(B')/mu(B) over B in the b-family and open balls
    B' containing B with radius <= tau * r_B, at any center.

    For a fixed B and center c', the largest admissible B' is
    B(c', tau*r_B); it contains B iff max_{y in B} d(c', y) < tau*r_B.
    """
    if family is None:
        family = enumerate_balls(space, b)
    best = DoublingEntry(tau, b, 1.0)
    cache: dict[float, np.ndarray] = {}
    for B in family.balls:
        R = tau * B.radius
        reach = space.dist[:, B.members].max(axis=1)
        admissible = reach < R
        if R not in cache:
            cache[R] = space.masses_within(R)
        ratios = np.where(admissible, cache[R], 0.0) / B.mass
        c = int(np.argmax(ratios))
        if ratios[c] > best.value:
            best = DoublingEntry(tau, b, float(ratios[c]), B, c, float(R))
    return best


def concentric_doubling(space: FiniteSpace, tau: float, b: float,
                        family: BallFamily | None = None) -> float:
    """max mu(B(c, tau*r)) / mu(B(c, r)) over the b-family, same center only."""
    if family is None:
        family = enumerate_balls(space, b)
    best = 1.0
    for B in family.balls:
        outer = space.measure(space.dist[B.center] < tau * B.radius)
        best = max(best, outer / B.mass)
    return best


def doubling_constants(space: FiniteSpace, taus: list[float],
                       bs: list[float]) -> dict[tuple[float, float], DoublingEntry]:
    """D_{tau,b} over a grid of (tau, b)."""
    for tau in taus:
        if tau < 2:
            raise InvalidParameterError(f"Doubling tau must be >= 2, got {tau}")
    table = {}
    for b in bs:
        family = enumerate_balls(space, b)
        for tau in taus:
            table[(float(tau), float(b))] = doubling_constant(space, tau, b, family)
    return table


# =============================================================================
# ISOPERIMETRIC PROFILE
# =============================================================================

@dataclass
class IsoperimetricProfile:
    """Per-kappa minima, their running minimum C_t, and the estimate of I_M."""
    kappas: list[float]
    raw: list[float]
    profile: list[float]
    i_hat: float
    provenance: str
    n_sets: int
    worst_sets: list[np.ndarray] = field(default_factory=list)

    @property
    def kappa0(self) -> float:
        return self.kappas[-1]

    def to_dict(self, space: FiniteSpace) -> dict:
        return {
            "kappas": self.kappas,
            "minimum": self.raw,
            "profile": self.profile,
            "iHat": self.i_hat,
            "provenance": self.provenance,
            "nSets": self.n_sets,
            "kappa0": self.kappa0,
        }


def _distance_to_complement(space: FiniteSpace, sets: np.ndarray) -> np.ndarray:
    """dist(x, A^c) for every row A of a boolean (m, n) array."""
    n = space.n
    chunk = max(1, SUBSET_CHUNK_ELEMENTS // (n * n))
    out = np.empty(sets.shape, dtype=float)
    for start in range(0, sets.shape[0], chunk):
        block = sets[start:start + chunk]
        masked = np.where(~block[:, None, :], space.dist[None, :, :], np.inf)
        out[start:start + chunk] = masked.min(axis=2)
    return out


def _connected_sample(G: nx.Graph, allowed: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Random connected vertex set grown inside `allowed`."""
    candidates = np.flatnonzero(allowed)
    start = int(rng.choice(candidates))
    target = int(rng.integers(1, candidates.size + 1))
    chosen = {start}
    frontier = {v for v in G.neighbors(start) if allowed[v]}
    while len(chosen) < target and frontier:
        v = int(rng.choice(sorted(frontier)))
        chosen.add(v)
        frontier.discard(v)
        frontier.update(u for u in G.neighbors(v) if allowed[u] and u not in chosen)
    mask = np.zeros(allowed.size, dtype=bool)
    mask[list(chosen)] = True
    return mask


def candidate_sets(space: FiniteSpace, n_samples: int, seed: int) -> tuple[np.ndarray, str]:
    """
    Test sets A for the isoperimetric profile, as a boolean (m, n) array.

    Sets live in the interior of the space. All nonempty subsets are
    returned when the interior has at most 18 points; otherwise balls,
    random connected sets (or random unions of balls without adjacency)
    and interior complements of those are sampled.
    """
    allowed = space.interior_mask
    idx = np.flatnonzero(allowed)
    full = allowed.all()

    if idx.size <= EXACT_ISOPERIMETRIC_LIMIT:
        bits = np.arange(1, 2 ** idx.size, dtype=np.int64)
        local = ((bits[:, None] >> np.arange(idx.size)) & 1).astype(bool)
        sets = np.zeros((bits.size, space.n), dtype=bool)
        sets[:, idx] = local
        if full:
            sets = sets[~sets.all(axis=1)]
        return sets, "exact"

    rng = np.random.default_rng(seed)
    pool = [allowed.copy()]
    for c in range(space.n):
        for u in np.unique(space.dist[c]):
            if np.isfinite(u):
                pool.append((space.dist[c] <= u) & allowed)
    graph = space.graph() if space.has_adjacency else None
    for _ in range(n_samples):
        if graph is not None:
            pool.append(_connected_sample(graph, allowed, rng))
        else:
            mask = np.zeros(space.n, dtype=bool)
            for _ in range(int(rng.integers(1, 4))):
                c = int(rng.choice(idx))
                r = float(rng.uniform(0, space.diameter / 2)) + space.min_distance / 2
                mask |= space.dist[c] < r
            pool.append(mask & allowed)
    pool += [allowed & ~A for A in list(pool)]

    sets = np.unique(np.array(pool), axis=0)
    sets = sets[sets.any(axis=1) & ~sets.all(axis=1)]
    return sets, "estimate"


def isoperimetric_profile(space: FiniteSpace, kappas: list[float],
                          n_samples: int = 200, seed: int = 0) -> IsoperimetricProfile:
    """
    Estimate C_kappa = inf_A mu(A_kappa)/(kappa mu(A)) over test sets.

    A_kappa = {x in A : dist(x, A^c) <= kappa}. The profile is the running
    minimum over the sorted kappa grid and I_hat is its largest value.
    """
    if space.n < 2:
        raise DegenerateSpaceError("Isoperimetric profile needs at least two points")
    if n_samples < 1:
        raise InvalidParameterError(f"n_samples must be >= 1, got {n_samples}")
    kappas = sorted(float(k) for k in kappas)
    if not kappas or kappas[0] <= 0:
        raise InvalidParameterError("kappas must be positive")

    sets, provenance = candidate_sets(space, n_samples, seed)
    if sets.shape[0] == 0:
        raise DegenerateSpaceError(f"No proper test sets in space '{space.name}'")

    to_complement = _distance_to_complement(space, sets)
    set_mass = compensated_row_sums(np.where(sets, space.weight, 0.0))
    raw, worst = [], []
    for kappa in kappas:
        band = sets & (to_complement <= kappa)
        band_mass = compensated_row_sums(np.where(band, space.weight, 0.0))
        ratios = band_mass / (kappa * set_mass)
        i = int(np.argmin(ratios))
        raw.append(float(ratios[i]))
        worst.append(np.flatnonzero(sets[i]))
    profile = list(np.minimum.accumulate(raw))
    return IsoperimetricProfile(
        kappas=kappas,
        raw=raw,
        profile=[float(v) for v in profile],
        i_hat=float(max(profile)),
        provenance=provenance,
        n_sets=int(sets.shape[0]),
        worst_sets=worst,
    )


def volume_growth(space: FiniteSpace, origin: int, radii: list[float]) -> list[tuple[float, float]]:
    """(r, mu(B(origin, r))) for each radius."""
    return [(float(r), ball(space, origin, r).mass) for r in radii]


def volume_growth_check(profile: IsoperimetricProfile) -> dict[float, float]:
    """
    min_A mu(A_t) / ((1 - e^{-I t}) mu(A)) per t of the kappa grid.

    Values >= 1 mean the exponential-growth envelope holds on the tested
    sets.
    """
    out = {}
    for kappa, m in zip(profile.kappas, profile.raw):
        envelope = 1.0 - math.exp(-profile.i_hat * kappa)
        out[kappa] = math.inf if envelope == 0 else kappa * m / envelope
    return out


# =============================================================================
# APPROXIMATE MIDPOINT PROPERTY
# =============================================================================

@dataclass
class AmpReport:
    """Outcome of the approximate-midpoint check."""
    r0: float
    beta: float
    passed: bool
    pairs_checked: int
    violations: list[tuple[int, int, float, float]] = field(default_factory=list)

    def to_dict(self, space: FiniteSpace) -> dict:
        return {
            "R0": self.r0,
            "beta": self.beta,
            "passed": self.passed,
            "pairsChecked": self.pairs_checked,
            "violations": [
                {"x": space.points[x], "y": space.points[y], "dist": d, "bestRadius": m}
                for x, y, d, m in self.violations[:50]
            ],
            "violationCount": len(self.violations),
        }


def amp_witness(space: FiniteSpace, x: int, y: int, beta: float) -> Ball | None:
    """
    Smallest ball containing x and y, if its radius can be below beta*d(x,y).

    Returns None when no such ball exists.
    """
    reach = np.maximum(space.dist[:, x], space.dist[:, y])
    c = int(np.argmin(reach))
    limit = beta * space.dist[x, y]
    if not reach[c] < limit:
        return None
    radius = min(next_distance(space, c, reach[c]), 0.5 * (reach[c] + limit))
    return ball(space, c, radius)


def amp_check(space: FiniteSpace, r0: float, beta: float) -> AmpReport:
    """Check every pair with d(x, y) > R0 for a containing ball of radius < beta*d."""
    if r0 < 0:
        raise InvalidParameterError(f"R0 must be >= 0, got {r0}")
    if not 0.5 < beta < 1:
        raise InvalidParameterError(f"beta must lie in (1/2, 1), got {beta}")
    violations = []
    checked = 0
    d = space.dist
    for x in range(space.n):
        ys = np.flatnonzero((np.arange(space.n) > x) & (d[x] > r0))
        if ys.size == 0:
            continue
        checked += ys.size
        reach = np.maximum(d[:, x][:, None], d[:, ys]).min(axis=0)
        failing = ~(reach < beta * d[x, ys])
        for y, m in zip(ys[failing], reach[failing]):
            violations.append((x, int(y), float(d[x, y]), float(m)))
    return AmpReport(r0, beta, not violations, int(checked), violations)


# =============================================================================
# CHEEGER CONSTANT AND SPECTRAL GAP
# =============================================================================

@dataclass
class CheegerResult:
    """Edge-boundary Cheeger constant with how it was obtained."""
    value: float
    mode: str
    disconnected: bool = False
    witness: np.ndarray | None = None

    def to_dict(self, space: FiniteSpace) -> dict:
        return {
            "value": self.value,
            "mode": self.mode,
            "disconnected": self.disconnected,
            "witness": [space.points[i] for i in self.witness] if self.witness is not None else None,
        }


def laplacian(space: FiniteSpace) -> np.ndarray:
    """Combinatorial graph Laplacian D - A (dense)."""
    G = space.graph()
    return nx.laplacian_matrix(G, nodelist=range(space.n)).toarray().astype(float)


def cheeger_constant(space: FiniteSpace) -> CheegerResult:
    """
    h = min over A with mu(A) <= mu(M)/2 of |edge boundary of A| / mu(A).

    Exact subset enumeration up to 20 vertices, otherwise a Fiedler-vector
    sweep cut (an upper bound).
    """
    G = space.graph()
    if space.n < 2:
        raise DegenerateSpaceError("Cheeger constant needs at least two vertices")
    if not nx.is_connected(G):
        component = min(nx.connected_components(G), key=len)
        return CheegerResult(0.0, "exact", True, np.array(sorted(component)))

    half = space.total_mass / 2 * (1 + 1e-12)
    edges = np.array(space.edges, dtype=int)
    if space.n <= EXACT_CHEEGER_LIMIT:
        best, witness = math.inf, None
        total = 2 ** space.n
        chunk = max(1, SUBSET_CHUNK_ELEMENTS // space.n)
        for start in range(1, total, chunk):
            bits = np.arange(start, min(total, start + chunk), dtype=np.int64)
            sets = ((bits[:, None] >> np.arange(space.n)) & 1).astype(bool)
            mass = sets @ space.weight
            boundary = np.sum(sets[:, edges[:, 0]] ^ sets[:, edges[:, 1]], axis=1)
            ratio = np.where(mass <= half, boundary / mass, np.inf)
            i = int(np.argmin(ratio))
            if ratio[i] < best:
                best, witness = float(ratio[i]), np.flatnonzero(sets[i])
        return CheegerResult(best, "exact", False, witness)

    _, vectors = eigh(laplacian(space), subset_by_index=[1, 1])
    order = np.argsort(vectors[:, 0], kind="stable")
    inside = np.zeros(space.n, dtype=bool)
    boundary, mass = 0, 0.0
    best, best_k = math.inf, 0
    for k, v in enumerate(order[:-1], start=1):
        for u in G.neighbors(v):
            boundary += -1 if inside[u] else 1
        inside[v] = True
        mass += space.weight[v]
        side = mass if mass <= half else space.total_mass - mass
        if side <= half and boundary / side < best:
            best, best_k = boundary / side, k
    prefix = order[:best_k]
    if space.measure(prefix) > half:
        prefix = order[best_k:]
    return CheegerResult(float(best), "sweep", False, np.sort(prefix))


def spectral_gap(space: FiniteSpace) -> float:
    """Smallest nonzero eigenvalue of the combinatorial Laplacian (0 if disconnected)."""
    if space.n > MAX_DENSE_EIGEN:
        raise InvalidParameterError(f"Dense eigensolve limited to {MAX_DENSE_EIGEN} points")
    G = space.graph()
    if space.n == 1 or not nx.is_connected(G):
        return 0.0
    values = eigh(laplacian(space), eigvals_only=True)
    return float(max(values[1], 0.0))


# =============================================================================
# GEOMETRY REPORT
# =============================================================================

@dataclass
class GeometryReport:
    """Geometric constants of one space."""
    doubling: dict[tuple[float, float], DoublingEntry]
    isoperimetric: IsoperimetricProfile | None
    amp: AmpReport
    volume_growth: list[tuple[float, float]]
    cheeger: CheegerResult | None = None
    spectral_gap: float | None = None

    def to_dict(self, space: FiniteSpace) -> dict:
        return {
            "doubling": [entry.to_dict(space) for entry in self.doubling.values()],
            "isoperimetric": self.isoperimetric.to_dict(space) if self.isoperimetric else None,
            "amp": self.amp.to_dict(space),
            "volumeGrowth": [{"r": r, "mass": m} for r, m in self.volume_growth],
            "cheeger": self.cheeger.to_dict(space) if self.cheeger else None,
            "spectralGap": self.spectral_gap,
        }


def geometry_report(space: FiniteSpace, taus: list[float], bs: list[float],
                    kappas: list[float], r0: float, beta: float,
                    n_samples: int = 200, seed: int = 0,
                    origin: int = 0) -> GeometryReport:
    """Doubling table, isoperimetric profile, AMP, volume growth and graph constants."""
    profile = isoperimetric_profile(space, kappas, n_samples, seed) if space.n > 1 else None
    step = space.min_distance if math.isfinite(space.min_distance) else 1.0
    radii = list(np.arange(1, int(space.diameter / step) + 2) * step)
    cheeger = gap = None
    if space.has_adjacency and space.n > 1 and space.n <= MAX_DENSE_EIGEN:
        cheeger = cheeger_constant(space)
        gap = spectral_gap(space)
    return GeometryReport(
        doubling=doubling_constants(space, taus, bs),
        isoperimetric=profile,
        amp=amp_check(space, r0, beta),
        volume_growth=volume_growth(space, origin, radii),
        cheeger=cheeger,
        spectral_gap=gap,
    )


# =============================================================================
# SERIALIZATION
# =============================================================================

def space_to_dict(space: FiniteSpace) -> dict:
    """Space JSON document; graphs are stored by edges, others by dist."""
    doc = {
        "name": space.name,
        "points": list(space.points),
        "weights": [float(w) for w in space.weight],
    }
    if space.has_adjacency:
        doc["edges"] = [[u, v] for u, v in space.edges]
    else:
        doc["dist"] = [[float(v) for v in row] for row in space.dist]
    if space.interior is not None:
        doc["interior"] = [space.points[i] for i in np.flatnonzero(space.interior)]
    return doc


def space_from_dict(doc: dict) -> FiniteSpace:
    """
    Build and validate a space from an already schema-checked document.

    Raises:
        SpaceDataError: on metric or weight violations.
    """
    points = [str(p) for p in doc["points"]]
    n = len(points)
    interior = None
    if doc.get("interior") is not None:
        position = {pid: i for i, pid in enumerate(points)}
        interior = np.zeros(n, dtype=bool)
        for pid in doc["interior"]:
            if str(pid) not in position:
                raise SpaceDataError(f"interior id {pid} is not a point")
            interior[position[str(pid)]] = True

    if doc.get("edges") is not None:
        G = nx.Graph()
        G.add_nodes_from(range(n))
        for u, v in doc["edges"]:
            if not (0 <= u < n and 0 <= v < n) or u == v:
                raise SpaceDataError(f"edge ({u}, {v}) is not a pair of distinct points", (u, v))
            G.add_edge(int(u), int(v))
        space = from_graph(G, list(range(n)), name=doc.get("name", ""),
                           interior=interior, ids=points)
        space = FiniteSpace(space.points, space.dist, np.asarray(doc["weights"], dtype=float),
                            space.edges, interior, doc.get("name", ""))
    else:
        space = FiniteSpace(tuple(points), np.asarray(doc["dist"], dtype=float),
                            np.asarray(doc["weights"], dtype=float), None, interior,
                            doc.get("name", ""))
    validate_space(space)
    return space


def function_to_dict(space: FiniteSpace, f: np.ndarray) -> dict:
    return {"values": {pid: float(v) for pid, v in zip(space.points, f)}}


def function_from_dict(space: FiniteSpace, doc: dict) -> np.ndarray:
    """Point function from {"values": {pointId: real}}; missing ids are 0."""
    f = np.zeros(space.n)
    for pid, value in doc.get("values", {}).items():
        f[space.index_of(pid)] = float(value)
    return f
