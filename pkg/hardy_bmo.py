#!/usr/bin/env python3
"""
Atomic Hardy space H^1_b and BMO_b on finite metric measure spaces.

The H^1 norm is the exact optimum of a linear program over per-ball
mean-zero pieces; its dual certificate is a function of unit mean
oscillation, which ties the norm to the BMO pairing. Atom splitting turns
an atom on a large ball into a finite combination of atoms on balls of
radius at most c, using approximate-midpoint balls to reassemble supports.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.special import gamma

from errors import AmpFailureError, InvalidParameterError, NonContractionError
from space import (
    Ball,
    BallFamily,
    FiniteSpace,
    amp_check,
    amp_witness,
    ball,
    ball_averages,
    doubling_constant,
    enumerate_balls,
    inner,
    lp_norm,
    mean_oscillations,
    mean_value,
    next_distance,
)


# =============================================================================
# CONSTANTS
# =============================================================================

CANCELLATION_TOLERANCE = 1e-10
SIZE_TOLERANCE = 1e-12
LP_GAP_TOLERANCE = 1e-6
LP_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


# =============================================================================
# ATOMS
# =============================================================================

@dataclass(frozen=True, eq=False)
class Atom:
    """Mean-zero function on a ball; `values` align with support.members."""
    support: Ball
    values: np.ndarray
    r: float = math.inf

    def as_function(self, n: int) -> np.ndarray:
        f = np.zeros(n)
        f[self.support.members] = self.values
        return f

    @classmethod
    def from_function(cls, support: Ball, f: np.ndarray, r: float = math.inf) -> "Atom":
        return cls(support, np.asarray(f, dtype=float)[support.members].copy(), r)


@dataclass
class AtomCheck:
    """validate_atom outcome; each violation is (kind, magnitude, bound)."""
    violations: list[tuple[str, float, float]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def validate_atom(space: FiniteSpace, atom: Atom) -> AtomCheck:
    """Check cancellation and the size bound of an atom."""
    members = atom.support.members
    if members.size and (members.min() < 0 or members.max() >= space.n):
        raise InvalidParameterError("Atom support lies outside the space")
    if atom.values.shape != members.shape:
        raise InvalidParameterError("Atom values must align with its support members")
    w = space.weight[members]
    mu = atom.support.mass
    check = AtomCheck()

    total = math.fsum(w * atom.values)
    l1 = math.fsum(w * np.abs(atom.values))
    if abs(total) > CANCELLATION_TOLERANCE * l1:
        check.violations.append(("cancellation", abs(total), CANCELLATION_TOLERANCE * l1))

    if math.isinf(atom.r):
        size = float(np.abs(atom.values).max()) if atom.values.size else 0.0
    else:
        size = (math.fsum(w * np.abs(atom.values) ** atom.r) / mu) ** (1.0 / atom.r)
    if size > (1.0 / mu) * (1 + SIZE_TOLERANCE):
        check.violations.append(("size", size, 1.0 / mu))
    return check


def random_atom(space: FiniteSpace, support: Ball, rng: np.random.Generator) -> Atom:
    """Gaussian values on the support, projected to mean zero and scaled to the size bound."""
    w = space.weight[support.members]
    values = rng.standard_normal(support.members.size)
    values = values - math.fsum(w * values) / support.mass
    peak = np.abs(values).max()
    if peak == 0:
        return Atom(support, np.zeros(support.members.size))
    return Atom(support, values / (peak * support.mass))


@dataclass
class SplitConstants:
    """Structural constants of one split_atom run."""
    beta_prime: float
    d_outer: float
    d_inner: float
    normalization: float
    net_bound: float
    iteration_cap: int
    passes: int = 0

    @property
    def coefficient_bound(self) -> float:
        return self.normalization ** self.passes

    @property
    def term_bound(self) -> float:
        return self.net_bound ** self.passes

    def to_dict(self) -> dict:
        return {
            "betaPrime": self.beta_prime,
            "dOuter": self.d_outer,
            "dInner": self.d_inner,
            "normalization": self.normalization,
            "netBound": self.net_bound,
            "iterationCap": self.iteration_cap,
            "passes": self.passes,
            "coefficientBound": self.coefficient_bound,
            "termBound": self.term_bound,
        }


@dataclass
class AtomicDecomposition:
    """Finite sum of lambda_j * a_j at scale b."""
    terms: list[tuple[float, Atom]]
    scale: float
    constants: SplitConstants | None = None

    def reconstruct(self, n: int) -> np.ndarray:
        total = np.zeros(n)
        for lam, atom in self.terms:
            total[atom.support.members] += lam * atom.values
        return total

    @property
    def coefficient_sum(self) -> float:
        return math.fsum(abs(lam) for lam, _ in self.terms)

    @property
    def max_radius(self) -> float:
        return max((a.support.radius for _, a in self.terms), default=0.0)

    def relative_error(self, space: FiniteSpace, target: np.ndarray) -> float:
        """Weighted L^1 distance to the target relative to its L^1 norm."""
        norm = lp_norm(space, target, 1.0)
        diff = lp_norm(space, self.reconstruct(space.n) - target, 1.0)
        return diff / norm if norm > 0 else diff


# =============================================================================
# H1 NORM (LINEAR PROGRAM)
# =============================================================================

@dataclass
class H1NormResult:
    """Optimum of the atomic-norm program with its dual certificate."""
    value: float
    feasible: bool
    status: str
    b: float
    primal: float | None = None
    dual: float | None = None
    dual_function: np.ndarray | None = None
    dual_norm: float | None = None
    decomposition: AtomicDecomposition | None = None
    formulation: str = "standard"

    @property
    def gap(self) -> float | None:
        if self.primal is None or self.dual is None:
            return None
        return abs(self.primal - self.dual)

    @property
    def certified(self) -> bool:
        return self.feasible and self.gap is not None and \
            self.gap <= LP_GAP_TOLERANCE * max(1.0, abs(self.primal))

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "feasible": self.feasible,
            "status": self.status,
            "b": self.b,
            "primal": self.primal,
            "dual": self.dual,
            "gap": self.gap,
            "dualNorm": self.dual_norm,
            "formulation": self.formulation,
        }


def _lp_balls(family: BallFamily) -> list[Ball]:
    return [family.balls[i] for i in family.distinct_sets if family.balls[i].size >= 2]


def _build_program(space: FiniteSpace, g: np.ndarray, balls: list[Ball], formulation: str):
    """
    Sparse LP data. Standard: variables (g_B entries, t_B), g_B free.
    Split: variables (p_B entries, m_B entries, t_B) with g_B = p_B - m_B.
    """
    n, K = space.n, len(balls)
    entry_point = np.concatenate([B.members for B in balls])
    entry_ball = np.concatenate([np.full(B.size, j) for j, B in enumerate(balls)])
    E = entry_point.size
    inv_mass = 1.0 / np.array([B.mass for B in balls])
    rows = np.arange(E)

    def equality_block(sign: float):
        point_rows = sparse.coo_matrix((np.full(E, sign), (entry_point, rows)), shape=(n, E))
        mean_rows = sparse.coo_matrix((sign * space.weight[entry_point], (entry_ball, rows)), shape=(K, E))
        return sparse.vstack([point_rows, mean_rows])

    t_bound = sparse.coo_matrix((-inv_mass[entry_ball], (rows, entry_ball)), shape=(E, K))
    identity = sparse.identity(E, format="coo")
    b_eq = np.concatenate([g, np.zeros(K)])

    if formulation == "standard":
        A_eq = sparse.hstack([equality_block(1.0), sparse.coo_matrix((n + K, K))])
        A_ub = sparse.vstack([
            sparse.hstack([identity, t_bound]),
            sparse.hstack([-identity, t_bound]),
        ])
        cost = np.concatenate([np.zeros(E), np.ones(K)])
        bounds = [(None, None)] * E + [(0, None)] * K
    elif formulation == "split":
        zeros = sparse.coo_matrix((E, E))
        A_eq = sparse.hstack([equality_block(1.0), equality_block(-1.0), sparse.coo_matrix((n + K, K))])
        A_ub = sparse.vstack([
            sparse.hstack([identity, zeros, t_bound]),
            sparse.hstack([zeros, identity, t_bound]),
        ])
        cost = np.concatenate([np.zeros(2 * E), np.ones(K)])
        bounds = [(0, None)] * (2 * E + K)
    else:
        raise InvalidParameterError(f"Unknown formulation: {formulation}. Must be 'standard' or 'split'")
    return cost, A_ub.tocsr(), np.zeros(A_ub.shape[0]), A_eq.tocsr(), b_eq, bounds, E


def dual_oscillation_norm(space: FiniteSpace, f: np.ndarray, balls: list[Ball]) -> float:
    """max over balls of min_c (1/mu(B)) sum_B w|f - c|, the dual unit-ball gauge."""
    worst = 0.0
    for B in balls:
        vals = f[B.members]
        w = space.weight[B.members]
        costs = np.abs(vals[:, None] - vals[None, :]) @ w
        worst = max(worst, float(costs.min()) / B.mass)
    return worst


def h1_norm(space: FiniteSpace, g: np.ndarray, b: float, r: float = math.inf,
            family: BallFamily | None = None, formulation: str = "standard") -> H1NormResult:
    """
    ||g||_{H^1_b}: min sum_B t_B with g = sum_B g_B, g_B supported in B,
    weighted mean zero and |g_B| <= t_B/mu(B).

    Infeasibility is reported in the result, not raised.

    Raises:
        InvalidParameterError: finite r (not implemented) or unknown formulation.
    """
    if not math.isinf(r):
        raise InvalidParameterError("Only r = inf atoms are implemented for h1_norm")
    g = np.asarray(g, dtype=float)
    if family is None:
        family = enumerate_balls(space, b)
    balls = _lp_balls(family)

    if not np.any(g):
        return H1NormResult(0.0, True, "optimal", b, 0.0, 0.0, np.zeros(space.n), 0.0,
                            AtomicDecomposition([], b), formulation)
    l1 = lp_norm(space, g, 1.0)
    if abs(inner(space, g, np.ones(space.n))) > 1e-12 * l1 or not balls:
        return H1NormResult(math.inf, False, "infeasible", b, formulation=formulation)

    cost, A_ub, b_ub, A_eq, b_eq, bounds, E = _build_program(space, g, balls, formulation)
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                  method="highs", options=LP_OPTIONS)
    if res.status == 2:
        return H1NormResult(math.inf, False, "infeasible", b, formulation=formulation)
    if res.status != 0:
        return H1NormResult(math.nan, False, f"failed: {res.message}", b, formulation=formulation)

    phi = np.asarray(res.eqlin.marginals[:space.n])
    dual_function = phi / space.weight
    dual = math.fsum(phi * g)
    x = res.x
    pieces = x[:E] if formulation == "standard" else x[:E] - x[E:2 * E]
    t = x[-len(balls):]
    terms, offset = [], 0
    for B, t_B in zip(balls, t):
        piece = pieces[offset:offset + B.size]
        offset += B.size
        if t_B > 1e-12:
            terms.append((float(t_B), Atom(B, piece / t_B)))
    return H1NormResult(
        value=float(res.fun),
        feasible=True,
        status="optimal",
        b=b,
        primal=float(res.fun),
        dual=dual,
        dual_function=dual_function,
        dual_norm=dual_oscillation_norm(space, dual_function, balls),
        decomposition=AtomicDecomposition(terms, b),
        formulation=formulation,
    )


@dataclass
class TrivialityReport:
    """Counts for H^1_1 = {0} and for local functions being in H^1_2 on a unit-distance graph."""
    samples: int
    infeasible_at_one: int
    local_samples: int
    feasible_at_two: int
    max_local_norm: float = 0.0

    @property
    def passed(self) -> bool:
        return (self.infeasible_at_one == self.samples
                and self.local_samples > 0
                and self.feasible_at_two == self.local_samples)

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "infeasibleAtOne": self.infeasible_at_one,
            "localSamples": self.local_samples,
            "feasibleAtTwo": self.feasible_at_two,
            "maxLocalNorm": self.max_local_norm,
            "passed": self.passed,
        }


def triviality_check(space: FiniteSpace, n_samples: int, seed: int) -> TrivialityReport:
    """
    On a graph with unit edges, balls of radius <= 1 are singletons, so every
    nonzero mean-zero g is infeasible at b = 1. A mean-zero g supported in a
    ball of radius 2 is a multiple of an atom, so it is feasible at b = 2.

    Raises:
        InvalidParameterError: space without adjacency, fewer than 2 points or n_samples < 1.
    """
    if not space.has_adjacency:
        raise InvalidParameterError(f"Space '{space.name}' is not a unit-distance graph")
    if space.n < 2:
        raise InvalidParameterError("Triviality check needs at least 2 points")
    if n_samples < 1:
        raise InvalidParameterError(f"n_samples must be >= 1, got {n_samples}")
    rng = np.random.default_rng(seed)

    family_one = enumerate_balls(space, 1.0)
    infeasible = 0
    for _ in range(n_samples):
        g = rng.standard_normal(space.n)
        g -= mean_value(space, g)
        if not h1_norm(space, g, 1.0, family=family_one).feasible:
            infeasible += 1

    family_two = enumerate_balls(space, 2.0)
    local = [B for B in family_two.balls if B.size >= 2]
    feasible, worst = 0, 0.0
    for _ in range(n_samples if local else 0):
        atom = random_atom(space, local[int(rng.integers(len(local)))], rng)
        g = rng.uniform(0.5, 2.0) * atom.as_function(space.n)
        result = h1_norm(space, g, 2.0, family=family_two)
        if result.feasible:
            feasible += 1
            worst = max(worst, result.value)
    return TrivialityReport(n_samples, infeasible, n_samples if local else 0, feasible, worst)


# =============================================================================
# ATOM SPLITTING
# =============================================================================

def enclosing_ball(space: FiniteSpace, members: np.ndarray, cap: float) -> Ball | None:
    """Smallest-reach ball containing a point set, with radius <= cap, if one exists."""
    reach = space.dist[:, members].max(axis=1)
    c = int(np.argmin(reach))
    if not reach[c] < cap:
        return None
    return ball(space, c, min(next_distance(space, c, reach[c]), cap))


def _split_once(space: FiniteSpace, atom: Atom, beta: float, beta_prime: float) -> list[tuple[float, Atom]]:
    B = atom.support
    d = space.dist
    a = atom.as_function(space.n)
    s = beta_prime * B.radius
    cap = (beta + beta_prime) * B.radius

    net: list[int] = []
    for x in B.members:
        if all(d[x, z] >= s for z in net):
            net.append(int(x))
    pieces = [d[z] < s for z in net]
    cover = np.sum(pieces, axis=0)
    core = d[B.center] < s
    core_mass = space.measure(core)

    out = []
    for z, piece in zip(net, pieces):
        psi = np.where(piece, 1.0 / np.maximum(cover, 1), 0.0)
        local = a * psi
        phi = local - (math.fsum(space.weight * local) / core_mass) * core
        if not np.any(phi):
            continue
        support = enclosing_ball(space, np.flatnonzero(piece | core), cap)
        if support is None:
            witness = amp_witness(space, B.center, z, beta)
            reason = "no midpoint ball" if witness is None else "midpoint ball too large"
            raise AmpFailureError(
                f"{reason} for pair ({space.points[B.center]}, {space.points[z]}) "
                f"at distance {d[B.center, z]} with beta={beta}",
                (B.center, z),
            )
        lam = float(np.abs(phi).max()) * support.mass
        out.append((lam, Atom(support, phi[support.members] / lam, atom.r)))
    return out


def split_constants(space: FiniteSpace, c: float, b_big: float, beta: float, r0: float,
                    family: BallFamily | None = None) -> SplitConstants:
    """
    beta', the doubling constants, the normalization 2*D1*D2, the net bound and the cap.

    The net bound counts beta' r_B-separated centers in B. The disjoint balls
    B(z_j, beta' r_B / 2) all lie in B(c_B, (1 + beta'/2) r_B), which lies in
    B(z_j, (2 + beta'/2) r_B), so there are at most D_{4/beta' + 1, b_big}.
    """
    beta_prime = 0.5 * (r0 / c + (1.0 - beta))
    if family is None:
        family = enumerate_balls(space, b_big)
    d_outer = doubling_constant(space, max(2.0, 1.0 / beta_prime), b_big, family).value
    d_inner = doubling_constant(space, max(2.0, beta / beta_prime + 1.0), b_big, family).value
    net_bound = doubling_constant(space, 4.0 / beta_prime + 1.0, b_big, family).value
    cap = math.ceil(math.log(c / b_big) / math.log(beta + beta_prime)) + 2
    return SplitConstants(beta_prime, d_outer, d_inner, 2.0 * d_outer * d_inner, net_bound, cap)


def split_atom(space: FiniteSpace, atom: Atom, c: float, b_big: float, beta: float,
               r0: float, constants: SplitConstants | None = None) -> AtomicDecomposition:
    """
    Rewrite an atom on a ball of radius <= b_big as atoms on balls of radius <= c.

    Each pass covers the support B by balls B_j of radius beta'*r_B around
    a maximal separated net, cuts the atom with the normalized indicator
    partition, restores cancellation on B_0 = B(c_B, beta'*r_B) and places
    each piece on the smallest ball around B_j and B_0, whose radius stays
    below (beta+beta')*r_B.

    Raises:
        InvalidParameterError: c <= R0/(1-beta), c >= b_big or support radius > b_big.
        AmpFailureError: a piece cannot be re-supported (missing midpoint ball).
        NonContractionError: more passes than the iteration cap.
    """
    if not 0.5 < beta < 1:
        raise InvalidParameterError(f"beta must lie in (1/2, 1), got {beta}")
    if not r0 / (1 - beta) < c < b_big:
        raise InvalidParameterError(
            f"Need R0/(1-beta) < c < b_big, got R0/(1-beta)={r0 / (1 - beta):.6g}, c={c}, b_big={b_big}"
        )
    if atom.support.radius > b_big:
        raise InvalidParameterError(f"Atom radius {atom.support.radius} exceeds b_big={b_big}")
    if constants is None:
        constants = split_constants(space, c, b_big, beta, r0)
    constants = SplitConstants(constants.beta_prime, constants.d_outer, constants.d_inner,
                               constants.normalization, constants.net_bound, constants.iteration_cap)

    terms = [(1.0, atom)]
    while any(a.support.radius > c for _, a in terms):
        if constants.passes >= constants.iteration_cap:
            raise NonContractionError(
                f"Atom splitting did not reach radius {c} within {constants.iteration_cap} passes"
            )
        refined = []
        for lam, a in terms:
            if a.support.radius <= c:
                refined.append((lam, a))
                continue
            for mu, piece in _split_once(space, a, beta, constants.beta_prime):
                refined.append((lam * mu, piece))
        terms = refined
        constants.passes += 1
    return AtomicDecomposition(terms, c, constants)


# =============================================================================
# SCALE EQUIVALENCE
# =============================================================================

@dataclass
class ScaleEquivalence:
    """max ratio of two scale norms plus the one-directional ordering check."""
    ratio: float
    ordering_holds: bool
    rows: list[dict] = field(default_factory=list)
    hard_failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.ordering_holds and not self.hard_failures

    def to_dict(self) -> dict:
        return {
            "ratio": self.ratio,
            "orderingHolds": self.ordering_holds,
            "hardFailures": self.hard_failures,
            "rows": self.rows,
        }


def _check_scales(b: float, c: float, r0: float, beta: float) -> None:
    if not 0.5 < beta < 1:
        raise InvalidParameterError(f"beta must lie in (1/2, 1), got {beta}")
    if not r0 / (1 - beta) < c < b:
        raise InvalidParameterError(
            f"Need R0/(1-beta) < c < b, got R0/(1-beta)={r0 / (1 - beta):.6g}, c={c}, b={b}"
        )


def h1_scale_equivalence(space: FiniteSpace, functions: list[np.ndarray], b: float, c: float,
                         r0: float, beta: float) -> ScaleEquivalence:
    """
    max ||g||_{H_c} / ||g||_{H_b} over a corpus, with ||g||_{H_b} <= ||g||_{H_c}.

    Raises:
        AmpFailureError: the space fails the midpoint check at (R0, beta).
    """
    _check_scales(b, c, r0, beta)
    amp = amp_check(space, r0, beta)
    if not amp.passed:
        x, y, _, _ = amp.violations[0]
        raise AmpFailureError(
            f"Scale equivalence needs the midpoint property at R0={r0}, beta={beta}; "
            f"pair ({space.points[x]}, {space.points[y]}) fails",
            (x, y),
        )
    family_b, family_c = enumerate_balls(space, b), enumerate_balls(space, c)
    report = ScaleEquivalence(0.0, True)
    for i, g in enumerate(functions):
        hb = h1_norm(space, g, b, family=family_b)
        hc = h1_norm(space, g, c, family=family_c)
        report.rows.append({"index": i, "hB": hb.value, "hC": hc.value})
        if not hb.feasible:
            continue
        if not hc.feasible:
            report.hard_failures.append(f"function {i}: feasible at b={b} but not at c={c}")
            continue
        if hb.value > hc.value * (1 + LP_GAP_TOLERANCE) + LP_GAP_TOLERANCE:
            report.ordering_holds = False
        if hb.value > 0:
            report.ratio = max(report.ratio, hc.value / hb.value)
    return report


# =============================================================================
# BMO
# =============================================================================

@dataclass
class BmoValue:
    """N_b^q(f) with the ball attaining it."""
    q: float
    b: float
    value: float
    ball: Ball | None = None

    def to_dict(self, space: FiniteSpace) -> dict:
        return {
            "q": self.q,
            "b": self.b,
            "value": self.value,
            "ball": self.ball.to_dict(space) if self.ball else None,
        }


def bmo_norm(space: FiniteSpace, f: np.ndarray, q: float = 1.0, b: float = 1.0,
             family: BallFamily | None = None) -> BmoValue:
    """N_b^q(f) = max over balls of radius <= b of the L^q mean oscillation."""
    if q < 1:
        raise InvalidParameterError(f"q must be >= 1, got {q}")
    if family is None:
        family = enumerate_balls(space, b)
    osc = mean_oscillations(space, family, f, q)
    i = int(np.argmax(osc))
    return BmoValue(float(q), float(b), float(osc[i]), family.balls[i])


def bmo_scale_equivalence(space: FiniteSpace, functions: list[np.ndarray], q: float,
                          b: float, c: float, r0: float, beta: float) -> ScaleEquivalence:
    """max N_b^q / N_c^q over a corpus (constants skipped), with N_c <= N_b."""
    _check_scales(b, c, r0, beta)
    family_b, family_c = enumerate_balls(space, b), enumerate_balls(space, c)
    report = ScaleEquivalence(1.0, True)
    for i, f in enumerate(functions):
        nb = bmo_norm(space, f, q, b, family_b).value
        nc = bmo_norm(space, f, q, c, family_c).value
        report.rows.append({"index": i, "nB": nb, "nC": nc})
        if nc > nb * (1 + 1e-12):
            report.ordering_holds = False
        if nb == 0:
            continue
        report.ratio = max(report.ratio, nb / nc if nc > 0 else math.inf)
    return report


# =============================================================================
# JOHN-NIRENBERG
# =============================================================================

@dataclass
class JNReport:
    """Worst-ball level-set ratios and the fitted exponential envelope J e^{-eta s/N}."""
    s_grid: list[float]
    ratios: list[float]
    worst_balls: list[Ball]
    trace: list[float]
    norm: float
    J: float
    eta: float
    degenerate: bool
    covers_range: bool

    @property
    def envelope_holds(self) -> bool:
        return all(
            r <= self.J * math.exp(-self.eta * s / self.norm) * (1 + 1e-12)
            for s, r in zip(self.s_grid, self.ratios)
        )

    def moment_bound(self, q: float) -> float:
        """Bound on N^q_{b0}(f) implied by the envelope: (J Gamma(q+1))^(1/q) N / eta."""
        return (self.J * gamma(q + 1)) ** (1.0 / q) * self.norm / self.eta

    def records(self, space: FiniteSpace) -> list[dict]:
        return [
            {"s": s, "ratio": r, "traceRatio": t, "worstCenter": space.points[B.center],
             "worstRadius": B.radius}
            for s, r, t, B in zip(self.s_grid, self.ratios, self.trace, self.worst_balls)
        ]

    def to_dict(self, space: FiniteSpace) -> dict:
        return {
            "norm": self.norm,
            "J": self.J,
            "eta": self.eta,
            "degenerate": self.degenerate,
            "coversRange": self.covers_range,
            "envelopeHolds": self.envelope_holds,
            "rows": self.records(space),
        }


def default_b0(space: FiniteSpace, r0: float, beta: float) -> float:
    """1.1 * R0/(1-beta), rounded up to the next distinct distance of the space."""
    target = 1.1 * r0 / (1 - beta)
    distances = np.unique(space.dist[np.isfinite(space.dist)])
    above = distances[distances >= target]
    return float(above.min()) if above.size else target


def jn_experiment(space: FiniteSpace, f: np.ndarray, b0: float, c1: float,
                  s_grid: list[float] | None = None) -> JNReport:
    """
    Level-set decay of |f - f_B| over balls of radius <= b0.

    N(f) is the mean oscillation at scale 2*max(C1, b0). eta comes from a
    least-squares slope of log ratios where the ratio lies in (1e-6, 1)
    (1.0 when fewer than two such rows exist); J is then the smallest
    constant whose envelope covers every row up to the next grid point.
    """
    f = np.asarray(f, dtype=float)
    norm = bmo_norm(space, f, 1.0, 2.0 * max(c1, b0)).value
    family = enumerate_balls(space, b0)
    deviation = np.abs(f[None, :] - ball_averages(space, family, f)[:, None])
    deviation = np.where(family.masks, deviation, -np.inf)
    max_dev = float(deviation.max())
    if s_grid is None:
        s_grid = list(np.linspace(0.0, max_dev, 33))
    s_grid = sorted(float(s) for s in s_grid)

    weighted = family.masks * space.weight
    ratios, worst, per_ball = [], [], []
    for s in s_grid:
        exceed = np.sum(np.where(deviation > s, weighted, 0.0), axis=1) / family.masses
        i = int(np.argmax(exceed))
        ratios.append(float(exceed[i]))
        worst.append(family.balls[i])
        per_ball.append(exceed)
    first = int(np.argmax(per_ball[0])) if per_ball else 0
    trace = [float(row[first]) for row in per_ball]
    covers = bool(s_grid) and s_grid[0] <= 0 and s_grid[-1] >= max_dev

    if norm == 0 or not any(r > 0 for r in ratios):
        return JNReport(s_grid, ratios, worst, trace, norm, 0.0, 1.0, True, covers)

    s_arr, r_arr = np.array(s_grid), np.array(ratios)
    usable = (r_arr > 1e-6) & (r_arr < 1)
    eta = 1.0
    if np.unique(s_arr[usable]).size >= 2:
        slope, _ = np.polyfit(s_arr[usable] / norm, np.log(r_arr[usable]), 1)
        if np.isfinite(slope) and slope < 0:
            eta = float(-slope)
    J = 0.0
    for i, (s, r) in enumerate(zip(s_grid, ratios)):
        if r > 0:
            reach = s_grid[i + 1] if i + 1 < len(s_grid) else s
            J = max(J, r * math.exp(eta * reach / norm))
    return JNReport(s_grid, ratios, worst, trace, norm, J, eta, False, covers)


# =============================================================================
# DUALITY
# =============================================================================

@dataclass
class PairingCheck:
    """|<f,g>| against N^1_b(f) * ||g||_{H^1_b}, plus the LP certificate."""
    pairing: float
    bmo: float
    h1: float
    holds: bool
    gap: float | None
    dual_norm: float | None
    skipped: bool = False

    @property
    def bound(self) -> float:
        return self.bmo * self.h1

    def to_dict(self) -> dict:
        return {
            "pairing": self.pairing,
            "bmo": self.bmo,
            "h1": self.h1,
            "bound": self.bound,
            "holds": self.holds,
            "gap": self.gap,
            "dualNorm": self.dual_norm,
            "skipped": self.skipped,
        }


def duality_pairing_check(space: FiniteSpace, f: np.ndarray, g: np.ndarray, b: float,
                          family: BallFamily | None = None,
                          h1: H1NormResult | None = None) -> PairingCheck:
    """Check |<f,g>| <= N^1_b(f) ||g||_{H^1_b}; infeasible g is skipped."""
    if family is None:
        family = enumerate_balls(space, b)
    if h1 is None:
        h1 = h1_norm(space, g, b, family=family)
    pairing = inner(space, f, g)
    if not h1.feasible:
        return PairingCheck(pairing, math.nan, math.inf, True, None, None, skipped=True)
    bmo = bmo_norm(space, f, 1.0, b, family).value
    bound = bmo * h1.value
    holds = abs(pairing) <= bound + 1e-9 * max(1.0, bound)
    return PairingCheck(pairing, bmo, h1.value, holds, h1.gap, h1.dual_norm)


def l2_sandwich(space: FiniteSpace, f: np.ndarray, b: float) -> dict | None:
    """
    For mean-zero f: ||f||_2^2 = <f,f> <= N^1_b(f) ||f||_{H^1_b}.

    Returns the three quantities and their ratio, or None when f is not in
    H^1_b.
    """
    centered = np.asarray(f, dtype=float) - mean_value(space, f)
    family = enumerate_balls(space, b)
    h1 = h1_norm(space, centered, b, family=family)
    if not h1.feasible:
        return None
    bmo = bmo_norm(space, centered, 1.0, b, family).value
    l2_sq = inner(space, centered, centered)
    bound = bmo * h1.value
    return {"l2Squared": l2_sq, "bmo": bmo, "h1": h1.value,
            "ratio": l2_sq / bound if bound > 0 else 0.0}
