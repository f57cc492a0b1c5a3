#!/usr/bin/env python3
"""
Dyadic local maximal function, local sharp function and the inequalities
tying them together: weak type (1,1), the good-lambda estimate and the
L^p lower bound for the sharp function.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from dyadic import DyadicForest, base_resolution
from errors import InvalidParameterError
from space import (
    BallFamily,
    FiniteSpace,
    doubling_constant,
    enumerate_balls,
    lp_norm,
    mean_oscillations,
    mean_value,
)


# =============================================================================
# MAXIMAL AND SHARP FUNCTIONS
# =============================================================================

def cube_averages(forest: DyadicForest, values: np.ndarray, k: int) -> np.ndarray:
    """Weighted average of `values` over every cube of resolution k."""
    w = forest.space.weight
    out = np.empty(len(forest.cubes(k)))
    for cube in forest.cubes(k):
        if cube.members.size == 1:
            out[cube.index] = values[cube.members[0]]
        else:
            out[cube.index] = math.fsum(w[cube.members] * values[cube.members]) / cube.mass
    return out


def maximal_function(forest: DyadicForest, f: np.ndarray, k: int) -> np.ndarray:
    """
    M_k f(x) = max over cubes Q of resolution >= k containing x of |f|_Q.

    Raises:
        InvalidParameterError: k outside the forest's resolution range.
    """
    forest.cubes(k)
    absf = np.abs(np.asarray(f))
    out = np.zeros(forest.space.n)
    for level in range(k, forest.k_max + 1):
        out = np.maximum(out, cube_averages(forest, absf, level)[forest.labels(level)])
    return out


def _containing_max(family: BallFamily, per_ball: np.ndarray) -> np.ndarray:
    return np.max(np.where(family.masks, per_ball[:, None], -np.inf), axis=0)


def sharp_function(space: FiniteSpace, f: np.ndarray, b: float,
                   family: BallFamily | None = None) -> np.ndarray:
    """f^{#,b}(x) = max over balls B of radius <= b containing x of the mean oscillation."""
    if family is None:
        family = enumerate_balls(space, b)
    return _containing_max(family, mean_oscillations(space, family, f))


def ball_maximal_function(space: FiniteSpace, f: np.ndarray, b: float,
                          family: BallFamily | None = None) -> np.ndarray:
    """Noncentred ball maximal function over balls of radius <= b."""
    if family is None:
        family = enumerate_balls(space, b)
    weighted = family.masks * space.weight
    averages = (weighted @ np.abs(np.asarray(f))) / family.masses
    return _containing_max(family, averages)


# =============================================================================
# WEAK TYPE (1,1)
# =============================================================================

@dataclass
class WeakTypeReport:
    """Worst alpha * mu({M_k f > alpha}) / ||f||_1 over a corpus."""
    constant: float
    worst_function: int | None
    worst_alpha: float | None
    per_function: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "constant": self.constant,
            "worstFunction": self.worst_function,
            "worstAlpha": self.worst_alpha,
            "perFunction": self.per_function,
        }


def weak_type_constant(forest: DyadicForest, f: np.ndarray, k: int) -> tuple[float, float | None]:
    """
    sup over alpha of alpha * mu({M_k f > alpha}) / ||f||_1 with proper level sets.

    M_k f takes finitely many values v_1 > ... > v_m; for alpha just below
    v_i the level set is {M_k f >= v_i}, so the sup is attained in the
    limit at one of the v_i. The smallest value is skipped because below it
    the level set is the whole space.
    """
    space = forest.space
    norm = lp_norm(space, f, 1.0)
    if norm == 0:
        raise InvalidParameterError("Weak-type check needs a nonzero function")
    M = maximal_function(forest, f, k)
    values = np.unique(M)[1:]
    best, best_alpha = 0.0, None
    for v in values:
        ratio = v * space.measure(M >= v) / norm
        if ratio > best:
            best, best_alpha = float(ratio), float(v)
    return best, best_alpha


def weak_type_check(forest: DyadicForest, functions: list[np.ndarray], k: int) -> WeakTypeReport:
    """Worst weak-type ratio over a corpus of nonzero functions."""
    report = WeakTypeReport(0.0, None, None)
    for i, f in enumerate(functions):
        value, alpha = weak_type_constant(forest, f, k)
        report.per_function.append(value)
        if value > report.constant or report.worst_function is None:
            report.constant, report.worst_function, report.worst_alpha = value, i, alpha
    return report


# =============================================================================
# GOOD-LAMBDA INEQUALITY
# =============================================================================

@dataclass
class GoodLambdaRow:
    alpha: float
    lhs: float
    rhs: float
    ratio: float | None
    status: str


@dataclass
class GoodLambdaReport:
    """Constants of the good-lambda estimate and its per-alpha verification."""
    constants: dict
    rows: list[GoodLambdaRow]
    base_resolution: int
    kappa: float
    provenance: str

    @property
    def vacuous(self) -> bool:
        return not self.constants["eta"] < 1

    @property
    def passed(self) -> bool:
        return all(row.status != "fail" for row in self.rows)

    @property
    def checked_rows(self) -> int:
        return sum(row.status in ("pass", "fail") for row in self.rows)

    @property
    def pass_fraction(self) -> float:
        checked = self.checked_rows
        if checked == 0:
            return 1.0
        return sum(row.status == "pass" for row in self.rows) / checked

    def records(self) -> list[dict]:
        return [
            {"alpha": r.alpha, "lhs": r.lhs, "rhs": r.rhs, "ratio": r.ratio, "status": r.status}
            for r in self.rows
        ]

    def to_dict(self) -> dict:
        return {
            "constants": self.constants,
            "baseResolution": self.base_resolution,
            "kappa": self.kappa,
            "provenance": self.provenance,
            "vacuous": self.vacuous,
            "passed": self.passed,
            "passFraction": self.pass_fraction,
            "rows": self.records(),
        }


def good_lambda_constants(forest: DyadicForest, i_hat: float, b0: float,
                          eta_prime: float = 0.5, eps: float | None = None) -> dict:
    """
    C0, b', sigma, D, eta', eps and eta for the good-lambda estimate.

    eps defaults to sigma^2 (1-eta') / (4D), which keeps eta below 1.
    D is D_{b'/a0, a0} with tau raised to at least 2; D is nondecreasing in
    tau, so the raised value only narrows the admissible eps range.

    Raises:
        InvalidParameterError: eta' outside (0,1) or eps outside (0, (1-eta')/(2D)).
    """
    if not 0 < eta_prime < 1:
        raise InvalidParameterError(f"eta_prime must lie in (0, 1), got {eta_prime}")
    delta, a0, c1 = forest.delta, forest.realized_a0, forest.realized_c1
    c0 = max(c1 / delta, delta)
    b_prime = max(b0, 2 * c1 + c0)
    sigma = (1.0 - math.exp(-i_hat * delta ** 3)) / 2.0
    D = doubling_constant(forest.space, max(2.0, b_prime / a0), a0).value
    limit = (1 - eta_prime) / (2 * D)
    if eps is None:
        eps = sigma ** 2 * (1 - eta_prime) / (4 * D)
    if not 0 < eps < limit:
        raise InvalidParameterError(f"eps must lie in (0, {limit:.6g}), got {eps}")
    eta = math.inf if sigma == 0 else 1 - sigma + 2 * eps * D / (sigma * (1 - eta_prime))
    return {
        "C0": c0, "bPrime": b_prime, "sigma": sigma, "D": D,
        "etaPrime": eta_prime, "eps": eps, "eta": eta,
    }


def good_lambda_check(forest: DyadicForest, f: np.ndarray, i_hat: float, b0: float,
                      eta_prime: float = 0.5, eps: float | None = None,
                      alpha_grid: list[float] | None = None,
                      i_hat_provenance: str = "exact") -> GoodLambdaReport:
    """
    Check mu(M f > a, f# <= eps a) <= eta mu(M f > eta' a) for every a.

    M is the maximal function with floor at the base resolution and f#
    the sharp function at scale b'. A row is "not-applicable" when the
    upper level set is the whole space or has an empty kappa-band with
    kappa = delta^(base+1), "empty" when both sides vanish and "vacuous"
    when eta >= 1.
    """
    space = forest.space
    constants = good_lambda_constants(forest, i_hat, b0, eta_prime, eps)
    eps, eta = constants["eps"], constants["eta"]
    base = base_resolution(forest)
    kappa = forest.delta ** (base + 1)
    M = maximal_function(forest, f, base)
    sharp = sharp_function(space, f, constants["bPrime"])

    if alpha_grid is None:
        alpha_grid = [float(v) for v in np.unique(M) if v > 0]
    rows = []
    for alpha in sorted(alpha_grid):
        if not alpha > 0:
            raise InvalidParameterError(f"alpha values must be positive, got {alpha}")
        upper = M > eta_prime * alpha
        lhs = space.measure((M > alpha) & (sharp <= eps * alpha))
        rhs = space.measure(upper)
        ratio = lhs / rhs if rhs > 0 else None
        if not upper.any():
            status = "empty"
        elif upper.all():
            status = "not-applicable"
        elif not (upper & (space.dist[:, ~upper].min(axis=1) <= kappa)).any():
            status = "not-applicable"
        elif not eta < 1:
            status = "vacuous"
        else:
            status = "pass" if lhs <= eta * rhs * (1 + 1e-12) else "fail"
        rows.append(GoodLambdaRow(float(alpha), lhs, rhs, ratio, status))
    return GoodLambdaReport(constants, rows, base, kappa, i_hat_provenance)


# =============================================================================
# SHARP-FUNCTION LOWER BOUND
# =============================================================================

@dataclass
class SharpLowerBound:
    """min ||f#||_p / ||f - mean||_p over a corpus, per p."""
    constant: float
    per_p: dict[float, float]
    skipped: int
    ratios: list[tuple[int, float, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "constant": self.constant,
            "perP": {str(p): v for p, v in self.per_p.items()},
            "skipped": self.skipped,
        }


def sharp_lower_bound(space: FiniteSpace, functions: list[np.ndarray], ps: list[float],
                      b_prime: float) -> SharpLowerBound:
    """
    Empirical constant C in ||f^{#,b'}||_p >= C ||f||_p for mean-zero f.

    Constant functions are skipped.

    Raises:
        InvalidParameterError: any p outside (1, inf).
    """
    for p in ps:
        if not 1 < p < math.inf:
            raise InvalidParameterError(f"p must lie in (1, inf), got {p}")
    family = enumerate_balls(space, b_prime)
    per_p = {float(p): math.inf for p in ps}
    ratios, skipped = [], 0
    for i, f in enumerate(functions):
        centered = np.asarray(f, dtype=float) - mean_value(space, f)
        if np.allclose(centered, 0.0, atol=1e-14):
            skipped += 1
            continue
        sharp = sharp_function(space, centered, b_prime, family)
        for p in ps:
            ratio = lp_norm(space, sharp, p) / lp_norm(space, centered, p)
            ratios.append((i, float(p), ratio))
            per_p[float(p)] = min(per_p[float(p)], ratio)
    constant = min(per_p.values()) if per_p else math.inf
    return SharpLowerBound(constant, per_p, skipped, ratios)
