#!/usr/bin/env python3
"""
Kernel operators on finite spaces: spectral multipliers of the weighted
graph Laplacian, Hormander-type integral constants of their kernels and
sampled lower bounds for the H^1 -> L^1 and L^inf -> BMO operator norms.
"""
import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import eigh, svdvals

from errors import InvalidParameterError, SpaceParseError
from hardy_bmo import Atom, bmo_norm, random_atom
from space import (
    MAX_DENSE_EIGEN,
    Ball,
    FiniteSpace,
    ball,
    enumerate_balls,
    laplacian,
    lp_norm,
)

SYMMETRY_TOLERANCE = 1e-12


# =============================================================================
# KERNEL OPERATORS
# =============================================================================

@dataclass(frozen=True, eq=False)
class KernelOperator:
    """
    (Tf)(x) = sum_{y != x} k(x,y) f(y) w(y) + diagonal(x) f(x).

    The kernel is stored with a zero diagonal; the on-diagonal part of T is
    carried separately so that T stays exact while kernel integrals ignore it.
    """
    kernel: np.ndarray
    diagonal: np.ndarray
    weight: np.ndarray
    name: str = ""

    @property
    def n(self) -> int:
        return self.kernel.shape[0]

    def matrix(self) -> np.ndarray:
        """Dense matrix M with Tf = M @ f."""
        return self.kernel * self.weight[None, :] + np.diag(self.diagonal)

    def apply(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f)
        return self.kernel @ (f * self.weight) + self.diagonal * f

    def compose(self, other: "KernelOperator") -> "KernelOperator":
        return KernelOperator.from_matrix(self.matrix() @ other.matrix(), self.weight,
                                          f"{self.name}*{other.name}")

    def is_self_adjoint(self, tol: float = SYMMETRY_TOLERANCE) -> bool:
        scale = max(1.0, float(np.abs(self.kernel).max(initial=0.0)))
        return bool(np.allclose(self.kernel, self.kernel.conj().T, rtol=0.0, atol=tol * scale))

    @classmethod
    def from_kernel(cls, kernel: np.ndarray, weight: np.ndarray, name: str = "") -> "KernelOperator":
        """Operator of a full kernel; its diagonal becomes the multiplier k(x,x) w(x)."""
        kernel = np.array(kernel, copy=True)
        weight = np.asarray(weight, dtype=float)
        diagonal = np.diag(kernel) * weight
        np.fill_diagonal(kernel, 0)
        return cls(kernel, diagonal, weight, name)

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, weight: np.ndarray, name: str = "") -> "KernelOperator":
        weight = np.asarray(weight, dtype=float)
        kernel = np.array(matrix, copy=True) / weight[None, :]
        diagonal = np.diag(matrix).copy()
        np.fill_diagonal(kernel, 0)
        return cls(kernel, diagonal, weight, name)

    @classmethod
    def identity(cls, weight: np.ndarray) -> "KernelOperator":
        n = len(weight)
        return cls(np.zeros((n, n)), np.ones(n), np.asarray(weight, dtype=float), "identity")

    @classmethod
    def zero(cls, weight: np.ndarray) -> "KernelOperator":
        n = len(weight)
        return cls(np.zeros((n, n)), np.zeros(n), np.asarray(weight, dtype=float), "zero")


def operator_to_dict(space: FiniteSpace, op: KernelOperator) -> dict:
    return {
        "name": op.name,
        "pointIds": list(space.points),
        "kernel": op.kernel.tolist(),
        "diagonal": op.diagonal.tolist(),
    }


def operator_from_dict(space: FiniteSpace, doc: dict) -> KernelOperator:
    """Rebuild an operator; point ids must match the space's ordering."""
    if list(doc.get("pointIds", [])) != list(space.points):
        raise SpaceParseError("pointIds do not match the space", "/pointIds")
    kernel = np.asarray(doc.get("kernel"), dtype=float)
    if kernel.shape != (space.n, space.n):
        raise SpaceParseError(f"expected a {space.n}x{space.n} matrix", "/kernel")
    diagonal = np.asarray(doc.get("diagonal", np.zeros(space.n)), dtype=float)
    if diagonal.shape != (space.n,):
        raise SpaceParseError(f"expected {space.n} entries", "/diagonal")
    np.fill_diagonal(kernel, 0)
    return KernelOperator(kernel, diagonal, space.weight.copy(), doc.get("name", ""))


# =============================================================================
# SPECTRAL MULTIPLIERS
# =============================================================================

@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigenpairs of W^{-1/2} (D - A) W^{-1/2}; L = W^{-1} (D - A) shares its spectrum."""
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sqrt_weight: np.ndarray


def spectral_decomposition(space: FiniteSpace) -> SpectralDecomposition:
    if not space.has_adjacency:
        raise InvalidParameterError("Spectral multipliers need a space with adjacency")
    if space.n > MAX_DENSE_EIGEN:
        raise InvalidParameterError(
            f"Dense eigendecomposition limited to {MAX_DENSE_EIGEN} points, got {space.n}"
        )
    root = np.sqrt(space.weight)
    symmetric = laplacian(space) / root[:, None] / root[None, :]
    values, vectors = eigh(symmetric)
    return SpectralDecomposition(np.clip(values, 0.0, None), vectors, root)


def weighted_laplacian(space: FiniteSpace) -> KernelOperator:
    """L = W^{-1} (D - A), self-adjoint on L^2(mu)."""
    L = laplacian(space) / space.weight[:, None]
    return KernelOperator.from_matrix(L, space.weight, "laplacian")


def spectral_multiplier(space: FiniteSpace, m: Callable[[np.ndarray], np.ndarray],
                        decomposition: SpectralDecomposition | None = None,
                        name: str = "multiplier") -> KernelOperator:
    """
    m(L) by full spectral calculus.

    Raises:
        InvalidParameterError: no adjacency, too many points, or m not finite
            at some eigenvalue.
    """
    if decomposition is None:
        decomposition = spectral_decomposition(space)
    lam = decomposition.eigenvalues
    values = np.asarray(m(lam), dtype=float) * np.ones_like(lam)
    if not np.all(np.isfinite(values)):
        bad = lam[~np.isfinite(values)]
        raise InvalidParameterError(f"Multiplier is not finite at eigenvalue {bad[0]:.6g}")
    U, root = decomposition.eigenvectors, decomposition.sqrt_weight
    matrix = ((U * values) @ U.T) * (root[None, :] / root[:, None])
    return KernelOperator.from_matrix(matrix, space.weight, name)


def heat_multiplier(t: float) -> Callable:
    if not t > 0:
        raise InvalidParameterError(f"Heat time must be positive, got {t}")
    return lambda lam: np.exp(-t * lam)


def resolvent_multiplier(s: float) -> Callable:
    if not s > 0:
        raise InvalidParameterError(f"Resolvent shift must be positive, got {s}")
    return lambda lam: 1.0 / (s + lam)


def polynomial_multiplier(coeffs: list[float]) -> Callable:
    """sum_i coeffs[i] * lam^i."""
    if not coeffs:
        raise InvalidParameterError("Polynomial multiplier needs at least one coefficient")
    return lambda lam: np.polynomial.polynomial.polyval(lam, coeffs)


def band_limited_multiplier(cutoff: float, width: float = 0.5) -> Callable:
    """Indicator of [0, cutoff] with a cos^2 taper over (cutoff, cutoff + width)."""
    if not cutoff >= 0 or not width > 0:
        raise InvalidParameterError(f"Need cutoff >= 0 and width > 0, got {cutoff}, {width}")

    def m(lam):
        x = np.clip((np.asarray(lam) - cutoff) / width, 0.0, 1.0)
        return np.cos(0.5 * math.pi * x) ** 2
    return m


MULTIPLIER_PRESETS = {
    "heat": lambda p: heat_multiplier(p.get("t", 1.0)),
    "resolvent": lambda p: resolvent_multiplier(p.get("s", 1.0)),
    "polynomial": lambda p: polynomial_multiplier(p.get("coeffs", [0.0, 1.0])),
    "band_limited": lambda p: band_limited_multiplier(p.get("cutoff", 1.0), p.get("width", 0.5)),
}


def preset_multiplier(space: FiniteSpace, kind: str, params: dict | None = None,
                      decomposition: SpectralDecomposition | None = None) -> KernelOperator:
    """Build a named multiplier preset (heat, resolvent, polynomial, band_limited)."""
    if kind not in MULTIPLIER_PRESETS:
        raise InvalidParameterError(
            f"Unknown multiplier: {kind}. Must be one of {sorted(MULTIPLIER_PRESETS)}"
        )
    params = params or {}
    label = kind + "".join(f" {k}={v}" for k, v in sorted(params.items()))
    return spectral_multiplier(space, MULTIPLIER_PRESETS[kind](params), decomposition, label)


# =============================================================================
# HORMANDER CONSTANTS
# =============================================================================

@dataclass
class HormanderConstants:
    """nu (column differences) and upsilon (row differences) with their witnesses."""
    b: float
    nu: float
    upsilon: float
    nu_witness: tuple[Ball, int, int] | None = None
    upsilon_witness: tuple[Ball, int, int] | None = None
    strict: bool = False

    def to_dict(self, space: FiniteSpace) -> dict:
        def witness(w):
            if w is None:
                return None
            B, p, q = w
            return {"ball": B.to_dict(space), "pair": [space.points[p], space.points[q]]}

        return {
            "b": self.b,
            "nu": self.nu,
            "upsilon": self.upsilon,
            "strict": self.strict,
            "nuWitness": witness(self.nu_witness),
            "upsilonWitness": witness(self.upsilon_witness),
        }


def _outside_double(space: FiniteSpace, B: Ball, strict: bool) -> np.ndarray:
    row = space.dist[B.center]
    if strict:
        return row > 2.0 * row[B.members].max()
    return ~ball(space, B.center, 2.0 * B.radius).mask(space.n)


def _worst_pair(block: np.ndarray, w: np.ndarray) -> tuple[float, int, int]:
    """max over column pairs (i, j) of sum_x w(x) |block[x,i] - block[x,j]|."""
    best, bi, bj = 0.0, 0, 0
    for i in range(block.shape[1]):
        sums = w @ np.abs(block[:, [i]] - block)
        j = int(np.argmax(sums))
        if sums[j] > best:
            best, bi, bj = float(sums[j]), i, j
    return best, bi, bj


def hormander_constants(space: FiniteSpace, op: KernelOperator, b: float,
                        strict: bool = False) -> HormanderConstants:
    """
    nu = sup_B sup_{y,y' in B} int_{(2B)^c} |k(x,y) - k(x,y')| dmu(x) and
    upsilon, the same with the kernel transposed.

    2B is the same-center ball of twice the canonical radius; with strict=True
    it is {d(c, .) <= 2 max_B d(c, .)}, the smallest admissible doubling.
    """
    family = enumerate_balls(space, b)
    w = space.weight
    k = op.kernel
    out = HormanderConstants(b, 0.0, 0.0, strict=strict)
    for B in family.balls:
        if B.size < 2:
            continue
        outside = _outside_double(space, B, strict)
        if not outside.any():
            continue
        Y = B.members
        wo = w[outside]
        nu, i, j = _worst_pair(k[np.ix_(outside, Y)], wo)
        if nu > out.nu or out.nu_witness is None:
            out.nu, out.nu_witness = nu, (B, int(Y[i]), int(Y[j]))
        ups, i, j = _worst_pair(k[np.ix_(Y, outside)].T, wo)
        if ups > out.upsilon or out.upsilon_witness is None:
            out.upsilon, out.upsilon_witness = ups, (B, int(Y[i]), int(Y[j]))
    return out


# =============================================================================
# OPERATOR NORMS
# =============================================================================

def l2_norm(space: FiniteSpace, op: KernelOperator) -> float:
    """||T||_{L^2(mu) -> L^2(mu)} as the top singular value of W^{1/2} M W^{-1/2}."""
    root = np.sqrt(space.weight)
    weighted = op.matrix() * (root[:, None] / root[None, :])
    return float(svdvals(weighted)[0]) if space.n else 0.0


@dataclass
class NormEstimate:
    """Sampled lower bound for an operator norm."""
    value: float
    samples: int
    kind: str
    witness: str = ""

    def to_dict(self) -> dict:
        return {"value": self.value, "samples": self.samples, "kind": self.kind,
                "witness": self.witness, "bound": "lower"}


def two_block_atom(space: FiniteSpace, support: Ball, rng: np.random.Generator) -> Atom:
    """+/- constant blocks on a random split of the support, balanced to mean zero."""
    members = support.members
    w = space.weight[members]
    order = rng.permutation(members.size)
    cut = int(rng.integers(1, members.size))
    plus = np.zeros(members.size, dtype=bool)
    plus[order[:cut]] = True
    mass_plus, mass_minus = w[plus].sum(), w[~plus].sum()
    values = np.where(plus, 1.0 / mass_plus, -1.0 / mass_minus)
    return Atom(support, values / (np.abs(values).max() * support.mass))


def sign_atom(space: FiniteSpace, support: Ball, rng: np.random.Generator) -> Atom:
    """Random +/-1 vertex projected to mean zero and scaled to the size bound."""
    signs = rng.choice([-1.0, 1.0], size=support.members.size)
    w = space.weight[support.members]
    values = signs - (w @ signs) / support.mass
    peak = np.abs(values).max()
    if peak == 0:
        return two_block_atom(space, support, rng)
    return Atom(support, values / (peak * support.mass))


def default_atom_sampler(space: FiniteSpace, support: Ball, rng: np.random.Generator) -> Atom:
    samplers = (two_block_atom, sign_atom, random_atom)
    return samplers[int(rng.integers(len(samplers)))](space, support, rng)


def h1_to_l1_estimate(space: FiniteSpace, op: KernelOperator, b: float, n_samples: int = 200,
                      seed: int = 0, atom_sampler: Callable | None = None) -> NormEstimate:
    """max ||T a||_1 over sampled (1, inf)-atoms on balls of radius <= b."""
    if n_samples < 1:
        raise InvalidParameterError(f"n_samples must be >= 1, got {n_samples}")
    sampler = atom_sampler or default_atom_sampler
    rng = np.random.default_rng(seed)
    balls = [B for B in enumerate_balls(space, b).balls if B.size >= 2]
    if not balls:
        return NormEstimate(0.0, 0, "h1->l1")
    best, witness = 0.0, ""
    for _ in range(n_samples):
        B = balls[int(rng.integers(len(balls)))]
        atom = sampler(space, B, rng)
        value = lp_norm(space, op.apply(atom.as_function(space.n)), 1.0)
        if value > best:
            best, witness = value, f"atom on ball({space.points[B.center]}, {B.radius:.6g})"
    return NormEstimate(best, n_samples, "h1->l1", witness)


def linf_to_bmo_estimate(space: FiniteSpace, op: KernelOperator, b: float, n_samples: int = 200,
                         seed: int = 0) -> NormEstimate:
    """max N^1_b(T f) over sampled sign vectors f."""
    if n_samples < 1:
        raise InvalidParameterError(f"n_samples must be >= 1, got {n_samples}")
    rng = np.random.default_rng(seed)
    family = enumerate_balls(space, b)
    best = 0.0
    for _ in range(n_samples):
        f = rng.choice([-1.0, 1.0], size=space.n)
        best = max(best, bmo_norm(space, op.apply(f), 1.0, b, family).value)
    return NormEstimate(best, n_samples, "linf->bmo")


# =============================================================================
# CORPUS FIT
# =============================================================================

@dataclass
class CorpusFit:
    """Single constants C with estimate <= C (Hormander constant + ||T||_2) over a corpus."""
    h1_constant: float
    bmo_constant: float
    corpus_hash: str
    rows: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "h1Constant": self.h1_constant,
            "bmoConstant": self.bmo_constant,
            "corpusHash": self.corpus_hash,
            "rows": self.rows,
        }


def corpus_hash(space: FiniteSpace, operators: list[KernelOperator], b: float) -> str:
    digest = hashlib.sha256()
    digest.update(f"{space.name}|{space.n}|{b!r}".encode())
    for op in operators:
        digest.update(op.name.encode())
        digest.update(np.round(op.matrix(), 12).tobytes())
    return digest.hexdigest()


def fit_corpus_constant(space: FiniteSpace, operators: list[KernelOperator], b: float,
                        n_samples: int = 200, seed: int = 0) -> CorpusFit:
    """Fit C once per corpus; rows keep every ingredient so the fit can be re-derived."""
    rows = []
    h1_c, bmo_c = 0.0, 0.0
    for op in operators:
        hc = hormander_constants(space, op, b)
        norm2 = l2_norm(space, op)
        h1_est = h1_to_l1_estimate(space, op, b, n_samples, seed).value
        bmo_est = linf_to_bmo_estimate(space, op, b, n_samples, seed).value
        if hc.nu + norm2 > 0:
            h1_c = max(h1_c, h1_est / (hc.nu + norm2))
        if hc.upsilon + norm2 > 0:
            bmo_c = max(bmo_c, bmo_est / (hc.upsilon + norm2))
        rows.append({
            "operator": op.name, "nu": hc.nu, "upsilon": hc.upsilon, "l2Norm": norm2,
            "h1Estimate": h1_est, "bmoEstimate": bmo_est,
            "selfAdjoint": op.is_self_adjoint(),
        })
    return CorpusFit(h1_c, bmo_c, corpus_hash(space, operators, b), rows)
