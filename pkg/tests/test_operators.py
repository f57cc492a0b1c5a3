"""
Tests for operators.py - kernel operators, spectral multipliers and norm estimates.
"""
import itertools

import numpy as np
import pytest

from errors import InvalidParameterError, SpaceParseError
from operators import (
    KernelOperator,
    band_limited_multiplier,
    corpus_hash,
    fit_corpus_constant,
    h1_to_l1_estimate,
    heat_multiplier,
    hormander_constants,
    l2_norm,
    linf_to_bmo_estimate,
    operator_from_dict,
    operator_to_dict,
    polynomial_multiplier,
    preset_multiplier,
    resolvent_multiplier,
    spectral_decomposition,
    spectral_multiplier,
    weighted_laplacian,
)
from space import FiniteSpace, enumerate_balls, lp_norm


@pytest.fixture
def weighted_tree(tree33):
    """The depth-3 tree with uneven point weights."""
    weights = np.random.default_rng(7).uniform(0.5, 2.0, size=tree33.n)
    return FiniteSpace(tree33.points, tree33.dist, weights, tree33.edges,
                       tree33.interior, "weighted-tree")


@pytest.fixture
def decomposition(weighted_tree):
    return spectral_decomposition(weighted_tree)


# =============================================================================
# KERNEL OPERATORS
# =============================================================================

def test_apply_matches_matrix(weighted_tree, rng):
    """Test apply and the dense matrix agree."""
    kernel = rng.normal(size=(weighted_tree.n, weighted_tree.n))
    op = KernelOperator.from_kernel(kernel, weighted_tree.weight)
    f = rng.normal(size=weighted_tree.n)
    np.testing.assert_allclose(op.apply(f), op.matrix() @ f)
    np.testing.assert_allclose(op.matrix(), kernel * weighted_tree.weight[None, :])


def test_from_matrix_roundtrip(weighted_tree, rng):
    """Test from_matrix recovers the matrix exactly."""
    M = rng.normal(size=(weighted_tree.n, weighted_tree.n))
    op = KernelOperator.from_matrix(M, weighted_tree.weight)
    np.testing.assert_allclose(op.matrix(), M, atol=1e-14)
    assert np.all(np.diag(op.kernel) == 0)


def test_identity_and_zero(weighted_tree, rng):
    """Test the identity fixes functions and has L^2 norm 1; zero kills them."""
    f = rng.normal(size=weighted_tree.n)
    identity = KernelOperator.identity(weighted_tree.weight)
    np.testing.assert_array_equal(identity.apply(f), f)
    assert l2_norm(weighted_tree, identity) == pytest.approx(1.0, abs=1e-12)
    assert not np.any(KernelOperator.zero(weighted_tree.weight).apply(f))


def test_operator_dict_roundtrip(weighted_tree, decomposition):
    """Test operators survive serialization."""
    op = preset_multiplier(weighted_tree, "heat", {"t": 0.5}, decomposition)
    again = operator_from_dict(weighted_tree, operator_to_dict(weighted_tree, op))
    np.testing.assert_allclose(again.matrix(), op.matrix())
    assert again.name == op.name


def test_operator_from_dict_rejects_wrong_ids(weighted_tree, path3):
    """Test a kernel for another space is rejected with a pointer."""
    doc = operator_to_dict(path3, KernelOperator.identity(path3.weight))
    with pytest.raises(SpaceParseError) as exc:
        operator_from_dict(weighted_tree, doc)
    assert exc.value.pointer == "/pointIds"


# =============================================================================
# SPECTRAL MULTIPLIERS
# =============================================================================

def test_multiplier_one_is_identity(weighted_tree, decomposition):
    """Test m = 1 gives the identity."""
    op = spectral_multiplier(weighted_tree, lambda lam: np.ones_like(lam), decomposition)
    np.testing.assert_allclose(op.matrix(), np.eye(weighted_tree.n), atol=1e-10)


def test_multiplier_lambda_is_laplacian(weighted_tree, decomposition):
    """Test m(lambda) = lambda reproduces W^{-1}(D - A)."""
    op = spectral_multiplier(weighted_tree, polynomial_multiplier([0.0, 1.0]), decomposition)
    np.testing.assert_allclose(op.matrix(), weighted_laplacian(weighted_tree).matrix(), atol=1e-10)


def test_heat_preserves_constants(weighted_tree, decomposition):
    """Test heat operators have row sums 1."""
    op = spectral_multiplier(weighted_tree, heat_multiplier(0.7), decomposition)
    np.testing.assert_allclose(op.apply(np.ones(weighted_tree.n)), 1.0, atol=1e-10)


def test_heat_semigroup(weighted_tree, decomposition):
    """Test e^{-sL} e^{-tL} = e^{-(s+t)L}."""
    a = spectral_multiplier(weighted_tree, heat_multiplier(0.3), decomposition)
    b = spectral_multiplier(weighted_tree, heat_multiplier(0.5), decomposition)
    c = spectral_multiplier(weighted_tree, heat_multiplier(0.8), decomposition)
    np.testing.assert_allclose(a.compose(b).matrix(), c.matrix(), atol=1e-10)


def test_resolvent_inverts(weighted_tree, decomposition):
    """Test (s + L) (s + L)^{-1} = I."""
    res = spectral_multiplier(weighted_tree, resolvent_multiplier(1.5), decomposition)
    L = weighted_laplacian(weighted_tree).matrix()
    product = (1.5 * np.eye(weighted_tree.n) + L) @ res.matrix()
    np.testing.assert_allclose(product, np.eye(weighted_tree.n), atol=1e-10)


def test_multipliers_are_self_adjoint(weighted_tree, decomposition):
    """Test every preset has a symmetric kernel."""
    for kind, params in [("heat", {"t": 1.0}), ("resolvent", {"s": 1.0}),
                         ("band_limited", {"cutoff": 1.0, "width": 0.5}),
                         ("polynomial", {"coeffs": [1.0, -0.5]})]:
        assert preset_multiplier(weighted_tree, kind, params, decomposition).is_self_adjoint()


def test_band_limited_wide_cutoff_is_identity(weighted_tree, decomposition):
    """Test a cutoff above the spectrum gives the identity."""
    top = float(decomposition.eigenvalues.max())
    op = spectral_multiplier(weighted_tree, band_limited_multiplier(top + 1.0), decomposition)
    np.testing.assert_allclose(op.matrix(), np.eye(weighted_tree.n), atol=1e-10)


def test_multiplier_rejects_non_finite(weighted_tree, decomposition):
    """Test m must be finite on the spectrum."""
    with pytest.raises(InvalidParameterError):
        spectral_multiplier(weighted_tree, lambda lam: np.where(lam < 1e-9, np.inf, 1.0), decomposition)


def test_multiplier_needs_adjacency(hyperbolic_small):
    """Test metric-only spaces have no Laplacian."""
    with pytest.raises(InvalidParameterError):
        spectral_decomposition(hyperbolic_small)


def test_preset_rejects_unknown_and_bad_params(weighted_tree, decomposition):
    """Test preset names and parameters are checked."""
    with pytest.raises(InvalidParameterError):
        preset_multiplier(weighted_tree, "wave", {}, decomposition)
    with pytest.raises(InvalidParameterError):
        preset_multiplier(weighted_tree, "heat", {"t": 0.0}, decomposition)


# =============================================================================
# HORMANDER CONSTANTS AND NORMS
# =============================================================================

def test_hormander_separable_kernel(tree33, rng):
    """Test nu for k(x,y) = phi(x) psi(y) is max_B (int_{(2B)^c} |phi|) * osc_B psi."""
    phi, psi = rng.normal(size=tree33.n), rng.normal(size=tree33.n)
    op = KernelOperator.from_kernel(np.outer(phi, psi), tree33.weight)
    b = 2.0
    expected = 0.0
    for B in enumerate_balls(tree33, b).balls:
        if B.size < 2:
            continue
        outside = tree33.dist[B.center] >= 2 * B.radius
        spread = psi[B.members].max() - psi[B.members].min()
        expected = max(expected, float(np.sum(tree33.weight[outside] * np.abs(phi[outside]))) * spread)
    hc = hormander_constants(tree33, op, b)
    assert hc.nu == pytest.approx(expected, rel=1e-12)
    assert hc.nu_witness is not None


def test_hormander_symmetric_kernel(weighted_tree, decomposition):
    """Test nu = upsilon for self-adjoint multipliers."""
    op = preset_multiplier(weighted_tree, "heat", {"t": 0.5}, decomposition)
    hc = hormander_constants(weighted_tree, op, 2.0)
    assert hc.nu == pytest.approx(hc.upsilon, rel=1e-9)
    strict = hormander_constants(weighted_tree, op, 2.0, strict=True)
    assert strict.strict
    assert "nuWitness" in hc.to_dict(weighted_tree)


def test_hormander_identity_vanishes(tree33):
    """Test the identity has zero off-diagonal kernel constants."""
    hc = hormander_constants(tree33, KernelOperator.identity(tree33.weight), 2.0)
    assert hc.nu == 0.0
    assert hc.upsilon == 0.0


@pytest.mark.parametrize("strict", [False, True])
def test_hormander_matches_brute_force(weighted_tree, rng, strict):
    """Test nu and upsilon equal the max over every ball and member pair."""
    k = rng.normal(size=(weighted_tree.n, weighted_tree.n))
    op = KernelOperator.from_kernel(k, weighted_tree.weight)
    b = 2.0
    w = weighted_tree.weight
    nu = upsilon = 0.0
    for B in enumerate_balls(weighted_tree, b).balls:
        if B.size < 2:
            continue
        row = weighted_tree.dist[B.center]
        if strict:
            outside = row > 2 * row[B.members].max()
        else:
            outside = row >= 2 * B.radius
        for y, y2 in itertools.combinations(B.members, 2):
            nu = max(nu, float(np.sum(w[outside] * np.abs(op.kernel[outside, y] - op.kernel[outside, y2]))))
            upsilon = max(upsilon, float(np.sum(w[outside] * np.abs(op.kernel[y, outside] - op.kernel[y2, outside]))))
    hc = hormander_constants(weighted_tree, op, b, strict=strict)
    assert hc.nu == pytest.approx(nu, rel=1e-12)
    assert hc.upsilon == pytest.approx(upsilon, rel=1e-12)
    assert nu > 0


def test_hormander_heat_matches_brute_force(weighted_tree, decomposition):
    """Test the heat multiplier's nu against a direct sum over balls and pairs."""
    op = preset_multiplier(weighted_tree, "heat", {"t": 0.5}, decomposition)
    w = weighted_tree.weight
    nu = 0.0
    for B in enumerate_balls(weighted_tree, 2.0).balls:
        if B.size < 2:
            continue
        outside = weighted_tree.dist[B.center] >= 2 * B.radius
        for y, y2 in itertools.combinations(B.members, 2):
            nu = max(nu, float(np.sum(w[outside] * np.abs(op.kernel[outside, y] - op.kernel[outside, y2]))))
    assert hormander_constants(weighted_tree, op, 2.0).nu == pytest.approx(nu, rel=1e-10)


def test_l2_norm_rank_one(weighted_tree, rng):
    """Test ||phi (x) psi||_2 = ||phi||_2 ||psi||_2 in L^2(mu)."""
    phi, psi = rng.normal(size=weighted_tree.n), rng.normal(size=weighted_tree.n)
    op = KernelOperator.from_kernel(np.outer(phi, psi), weighted_tree.weight)
    expected = lp_norm(weighted_tree, phi, 2.0) * lp_norm(weighted_tree, psi, 2.0)
    assert l2_norm(weighted_tree, op) == pytest.approx(expected, rel=1e-10)


def test_h1_to_l1_identity_at_most_one(tree33):
    """Test atoms have L^1 norm at most 1, so the identity estimate is <= 1."""
    estimate = h1_to_l1_estimate(tree33, KernelOperator.identity(tree33.weight), 2.0, 50, seed=3)
    assert 0 < estimate.value <= 1 + 1e-12
    assert estimate.samples == 50
    assert estimate.to_dict()["bound"] == "lower"


def test_h1_to_l1_custom_sampler(tree33, mocker):
    """Test a custom atom sampler is used for every draw."""
    from hardy_bmo import random_atom

    sampler = mocker.Mock(side_effect=random_atom)
    h1_to_l1_estimate(tree33, KernelOperator.identity(tree33.weight), 2.0, 7, atom_sampler=sampler)
    assert sampler.call_count == 7


def test_h1_to_l1_no_balls(tree33):
    """Test a scale below the minimum distance gives an empty estimate."""
    estimate = h1_to_l1_estimate(tree33, KernelOperator.identity(tree33.weight), 0.5, 5)
    assert estimate.value == 0.0
    assert estimate.samples == 0


def test_linf_to_bmo_zero_operator(tree33):
    """Test the zero operator maps into constants."""
    estimate = linf_to_bmo_estimate(tree33, KernelOperator.zero(tree33.weight), 2.0, 10)
    assert estimate.value == 0.0


def test_estimates_reject_zero_samples(tree33):
    """Test n_samples must be positive."""
    with pytest.raises(InvalidParameterError):
        h1_to_l1_estimate(tree33, KernelOperator.identity(tree33.weight), 2.0, 0)
    with pytest.raises(InvalidParameterError):
        linf_to_bmo_estimate(tree33, KernelOperator.identity(tree33.weight), 2.0, 0)


# =============================================================================
# CORPUS FIT
# =============================================================================

def test_fit_corpus_constant(weighted_tree, decomposition):
    """Test one row per operator, finite constants and a reproducible hash."""
    ops = [preset_multiplier(weighted_tree, "heat", {"t": 0.5}, decomposition),
           preset_multiplier(weighted_tree, "resolvent", {"s": 1.0}, decomposition)]
    fit = fit_corpus_constant(weighted_tree, ops, 2.0, n_samples=20, seed=1)
    assert len(fit.rows) == 2
    assert 0 <= fit.h1_constant < np.inf
    assert 0 <= fit.bmo_constant < np.inf
    assert fit.corpus_hash == corpus_hash(weighted_tree, ops, 2.0)
    again = fit_corpus_constant(weighted_tree, ops, 2.0, n_samples=20, seed=1)
    assert again.to_dict() == fit.to_dict()
