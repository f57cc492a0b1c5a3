"""
Tests for space.py - finite spaces, balls and geometric constants.
"""
import itertools
import math
import warnings

import networkx as nx
import numpy as np
import pytest

from errors import DegenerateSpaceError, InvalidParameterError, SpaceDataError
from space import (
    FiniteSpace,
    amp_check,
    amp_witness,
    ball,
    cheeger_constant,
    concentric_doubling,
    doubling_constant,
    doubling_constants,
    enumerate_balls,
    from_graph,
    function_from_dict,
    function_to_dict,
    gen_grid,
    gen_hyperbolic_disk,
    gen_path,
    gen_tree,
    geometry_report,
    hyperbolic_distance,
    isoperimetric_profile,
    lp_norm,
    mean_oscillations,
    space_from_dict,
    space_to_dict,
    spectral_gap,
    tree_size,
    validate_space,
    volume_growth,
)


# =============================================================================
# GENERATORS AND VALIDATION
# =============================================================================

def test_tree_sizes():
    """Test that truncated trees have 1 + q + q(q-1) + ... points."""
    assert tree_size(3, 5) == 94
    assert gen_tree(3, 4).n == 46
    assert gen_tree(4, 2).n == 1 + 4 + 12


def test_tree_interior_excludes_leaves(tree33):
    """Test that the tree interior is the set of non-leaf points."""
    degrees = dict(tree33.graph().degree())
    leaves = [v for v, d in degrees.items() if d == 1]
    assert not tree33.interior[leaves].any()
    assert tree33.interior.sum() == tree33.n - len(leaves)


def test_path_metric(path9):
    """Test path distances are |i - j|."""
    i, j = np.indices((9, 9))
    np.testing.assert_array_equal(path9.dist, np.abs(i - j))
    assert path9.diameter == 8
    assert path9.min_distance == 1


def test_grid_ids_and_size(grid4):
    """Test 2D grids carry 'i,j' ids."""
    assert grid4.n == 16
    assert grid4.points[0] == "0,0"
    assert grid4.dist[grid4.index_of("0,0"), grid4.index_of("3,3")] == 6


def test_grid_interior_and_dimension():
    """Test the 2D grid interior drops the boundary and d=1 falls back to a path."""
    grid = gen_grid(2, 3)
    assert grid.interior.sum() == 1
    assert grid.interior[grid.index_of("1,1")]
    assert gen_grid(1, 5).n == 5
    with pytest.raises(InvalidParameterError):
        gen_grid(3, 2)


def test_hyperbolic_sample_is_valid(hyperbolic_small):
    """Test the hyperbolic sample passes metric validation with positive weights."""
    validate_space(hyperbolic_small)
    assert hyperbolic_small.n == 40
    assert (hyperbolic_small.weight > 0).all()
    assert not hyperbolic_small.has_adjacency


def test_hyperbolic_sample_is_deterministic():
    """Test the same seed gives the same sample."""
    a = gen_hyperbolic_disk(30, 2.0, seed=7)
    b = gen_hyperbolic_disk(30, 2.0, seed=7)
    np.testing.assert_array_equal(a.dist, b.dist)
    np.testing.assert_array_equal(a.weight, b.weight)


def test_hyperbolic_distance_from_origin():
    """Test d(0, r) = 2 artanh(r) in the Poincare disk."""
    z = np.array([[0.0, 0.0], [0.5, 0.0]])
    d = hyperbolic_distance(z)
    assert d[0, 1] == pytest.approx(2 * math.atanh(0.5), rel=1e-12)


def test_validate_space_rejects_asymmetry():
    """Test asymmetric distances name the offending pair."""
    dist = np.array([[0.0, 1.0], [2.0, 0.0]])
    space = FiniteSpace(("a", "b"), dist, np.ones(2))
    with pytest.raises(SpaceDataError) as exc:
        validate_space(space)
    assert set(exc.value.points) == {0, 1}


def test_validate_space_rejects_triangle_violation():
    """Test a triangle violation names a triple."""
    dist = np.array([[0.0, 1.0, 5.0], [1.0, 0.0, 1.0], [5.0, 1.0, 0.0]])
    space = FiniteSpace(("a", "b", "c"), dist, np.ones(3))
    with pytest.raises(SpaceDataError) as exc:
        validate_space(space)
    assert len(exc.value.points) == 3


def test_validate_space_rejects_nonpositive_weight():
    """Test zero weights are rejected."""
    space = FiniteSpace(("a", "b"), np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([1.0, 0.0]))
    with pytest.raises(SpaceDataError):
        validate_space(space)


def test_disconnected_graph_has_infinite_distance():
    """Test disconnected components are at distance inf."""
    G = nx.Graph()
    G.add_nodes_from(range(4))
    G.add_edges_from([(0, 1), (2, 3)])
    space = from_graph(G, list(range(4)))
    assert math.isinf(space.dist[0, 2])
    assert not space.is_finite_metric
    validate_space(space)


def test_validate_disconnected_space_is_warning_free():
    """Test infinite distances validate without numpy floating-point warnings."""
    G = nx.Graph()
    G.add_nodes_from(range(5))
    G.add_edges_from([(0, 1), (1, 2), (3, 4)])
    space = from_graph(G, list(range(5)))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        validate_space(space)


# =============================================================================
# BALLS
# =============================================================================

def test_ball_is_open(path9):
    """Test balls use strict inequality."""
    assert list(ball(path9, 4, 2.0).members) == [3, 4, 5]
    assert list(ball(path9, 4, 1.0).members) == [4]


def test_ball_rejects_bad_radius(path9):
    """Test radius must be positive."""
    with pytest.raises(InvalidParameterError):
        ball(path9, 0, 0.0)


def test_enumerate_balls_path3(path3):
    """Test the 1.5-family on a 3-point path: three singletons and three prefixes."""
    family = enumerate_balls(path3, 1.5)
    assert len(family) == 6
    sizes = sorted(B.size for B in family.balls)
    assert sizes == [1, 1, 1, 2, 2, 3]
    assert family.radii.max() <= 1.5


def test_enumerate_balls_canonical_radius(path9):
    """Test canonical radius is min(b, next distance)."""
    family = enumerate_balls(path9, 2.0)
    singles = [B for B in family.balls if B.size == 1]
    assert all(B.radius == 1.0 for B in singles)
    triples = [B for B in family.balls if B.size == 3]
    assert all(B.radius == 2.0 for B in triples)


def _brute_force_ball_sets(space, b):
    sets = set()
    for c in range(space.n):
        row = space.dist[c]
        radii = [r for r in np.unique(row) if 0 < r <= b] + [b]
        sets.update(frozenset(np.flatnonzero(row < r).tolist()) for r in radii)
    return sets


@pytest.mark.parametrize("name, b", [
    ("path9", 2.0), ("path9", 3.5), ("tree33", 2.0), ("tree33", 4.0),
    ("weighted_triangle", 1.2), ("weighted_triangle", 2.0), ("hyperbolic_small", 1.0),
])
def test_enumerate_balls_is_complete(request, name, b):
    """Test the family holds every open ball set of radius <= b and nothing else."""
    space = request.getfixturevalue(name)
    family = enumerate_balls(space, b)
    found = {frozenset(B.members.tolist()) for B in family.balls}
    assert found == _brute_force_ball_sets(space, b)
    for B in family.balls:
        assert 0 < B.radius <= b
        np.testing.assert_array_equal(B.members, np.flatnonzero(space.dist[B.center] < B.radius))
    keys = [(B.members.tobytes(), B.radius) for B in family.balls]
    assert len(keys) == len(set(keys))


def test_mean_oscillation_of_constant_is_zero(tree33):
    """Test constants have zero oscillation on every ball."""
    family = enumerate_balls(tree33, 3.0)
    assert np.allclose(mean_oscillations(tree33, family, np.full(tree33.n, 4.2)), 0.0)


def test_lp_norm_weighted(weighted_triangle):
    """Test weighted L1 and Linf norms."""
    f = np.array([1.0, -1.0, 2.0])
    assert lp_norm(weighted_triangle, f, 1.0) == pytest.approx(1 + 2 + 1)
    assert lp_norm(weighted_triangle, f, math.inf) == 2.0


# =============================================================================
# DOUBLING
# =============================================================================

def test_doubling_path9(path9):
    """Test D_{2,2} on a 9-point path is 7/2, attained by the end ball {0, 1} inside B(3, 4)."""
    entry = doubling_constant(path9, 2.0, 2.0)
    assert entry.value == pytest.approx(3.5)
    assert list(entry.inner.members) == [0, 1]
    assert entry.outer_center == 3


def test_concentric_doubling_of_three_point_balls(path9):
    """Test the concentric ratio mu(B(x,4))/mu(B(x,2)) is 7/3 at scale 2 on triples."""
    family = enumerate_balls(path9, 2.0)
    triple = next(B for B in family.balls if B.size == 3 and B.center == 4)
    outer = ball(path9, triple.center, 2 * triple.radius)
    assert outer.mass / triple.mass == pytest.approx(7 / 3)
    assert concentric_doubling(path9, 2.0, 2.0) == pytest.approx(3.0)


def test_doubling_constant_at_least_one(single_point):
    """Test a single point has D = 1."""
    assert doubling_constant(single_point, 2.0, 1.0).value == 1.0


def test_doubling_constants_monotone_in_tau(tree33):
    """Test D_{tau,b} grows with tau."""
    table = doubling_constants(tree33, [2.0, 3.0, 4.0], [2.0])
    values = [table[(t, 2.0)].value for t in (2.0, 3.0, 4.0)]
    assert values == sorted(values)


@pytest.mark.parametrize("name", ["path9", "tree33", "hyperbolic_small"])
def test_doubling_constants_monotone_in_b(request, name):
    """Test D_{tau,b} grows with b for every tau."""
    space = request.getfixturevalue(name)
    bs = [1.0, 1.5, 2.0, 3.0]
    table = doubling_constants(space, [2.0, 3.0], bs)
    for t in (2.0, 3.0):
        values = [table[(t, b)].value for b in bs]
        assert values == sorted(values)


def test_doubling_constants_rejects_small_tau(path9):
    """Test tau below 2 is rejected."""
    with pytest.raises(InvalidParameterError):
        doubling_constants(path9, [1.5], [2.0])


# =============================================================================
# ISOPERIMETRIC PROFILE
# =============================================================================

def test_isoperimetric_path8_exact(path8):
    """Test the path profile is 2/(n-2), attained by the whole interior."""
    profile = isoperimetric_profile(path8, [1.0, 2.0])
    assert profile.provenance == "exact"
    assert profile.i_hat == pytest.approx(1 / 3)


def test_isoperimetric_paths_strictly_decrease():
    """Test I_hat decreases along the path sequence."""
    values = [isoperimetric_profile(gen_path(n), [1.0]).i_hat for n in (8, 12, 16)]
    assert values[0] > values[1] > values[2]
    assert values[2] == pytest.approx(2 / 14)


def test_isoperimetric_tree_positive(tree33):
    """Test the tree profile is exact and positive."""
    profile = isoperimetric_profile(tree33, [1.0, 2.0])
    assert profile.provenance == "exact"
    assert profile.i_hat > 0
    assert profile.profile == sorted(profile.profile, reverse=True)


def test_isoperimetric_large_interior_is_estimate(tree34):
    """Test a large interior switches to sampled sets."""
    profile = isoperimetric_profile(tree34, [1.0], n_samples=20, seed=1)
    assert profile.provenance == "estimate"
    assert profile.n_sets > 20


def test_isoperimetric_single_point_raises(single_point):
    """Test the profile needs two points."""
    with pytest.raises(DegenerateSpaceError):
        isoperimetric_profile(single_point, [1.0])


def test_volume_growth_tree(tree34):
    """Test ball masses around the root follow the tree sizes."""
    growth = volume_growth(tree34, 0, [1.0, 2.0, 3.0])
    assert [m for _, m in growth] == [1.0, 4.0, 10.0]


# =============================================================================
# APPROXIMATE MIDPOINTS
# =============================================================================

def test_amp_tree_passes(tree34):
    """Test trees have midpoint balls at (R0, beta) = (1, 3/4)."""
    report = amp_check(tree34, 1.0, 0.75)
    assert report.passed
    assert report.pairs_checked > 0


def test_amp_two_points_fails(two_points):
    """Test two points at distance 1 have no ball of radius < 3/4 containing both."""
    report = amp_check(two_points, 0.5, 0.75)
    assert not report.passed
    assert report.violations[0][:2] == (0, 1)


def test_amp_witness_path(path9):
    """Test the witness for (0, 4) is centered at the midpoint."""
    witness = amp_witness(path9, 0, 4, 0.75)
    assert witness.center == 2
    assert list(witness.members) == [0, 1, 2, 3, 4]
    assert witness.radius < 0.75 * 4


def test_amp_rejects_bad_beta(path9):
    """Test beta must lie in (1/2, 1)."""
    with pytest.raises(InvalidParameterError):
        amp_check(path9, 1.0, 0.5)


# =============================================================================
# GRAPH CONSTANTS
# =============================================================================

def test_cheeger_path8_exact(path8):
    """Test the path is cut in the middle: h = 1/4."""
    result = cheeger_constant(path8)
    assert result.mode == "exact"
    assert result.value == pytest.approx(0.25)


def test_cheeger_disconnected_is_zero():
    """Test disconnected graphs have h = 0."""
    G = nx.Graph()
    G.add_nodes_from(range(3))
    G.add_edge(0, 1)
    result = cheeger_constant(from_graph(G, [0, 1, 2]))
    assert result.value == 0.0
    assert result.disconnected


def test_spectral_gap_path(path8):
    """Test the path spectral gap is 2 - 2cos(pi/n) and dominates h^2/(2 dmax)."""
    gap = spectral_gap(path8)
    assert gap == pytest.approx(2 - 2 * math.cos(math.pi / 8), rel=1e-10)
    assert gap >= cheeger_constant(path8).value ** 2 / 4


@pytest.mark.slow
def test_cheeger_sweep_on_large_tree(tree34):
    """Test the sweep cut gives an upper bound no smaller than the spectral bound."""
    result = cheeger_constant(tree34)
    assert result.mode == "sweep"
    assert result.value >= spectral_gap(tree34) / 2 - 1e-12


def _brute_force_cheeger(space):
    G = space.graph()
    half = space.total_mass / 2 * (1 + 1e-12)
    best = math.inf
    for size in range(1, space.n):
        for A in itertools.combinations(range(space.n), size):
            mass = space.measure(list(A))
            if mass <= half:
                best = min(best, nx.cut_size(G, A) / mass)
    return best


def _small_graph_corpus():
    corpus = [gen_path(n) for n in range(2, 11)]
    corpus += [gen_tree(3, 1), gen_tree(3, 2), gen_grid(2, 3)]
    corpus.append(from_graph(nx.cycle_graph(7), list(range(7)), name="cycle7"))
    corpus.append(from_graph(nx.star_graph(5), list(range(6)), name="star6"))
    return corpus


def test_cheeger_exact_matches_brute_force():
    """Test exact Cheeger equals subset brute force on graphs up to 10 vertices."""
    for space in _small_graph_corpus():
        result = cheeger_constant(space)
        assert result.mode == "exact"
        assert result.value == pytest.approx(_brute_force_cheeger(space), rel=1e-12), space.name
        G = space.graph()
        assert nx.cut_size(G, result.witness.tolist()) / space.measure(result.witness) == pytest.approx(result.value)


def test_cheeger_exact_weighted_matches_brute_force():
    """Test point weights enter the Cheeger ratio through mu(A)."""
    path = gen_path(6)
    space = FiniteSpace(path.points, path.dist, np.array([1.0, 2.0, 3.0, 1.0, 1.0, 2.0]), path.edges,
                        name="weighted-path")
    assert cheeger_constant(space).value == pytest.approx(_brute_force_cheeger(space), rel=1e-12)


def test_cheeger_inequalities_on_small_graphs():
    """Test h^2/(2 dmax) <= lambda_1 <= 2h on unit-weight graphs."""
    for space in _small_graph_corpus():
        h = cheeger_constant(space).value
        gap = spectral_gap(space)
        dmax = max(d for _, d in space.graph().degree())
        assert h ** 2 / (2 * dmax) <= gap + 1e-12, space.name
        assert gap <= 2 * h + 1e-12, space.name


def test_two_point_and_path3_graph_constants(two_points, path3):
    """Test K_2 has gap 2 and h = 1; the 3-point path has gap 1 and h = 1."""
    assert spectral_gap(two_points) == pytest.approx(2.0, rel=1e-12)
    assert cheeger_constant(two_points).value == pytest.approx(1.0)
    assert spectral_gap(path3) == pytest.approx(1.0, rel=1e-12)
    assert cheeger_constant(path3).value == pytest.approx(1.0)


def test_geometry_report_fields(path8):
    """Test the combined report carries every section."""
    report = geometry_report(path8, [2.0], [1.0, 2.0], [1.0], 1.0, 0.75)
    doc = report.to_dict(path8)
    assert len(doc["doubling"]) == 2
    assert doc["isoperimetric"]["provenance"] == "exact"
    assert doc["amp"]["passed"]
    assert doc["cheeger"]["value"] == pytest.approx(0.25)


# =============================================================================
# SERIALIZATION
# =============================================================================

def test_space_dict_graph_roundtrip(tree33):
    """Test a graph space survives serialization exactly."""
    again = space_from_dict(space_to_dict(tree33))
    assert again.points == tree33.points
    np.testing.assert_array_equal(again.dist, tree33.dist)
    np.testing.assert_array_equal(again.interior, tree33.interior)
    assert space_to_dict(again) == space_to_dict(tree33)


def test_space_dict_metric_roundtrip(hyperbolic_small):
    """Test a metric-only space keeps exact float distances."""
    again = space_from_dict(space_to_dict(hyperbolic_small))
    np.testing.assert_array_equal(again.dist, hyperbolic_small.dist)
    np.testing.assert_array_equal(again.weight, hyperbolic_small.weight)


def test_space_from_dict_rejects_bad_edge():
    """Test self-loops are data errors."""
    doc = {"points": ["a", "b"], "weights": [1.0, 1.0], "edges": [[0, 0]]}
    with pytest.raises(SpaceDataError):
        space_from_dict(doc)


def test_function_dict_missing_ids_are_zero(path3):
    """Test absent ids read as 0."""
    f = function_from_dict(path3, {"values": {"1": 2.5}})
    np.testing.assert_array_equal(f, [0.0, 2.5, 0.0])
    assert function_to_dict(path3, f)["values"]["1"] == 2.5
