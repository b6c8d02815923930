"""Tests for density profiles, strata, flatness numbers, and dyadic sums."""

import math

import numpy as np
import pytest

from _oracles import ball_mass_brute, beta2_grid, beta2_grid_slack, bs_terms_brute
from rectilib.density import (
    bs_sum,
    beta2,
    density_profile,
    density_profiles,
    resolution_scale,
    split_by_diameter,
    stratify,
)
from rectilib.errors import (
    DegenerateInputError,
    ParameterError,
    UnknownIdentifierError,
    UnsupportedMetricError,
)
from rectilib.generators import GeneratorSpec, generate
from rectilib.space import MetricMeasureSpace


def random_cloud(rng, n=20, dim=2):
    coords = rng.uniform(-1.0, 1.0, size=(n, dim))
    weights = rng.uniform(0.1, 2.0, size=n)
    return MetricMeasureSpace.from_coords(range(n), coords, weights)


# -- density profiles ---------------------------------------------------


def test_profile_of_isolated_atom():
    coords = np.array([[0.0], [10.0]])
    space = MetricMeasureSpace.from_coords([0, 1], coords, np.ones(2))
    prof = density_profile(space, 0, 0.25, 1.0)
    assert prof.radii == (1.0, 0.5, 0.25)
    assert prof.values == pytest.approx((1.0, 2.0, 4.0))
    assert prof.lower_estimate == pytest.approx(1.0)


def test_profile_uses_open_balls():
    coords = np.array([[0.0], [1.0], [2.0]])
    space = MetricMeasureSpace.from_coords([0, 1, 2], coords, np.ones(3))
    prof = density_profile(space, 1, 1.0, 2.0)
    # B(1, 1) holds only the center; B(1, 2) holds all three.
    assert prof.values == pytest.approx((1.5, 1.0))
    assert prof.lower_estimate == pytest.approx(1.0)


def test_profile_parameter_errors():
    space = random_cloud(np.random.default_rng(0))
    with pytest.raises(ParameterError):
        density_profile(space, 0, 0.5, 0.5)
    with pytest.raises(ParameterError):
        density_profile(space, 0, 0.0, 0.5)
    with pytest.raises(UnknownIdentifierError):
        density_profile(space, 777, 0.1, 0.5)


def test_profile_values_match_brute_force():
    rng = np.random.default_rng(31)
    for trial in range(8):
        space = random_cloud(rng, n=15)
        pid = int(rng.integers(0, 15))
        prof = density_profile(space, pid, 0.05, 1.6)
        for r, v in zip(prof.radii, prof.values):
            assert v == pytest.approx(ball_mass_brute(space, pid, r) / r)


def test_profiles_are_isometry_invariant():
    rng = np.random.default_rng(37)
    space = random_cloud(rng, n=18)
    theta = 0.7
    q = np.array(
        [[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]]
    )
    moved = MetricMeasureSpace.from_coords(
        space.ids, space.coords @ q.T + np.array([3.0, -1.0]), space.weights
    )
    for pid in (0, 7, 17):
        a = density_profile(space, pid, 0.1, 1.0)
        b = density_profile(moved, pid, 0.1, 1.0)
        assert a.values == pytest.approx(b.values, rel=1e-9)


def test_profiles_batch_matches_single(monkeypatch):
    rng = np.random.default_rng(43)
    space = random_cloud(rng, n=12)
    pts = [3, 1, 9]
    batch = density_profiles(space, pts, 0.1, 0.9)
    assert [p.point for p in batch] == pts
    monkeypatch.setenv("RECTILIB_THREADS", "4")
    threaded = density_profiles(space, pts, 0.1, 0.9)
    assert threaded == batch
    for prof in batch:
        assert prof == density_profile(space, prof.point, 0.1, 0.9)


def test_resolution_scale_is_half_min_gap():
    space, _ = generate(GeneratorSpec("interval", 11))
    assert resolution_scale(space) == pytest.approx(0.05)


# -- density strata -----------------------------------------------------


def test_stratify_two_atoms():
    coords = np.array([[0.0], [1.0]])
    heavy = MetricMeasureSpace.from_coords([0, 1], coords, np.ones(2))
    assert stratify(heavy, [0, 1], 1, 1) == (0, 1)
    light = MetricMeasureSpace.from_coords([0, 1], coords, np.full(2, 0.1))
    assert stratify(light, [0, 1], 1, 1) == ()
    # No testable radius below 1/k leaves the criterion vacuous.
    assert stratify(light, [0, 1], 1, 2) == (0, 1)
    with pytest.raises(ParameterError):
        stratify(heavy, [0, 1], 0, 1)
    with pytest.raises(ParameterError):
        stratify(heavy, [0, 1], 1, 0)


def test_stratify_keeps_whole_circle():
    space, _ = generate(GeneratorSpec("circle", 256))
    kept = stratify(space, list(space.ids), 1, 1)
    assert kept == tuple(space.ids)


def test_stratify_is_monotone_in_k():
    space, _ = generate(
        GeneratorSpec("cascade", 4, params={"ratios": (0.7, 0.1, 0.1, 0.1)})
    )
    ids = list(space.ids)
    sizes = []
    for k in (1, 2, 4, 8):
        kept_k = set(stratify(space, ids, 2, k))
        kept_2k = set(stratify(space, ids, 2, 2 * k))
        assert kept_k <= kept_2k
        sizes.append((len(kept_k), len(kept_2k)))
    assert any(a < b for a, b in sizes)  # growth is strict somewhere


# -- diameter splitting -------------------------------------------------


def test_split_by_diameter_trace():
    coords = np.arange(5, dtype=float)[:, None]
    space = MetricMeasureSpace.from_coords(range(5), coords, np.ones(5))
    pieces = split_by_diameter(space, range(5), 2.1)
    assert pieces == [(0, 1), (2, 3), (4,)]
    with pytest.raises(ParameterError):
        split_by_diameter(space, range(5), 0.0)


def test_split_pieces_partition_and_stay_small():
    rng = np.random.default_rng(47)
    for trial in range(8):
        space = random_cloud(rng, n=30)
        bound = float(rng.uniform(0.3, 1.5))
        pieces = split_by_diameter(space, space.ids, bound)
        flat = sorted(p for piece in pieces for p in piece)
        assert flat == list(space.ids)
        for piece in pieces:
            if len(piece) > 1:
                assert space.distance_submatrix(piece).max() < bound


# -- beta-2 flatness ----------------------------------------------------


def test_beta2_square_corners():
    coords = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    space = MetricMeasureSpace.from_coords(range(4), coords, np.ones(4))
    result = beta2(space, range(4))
    assert result.beta2 == pytest.approx(math.sqrt(1.0 / 8.0), rel=1e-12)
    assert result.line_point == pytest.approx((0.5, 0.5))


def test_beta2_flat_sets_vanish():
    coords = np.array([[0.0, 0.0], [0.3, 0.3], [1.1, 1.1], [2.0, 2.0]])
    space = MetricMeasureSpace.from_coords(range(4), coords, np.ones(4))
    assert beta2(space, range(4)).beta2 <= 1e-12
    assert beta2(space, [0, 3]).beta2 <= 1e-12


def test_beta2_error_types():
    coords = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [2.0, 2.0]])
    space = MetricMeasureSpace.from_coords(
        range(4), coords, np.array([1.0, 1.0, 0.0, 0.0])
    )
    with pytest.raises(ParameterError):
        beta2(space, [0])
    with pytest.raises(DegenerateInputError):
        beta2(space, [2, 3])  # two points, neither carries mass
    twin = MetricMeasureSpace.from_matrix(
        [0, 1], np.array([[0.0, 1.0], [1.0, 0.0]]), np.ones(2)
    )
    with pytest.raises(UnsupportedMetricError):
        beta2(twin, [0, 1])


def test_beta2_never_beats_the_angle_grid():
    rng = np.random.default_rng(53)
    for trial in range(6):
        space = random_cloud(rng, n=int(rng.integers(4, 20)))
        ids = list(space.ids)
        pca = beta2(space, ids).beta2
        grid = beta2_grid(space, ids, n_angles=2000)
        assert pca <= grid + 1e-12
        assert grid - pca <= beta2_grid_slack(space.diameter(), 2000) + 1e-9


def test_beta2_is_rigid_motion_invariant():
    rng = np.random.default_rng(61)
    space = random_cloud(rng, n=14)
    theta = 1.1
    q = np.array(
        [[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]]
    )
    moved = MetricMeasureSpace.from_coords(
        space.ids, space.coords @ q.T + np.array([-2.0, 0.5]), space.weights
    )
    a = beta2(space, space.ids).beta2
    b = beta2(moved, space.ids).beta2
    assert a == pytest.approx(b, rel=1e-9, abs=1e-12)


def test_beta2_direction_sign_is_normalized():
    coords = np.array([[0.0, 0.0], [-1.0, -0.1], [-2.0, 0.1], [-3.0, 0.0]])
    space = MetricMeasureSpace.from_coords(range(4), coords, np.ones(4))
    direction = beta2(space, range(4)).line_direction
    nz = [c for c in direction if abs(c) > 1e-12]
    assert nz and nz[0] > 0


# -- dyadic flatness sums -----------------------------------------------


def test_bs_sum_matches_brute_force():
    rng = np.random.default_rng(67)
    for trial in range(6):
        space = random_cloud(rng, n=15)
        pid = int(rng.integers(0, 15))
        depth = int(rng.integers(1, 6))
        got = bs_sum(space, pid, depth)
        terms, skipped = bs_terms_brute(space, pid, depth)
        assert got.terms == pytest.approx(tuple(terms))
        assert got.skipped == skipped
        assert got.value == pytest.approx(sum(terms))
        assert len(got.terms) + got.skipped == depth + 1


def test_bs_sum_on_power_of_two_grid():
    space, _ = generate(GeneratorSpec("grid2d", 8))
    for pid in (0, 27, 63):
        got = bs_sum(space, pid, 3)
        assert got.skipped == 0
        assert got.value == pytest.approx(math.sqrt(2.0) * (2.0**4 - 1.0))


def test_bs_sum_atom_formula_and_monotonicity():
    coords = np.array([[0.25, 0.25], [100.25, 100.25]])
    space = MetricMeasureSpace.from_coords([0, 1], coords, np.full(2, 0.5))
    values = []
    for depth in (1, 2, 3, 4):
        got = bs_sum(space, 1, depth)
        expected = math.sqrt(2.0) / 0.5 * (2.0 - 2.0**-depth)
        assert got.value == pytest.approx(expected)
        values.append(got.value)
    assert values == sorted(values)


def test_bs_sum_skips_empty_cubes():
    coords = np.array([[0.25, 0.25], [100.25, 100.25]])
    space = MetricMeasureSpace.from_coords(
        [0, 1], coords, np.array([1.0, 0.0])
    )
    got = bs_sum(space, 1, 3)
    assert got.value == 0.0
    assert got.skipped == 4
    assert got.terms == ()


def test_bs_sum_error_types():
    space, _ = generate(GeneratorSpec("grid2d", 4))
    with pytest.raises(ParameterError):
        bs_sum(space, 0, 0)
    twin = MetricMeasureSpace.from_matrix(
        [0, 1], np.array([[0.0, 1.0], [1.0, 0.0]]), np.ones(2)
    )
    with pytest.raises(UnsupportedMetricError):
        bs_sum(twin, 0, 2)
