"""Tests for porous-cube detection, packing ratios, and constants."""

import math
from collections import Counter

import numpy as np
import pytest

from rectilib.cubes import build_cubes
from rectilib.errors import ContainmentError, ParameterError
from rectilib.generators import GeneratorSpec, generate
from rectilib.nets import build_nets
from rectilib.porosity import (
    AppendixConstants,
    PorosityConfig,
    PorousCube,
    appendix_constants,
    carleson_check,
    dist_to_set,
    find_porous,
    shadow_map,
    validate_config,
)
from rectilib.space import MetricMeasureSpace, enclosing_target


def good_cfg(**overrides):
    base = dict(M=11.0, delta=0.003, n0=2, rho=1.0 / 16.0, C_mu=2.0)
    base.update(overrides)
    return PorosityConfig(**base)


def hole_fixture(weights_scale=1.0):
    """Interval with a central hole, cube tree down to hole-sized cubes."""
    space, target = generate(
        GeneratorSpec("interval", 100, params={"holes": [(0.4, 0.6)]})
    )
    if weights_scale != 1.0:
        space = MetricMeasureSpace.from_coords(
            space.ids, space.coords, space.weights * weights_scale
        )
    h = build_nets(space, 1.0 / 16.0, -1, 2)
    return space, target, h, build_cubes(space, h)


# -- parameter validation -----------------------------------------------


def test_validate_accepts_reference_parameters():
    assert validate_config(good_cfg()) == validate_config(good_cfg())
    result = validate_config(good_cfg())
    assert result.ok and result.violations == ()


def test_validate_names_each_violation():
    assert validate_config(good_cfg(M=9.0)).violations == ("M > 10",)
    assert validate_config(good_cfg(delta=0.25)).violations == (
        "delta < 4*rho",
    )
    assert validate_config(
        good_cfg(n0=1, rho=1.0 / 1024.0)
    ).violations == ("n0 >= 2",)
    coarse = validate_config(good_cfg(rho=0.25))
    assert coarse.violations == (
        "rho < 3/(M+1)",
        "1/rho > M",
        "5*M*rho^n0 < 1",
    )


def test_validate_strict_adds_two_checks():
    cfg = good_cfg(rho=1.0 / 1024.0)
    assert validate_config(cfg, strict=True).ok
    at_limit = good_cfg(rho=1.0 / 1000.0)
    assert validate_config(at_limit).ok
    assert validate_config(at_limit, strict=True).violations == (
        "rho < 1/1000",
    )
    off_c0 = good_cfg(rho=1.0 / 1024.0, c0=0.003)
    assert validate_config(off_c0, strict=True).violations == ("c0 = 1/500",)


# -- constant assembly --------------------------------------------------


def test_appendix_constants_frozen_reference_point():
    cfg = good_cfg(rho=1.0 / 1024.0)
    got = appendix_constants(cfg, b=1.0)
    assert got.a == pytest.approx(0.1861818181818183, rel=1e-12)
    assert got.C1 == 2048.0  # b * C_mu^(log2(4/rho) - 1) lands exactly
    assert got.b == 1.0 and got.b_mode == "supplied"


def test_appendix_constants_limit_and_errors():
    almost_flat = appendix_constants(good_cfg(C_mu=1.0 + 1e-9), b=1.0)
    assert almost_flat.C1 == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(ParameterError):
        appendix_constants(good_cfg(C_mu=None))
    with pytest.raises(ParameterError):
        appendix_constants(good_cfg(C_mu=1.0))
    with pytest.raises(ParameterError):
        appendix_constants(good_cfg(C_mu=0.5))


def test_appendix_constants_multiplicity_modes():
    cfg = good_cfg(rho=1.0 / 1024.0)
    assert appendix_constants(cfg, b=3.0).C1 == pytest.approx(3.0 * 2048.0)
    observed = appendix_constants(cfg, b_observed=5)
    assert observed.b == 5.0 and observed.b_mode == "observed"
    floored = appendix_constants(cfg, b_observed=0)
    assert floored.b == 1.0  # empty family still yields a usable bound
    both = appendix_constants(cfg, b=2.0, b_observed=7)
    assert both.b == 2.0 and both.b_mode == "supplied"


# -- distances to the target set ----------------------------------------


def test_dist_to_set_minimizes_over_members():
    coords = np.arange(5, dtype=float)[:, None]
    space = MetricMeasureSpace.from_coords(range(5), coords, np.ones(5))
    gap = dist_to_set(space, [0, 4])
    assert gap.tolist() == [0.0, 1.0, 2.0, 1.0, 0.0]
    assert np.array_equal(dist_to_set(space, [2]), space.dists_from(2))


# -- porous cube detection ----------------------------------------------


def test_no_porosity_when_target_is_everything():
    space, _, h, tree = hole_fixture()
    full = enclosing_target(space)
    assert find_porous(space, tree, full, good_cfg()) == ()


def test_find_porous_on_hole_fixture():
    space, target, h, tree = hole_fixture()
    porous = find_porous(space, tree, target, good_cfg())
    assert len(porous) == 57
    # The deepest gap point: ids 49 and 50 tie at distance 10/99 from
    # the target, and the tie resolves to the smaller id.
    big = [p for p in porous if tree.cubes[p.cube].level <= 1]
    assert {p.witness for p in big} == {49}
    assert porous[0].witness_gap == pytest.approx(10.0 / 99.0)


def test_find_porous_witness_recheck():
    space, target, h, tree = hole_fixture()
    cfg = good_cfg()
    gap = dist_to_set(space, target.members)
    for p in find_porous(space, tree, target, cfg):
        cube = tree.cubes[p.cube]
        row = space.dists_from(space.index_of(cube.center))
        wk = space.index_of(p.witness)
        assert row[wk] < cfg.M * cube.sidelength
        assert gap[wk] == pytest.approx(p.witness_gap)
        assert p.witness_gap >= cfg.delta * cube.sidelength
        better = [
            k
            for k in range(len(space))
            if row[k] < cfg.M * cube.sidelength
            and (
                gap[k] > gap[wk] + 1e-15
                or (gap[k] == gap[wk] and space.ids[k] < p.witness)
            )
        ]
        assert not better


def test_find_porous_is_antitone_in_delta():
    space, target, h, tree = hole_fixture()
    previous = None
    for delta in (0.003, 0.01, 0.05, 0.2):
        cubes = {p.cube for p in find_porous(space, tree, target, good_cfg(delta=delta))}
        if previous is not None:
            assert cubes <= previous
        previous = cubes


def test_find_porous_rejects_invalid_config_unless_forced():
    space, target, h, tree = hole_fixture()
    bad = good_cfg(M=9.0)
    with pytest.raises(ParameterError, match="config violates: M > 10"):
        find_porous(space, tree, target, bad)
    forced = find_porous(space, tree, target, bad, force=True)
    assert isinstance(forced, tuple)


def test_find_porous_needs_single_containing_root():
    coords = np.array([[0.0], [1.0]])
    space = MetricMeasureSpace.from_coords([0, 1], coords, np.ones(2))
    h = build_nets(space, 0.5, 0, 1)
    tree = build_cubes(space, h)
    assert len(tree.roots()) == 2
    target = enclosing_target(space)
    with pytest.raises(ContainmentError):
        find_porous(space, tree, target, good_cfg(), force=True)


# -- packing (Carleson) ratios ------------------------------------------


def test_carleson_matches_brute_force_descendant_sums():
    space, target, h, tree = hole_fixture()
    porous = find_porous(space, tree, target, good_cfg())
    report = carleson_check(tree, porous, good_cfg(), b=1.0)
    porous_ids = {p.cube for p in porous}
    for cid, ratio in report.ratios.items():
        packed = sum(
            tree.cubes[d].mass
            for d in tree.descendants(cid)
            if d in porous_ids
        )
        assert ratio == pytest.approx(packed / tree.cubes[cid].mass)
    assert report.worst_ratio == pytest.approx(2.297872340425532, rel=1e-12)
    assert report.skipped == 0


def test_carleson_is_invariant_under_mass_rescaling():
    _, target, _, tree = hole_fixture()
    scaled_space, target2, _, scaled_tree = hole_fixture(weights_scale=3.7)
    porous = find_porous(scaled_space, scaled_tree, target2, good_cfg())
    a = carleson_check(tree, porous, good_cfg(), b=1.0)
    b = carleson_check(scaled_tree, porous, good_cfg(), b=1.0)
    assert a.worst_ratio == pytest.approx(b.worst_ratio, rel=1e-12)
    for cid in a.ratios:
        assert a.ratios[cid] == pytest.approx(b.ratios[cid], rel=1e-12)


def test_carleson_single_porous_root_has_ratio_one():
    space, target, h, tree = hole_fixture()
    root = tree.roots()[0]
    porous = (PorousCube(cube=root, witness=49, witness_gap=0.1),)
    report = carleson_check(tree, porous, good_cfg(), b=1.0)
    assert report.worst_ratio == pytest.approx(1.0)
    assert report.worst_cube == root
    assert report.ok


def test_carleson_skips_and_empty_family():
    coords = np.array([[0.0], [1.0], [2.0]])
    space = MetricMeasureSpace.from_coords(
        range(3), coords, np.array([1.0, 1.0, 0.0])
    )
    h = build_nets(space, 0.5, -2, 0)
    tree = build_cubes(space, h)
    report = carleson_check(tree, (), good_cfg(), b=1.0)
    assert report.worst_ratio == 0.0
    assert report.ok
    assert report.skipped == 2  # the zero-weight point's two singleton cubes
    zero_cubes = [
        cid for cid, c in enumerate(tree.cubes) if c.mass == 0.0
    ]
    assert all(cid not in report.ratios for cid in zero_cubes)


# -- shadow map ---------------------------------------------------------


def test_shadow_map_on_hole_fixture():
    space, target, h, tree = hole_fixture()
    cfg = good_cfg()
    porous = find_porous(space, tree, target, cfg)
    report = shadow_map(space, tree, target, porous, cfg)
    # Maximal target-free cubes: the finest cubes centered deep enough
    # inside the hole, gap >= twice their sidelength 5/256.
    assert len(report.maximal) == 14
    centers = sorted(tree.cubes[cid].center for cid in report.maximal)
    assert centers == list(range(43, 57))
    assert report.b_observed == 38
    assert len(report.failures) == 6
    assert report.ok
    assert report.c0_used == tree.c0_achieved
    mapped = [r for r in report.records if r.shadow is not None]
    assert len(mapped) == len(porous) - len(report.failures)
    collisions = Counter(r.shadow for r in mapped)
    assert max(collisions.values()) == report.b_observed


def test_shadow_map_records_scale_comparisons():
    space, target, h, tree = hole_fixture()
    cfg = good_cfg()
    porous = find_porous(space, tree, target, cfg)
    report = shadow_map(space, tree, target, porous, cfg)
    for rec in report.records:
        if rec.shadow is None:
            assert rec.cube in report.failures
            assert rec.scale_lower_ok is None and rec.scale_upper_ok is None
            continue
        l_cube = tree.cubes[rec.cube].sidelength
        l_shadow = tree.cubes[rec.shadow].sidelength
        assert rec.scale_lower_ok == (
            cfg.delta * l_cube <= (4 / cfg.rho) * l_shadow * (1 + 1e-12)
        )
        assert rec.scale_upper_ok == (
            l_shadow
            <= (2 * cfg.M / report.c0_used) * l_cube * (1 + 1e-12)
        )
        assert rec.scale_lower_ok and rec.scale_upper_ok
        # the witness really lies in its shadow cube
        assert rec.witness in tree.cubes[rec.shadow].members


def test_shadow_map_antichain_is_maximal_and_disjoint():
    space, target, h, tree = hole_fixture()
    cfg = good_cfg()
    porous = find_porous(space, tree, target, cfg)
    report = shadow_map(space, tree, target, porous, cfg)
    gap = dist_to_set(space, target.members)
    seen: set[int] = set()
    for cid in report.maximal:
        cube = tree.cubes[cid]
        assert gap[space.index_of(cube.center)] >= 2 * cube.sidelength
        assert not seen.intersection(cube.members)
        seen.update(cube.members)
        parent = cube.parent
        while parent is not None:  # no ancestor qualifies
            up = tree.cubes[parent]
            assert gap[space.index_of(up.center)] < 2 * up.sidelength
            parent = up.parent


def test_shadow_map_empty_porous_family():
    space, target, h, tree = hole_fixture()
    report = shadow_map(space, tree, target, (), good_cfg())
    assert report.records == ()
    assert report.b_observed == 0
    assert report.failures == ()
    assert report.ok
