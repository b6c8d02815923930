"""Lower-density profiles, density strata, beta-2 numbers, dyadic sums.

The lower density of a point is approximated by the minimum of
``mass(B(x, r)) / r`` over a geometric radius grid; the true liminf is
unreachable on finite data, so every profile records the grid it was
evaluated on and the minimum is a finite-resolution surrogate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateInputError,
    ParameterError,
    UnsupportedMetricError,
)
from .runtime import map_indexed
from .space import MetricMeasureSpace, dyadic_radii


@dataclass(frozen=True)
class DensityProfile:
    point: int
    radii: tuple[float, ...]  # descending, r_hi down to r_lo
    values: tuple[float, ...]  # mass(B(point, r)) / r per radius
    lower_estimate: float

    def __post_init__(self):
        if any(v < 0 for v in self.values):
            raise ParameterError("profile values must be nonnegative")


def _masses_at(
    space: MetricMeasureSpace, index: int, radii: Sequence[float]
) -> np.ndarray:
    """Open-ball masses around one point at several radii."""
    row = space.dists_from(index)
    order = np.argsort(row, kind="stable")
    cum = np.cumsum(space.weights[order])
    sorted_d = row[order]
    # open ball: strictly closer than r
    pos = np.searchsorted(sorted_d, np.asarray(radii), side="left")
    out = np.where(pos > 0, cum[np.maximum(pos - 1, 0)], 0.0)
    return np.asarray(out, dtype=float)


def density_profile(
    space: MetricMeasureSpace, x: int, r_lo: float, r_hi: float
) -> DensityProfile:
    """Ball-mass-to-radius ratios on a halving radius grid."""
    if not (0 < r_lo < r_hi):
        raise ParameterError("need 0 < r_lo < r_hi")
    radii = dyadic_radii(r_lo, r_hi)
    idx = space.index_of(x)
    masses = _masses_at(space, idx, radii)
    values = tuple(float(m / r) for m, r in zip(masses, radii))
    return DensityProfile(
        point=x,
        radii=tuple(radii),
        values=values,
        lower_estimate=min(values),
    )


def density_profiles(
    space: MetricMeasureSpace,
    points: Iterable[int],
    r_lo: float,
    r_hi: float,
) -> list[DensityProfile]:
    """Profiles for many points; evaluation order is deterministic."""
    pts = list(points)
    return map_indexed(
        lambda p: density_profile(space, p, r_lo, r_hi), pts
    )


def resolution_scale(space: MetricMeasureSpace) -> float:
    """Half the smallest positive distance; the finest trustworthy radius."""
    return space.min_gap() / 2.0


def stratify(
    space: MetricMeasureSpace,
    members: Iterable[int],
    j: int,
    k: int,
) -> tuple[int, ...]:
    """Points whose ball masses stay above r/j at every scale below 1/k.

    The radius grid halves downward from 1/k to the resolution scale;
    only radii strictly below 1/k are tested.  Returned ids ascend.
    """
    if j < 1 or k < 1:
        raise ParameterError("need j >= 1 and k >= 1")
    ids = sorted(set(members))
    r_lo = resolution_scale(space)
    r_hi = 1.0 / k
    if r_hi <= r_lo:
        return tuple(ids)
    radii = [r for r in dyadic_radii(r_lo, r_hi) if r < r_hi]
    if not radii:
        return tuple(ids)

    def keep(point_id: int) -> bool:
        masses = _masses_at(space, space.index_of(point_id), radii)
        return bool(np.all(masses >= np.asarray(radii) / j))

    flags = map_indexed(keep, ids)
    return tuple(p for p, ok in zip(ids, flags) if ok)


def split_by_diameter(
    space: MetricMeasureSpace,
    members: Iterable[int],
    bound: float,
) -> list[tuple[int, ...]]:
    """Greedy partition into pieces of diameter strictly below ``bound``.

    Repeatedly seeds with the smallest unassigned id and absorbs every
    unassigned point strictly within bound/2 of the seed.
    """
    if bound <= 0:
        raise ParameterError("bound must be positive")
    remaining = sorted(set(members))
    pieces: list[tuple[int, ...]] = []
    while remaining:
        seed = remaining[0]
        row = space.dists_from(space.index_of(seed))
        piece = [
            p for p in remaining if row[space.index_of(p)] < bound / 2
        ]
        taken = set(piece)
        remaining = [p for p in remaining if p not in taken]
        pieces.append(tuple(piece))
    return pieces


@dataclass(frozen=True)
class Beta2Result:
    label: str
    beta2: float
    line_point: tuple[float, ...]
    line_direction: tuple[float, ...]


def beta2(
    space: MetricMeasureSpace,
    members: Iterable[int],
    label: str = "",
) -> Beta2Result:
    """Mass-weighted least-squares flatness of a subset, normalized.

    The minimizing line passes through the weighted centroid along the
    top principal direction of the weighted second-moment tensor, and

        beta2^2 = sum_x w(x) * (dist(x, line) / diam)^2 / mass.

    A subset of zero diameter is perfectly flat and returns 0.
    """
    if space.coords is None:
        raise UnsupportedMetricError(
            "beta2 needs coordinate-embedded points"
        )
    ids = sorted(set(members))
    if len(ids) < 2:
        raise ParameterError("beta2 needs at least two points")
    idx = space.indices_of(ids)
    w = space.weights[idx]
    mass = float(w.sum())
    if mass <= 0:
        raise DegenerateInputError("subset carries no mass")
    pts = space.coords[idx]
    centroid = (w[:, None] * pts).sum(axis=0) / mass
    centered = pts - centroid
    moment = centered.T @ (w[:, None] * centered)
    eigvals, eigvecs = np.linalg.eigh(moment)
    direction = eigvecs[:, -1]
    nz = np.flatnonzero(np.abs(direction) > 1e-12)
    if nz.size and direction[nz[0]] < 0:
        direction = -direction

    sub = space.distance_submatrix(ids)
    diam = float(sub.max())
    if diam == 0.0:
        value = 0.0
    else:
        resid = float(np.trace(moment) - eigvals[-1])
        value = math.sqrt(max(resid, 0.0) / (mass * diam * diam))
    return Beta2Result(
        label=label,
        beta2=value,
        line_point=tuple(float(c) for c in centroid),
        line_direction=tuple(float(c) for c in direction),
    )


@dataclass(frozen=True)
class BsSumResult:
    point: int
    depth: int
    value: float
    skipped: int  # dyadic cubes with zero mass, left out of the sum
    terms: tuple[float, ...]


def bs_sum(space: MetricMeasureSpace, x: int, depth: int) -> BsSumResult:
    """Truncated sum of diam(Q)/mass(Q) over dyadic cubes around x.

    Cubes are half-open, sides 2^0 down to 2^-depth; a bounded value as
    depth grows is the flatness signature, divergence the obstruction.
    """
    if space.coords is None:
        raise UnsupportedMetricError(
            "bs_sum needs coordinate-embedded points"
        )
    if depth < 1:
        raise ParameterError("depth must be at least 1")
    point = space.coords[space.index_of(x)]
    d = point.shape[0]
    root_d = math.sqrt(d)
    terms: list[float] = []
    skipped = 0
    for m in range(depth + 1):
        side = 2.0**-m
        low = np.floor(point / side) * side
        inside = np.all(
            (space.coords >= low) & (space.coords < low + side), axis=1
        )
        cube_mass = float(space.weights[inside].sum())
        if cube_mass <= 0:
            skipped += 1
            continue
        terms.append(root_d * side / cube_mass)
    return BsSumResult(
        point=x,
        depth=depth,
        value=float(sum(terms)),
        skipped=skipped,
        terms=tuple(terms),
    )
