"""Finite metric measure spaces and ball-based measure estimates.

A space is a finite point set with positive total mass, seen either
through coordinates in ``R^d`` (Euclidean distance) or through an
explicit distance matrix.  All balls are open: ``B(x, r)`` contains the
points at distance strictly less than ``r``.

Conventions used throughout the package:

* point ids are integers; operations taking ids raise
  :class:`~rectilib.errors.UnknownIdentifierError` on unknown ones;
* weights are nonnegative with positive total;
* ties in greedy selections are broken by ascending point id, so every
  operation is deterministic.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateInputError,
    InputError,
    ParameterError,
    UnknownIdentifierError,
)

# Above this point count the full distance matrix is not cached and rows
# are recomputed on demand.
_DENSE_LIMIT = 5000


class MetricMeasureSpace:
    """A finite metric space with a weight (mass) per point.

    Build instances with :meth:`from_coords` or :meth:`from_matrix`;
    both validate their input.  Distances are served row-wise through
    :meth:`dists_from`; for small spaces the full matrix is cached.
    """

    def __init__(
        self,
        ids: Sequence[int],
        weights: np.ndarray,
        *,
        coords: np.ndarray | None = None,
        matrix: np.ndarray | None = None,
    ):
        self.ids: tuple[int, ...] = tuple(int(i) for i in ids)
        self.weights = np.asarray(weights, dtype=float)
        self.coords = None if coords is None else np.asarray(coords, dtype=float)
        self._matrix = None if matrix is None else np.asarray(matrix, dtype=float)
        self._index = {pid: k for k, pid in enumerate(self.ids)}
        self._diameter: float | None = None
        self._min_gap: float | None = None

    # -- construction ---------------------------------------------------

    @classmethod
    def from_coords(
        cls,
        ids: Sequence[int],
        coords: np.ndarray,
        weights: np.ndarray,
    ) -> "MetricMeasureSpace":
        coords = np.asarray(coords, dtype=float)
        if coords.ndim != 2:
            raise ParameterError("coords must be a 2-d array (n points by d axes)")
        space = cls(ids, np.asarray(weights, dtype=float), coords=coords)
        space._validate_common()
        if not np.all(np.isfinite(coords)):
            raise ParameterError("coordinates must be finite")
        return space

    @classmethod
    def from_matrix(
        cls,
        ids: Sequence[int],
        matrix: np.ndarray,
        weights: np.ndarray,
        *,
        triangle_samples: int = 1000,
        seed: int = 0,
    ) -> "MetricMeasureSpace":
        """Build from an explicit distance matrix.

        Symmetry and the zero diagonal are checked exactly; the triangle
        inequality is validated on at least ``triangle_samples`` random
        triples (all triples when the space is small enough).
        """
        matrix = np.asarray(matrix, dtype=float)
        n = len(ids)
        if matrix.shape != (n, n):
            raise ParameterError(
                f"distance matrix shape {matrix.shape} does not match {n} ids"
            )
        if not np.all(np.isfinite(matrix)):
            raise ParameterError("distances must be finite")
        if np.any(matrix < 0):
            raise ParameterError("distances must be nonnegative")
        if np.any(np.diag(matrix) != 0.0):
            raise ParameterError("distance matrix diagonal must be zero")
        if not np.array_equal(matrix, matrix.T):
            raise ParameterError("distance matrix must be symmetric")
        space = cls(ids, np.asarray(weights, dtype=float), matrix=matrix)
        space._validate_common()
        space._validate_triangle(triangle_samples, seed)
        return space

    def _validate_common(self) -> None:
        n = len(self.ids)
        if n == 0:
            raise DegenerateInputError("a space needs at least one point")
        if len(set(self.ids)) != n:
            raise ParameterError("point ids must be unique")
        if self.weights.shape != (n,):
            raise ParameterError("weights must be one value per point")
        if not np.all(np.isfinite(self.weights)):
            raise ParameterError("weights must be finite")
        if np.any(self.weights < 0):
            raise ParameterError("weights must be nonnegative")
        if self.weights.sum() <= 0:
            raise DegenerateInputError("total mass must be positive")

    def _validate_triangle(self, samples: int, seed: int) -> None:
        n = len(self.ids)
        m = self._matrix
        assert m is not None
        tol = 1e-9 * max(1.0, float(m.max()))
        if n <= 12:  # all triples are cheap enough to check
            idx = np.arange(n)
            for a in idx:
                via = m[a][:, None] + m[:, :]  # d(a,b) + d(b,c) over (b, c)
                if np.any(via.min(axis=0) + tol < m[a]):
                    raise ParameterError("triangle inequality fails")
            return
        rng = np.random.default_rng(seed)
        count = max(samples, 1000)
        abc = rng.integers(0, n, size=(count, 3))
        lhs = m[abc[:, 0], abc[:, 2]]
        rhs = m[abc[:, 0], abc[:, 1]] + m[abc[:, 1], abc[:, 2]]
        bad = lhs > rhs + tol
        if np.any(bad):
            a, b, c = abc[np.argmax(bad)]
            raise ParameterError(
                f"triangle inequality fails on sampled triple "
                f"({self.ids[a]}, {self.ids[b]}, {self.ids[c]})"
            )

    # -- basic queries ---------------------------------------------------

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def index_of(self, point_id: int) -> int:
        try:
            return self._index[point_id]
        except KeyError:
            raise UnknownIdentifierError(f"unknown point id {point_id!r}") from None

    def indices_of(self, point_ids: Iterable[int]) -> np.ndarray:
        return np.array([self.index_of(p) for p in point_ids], dtype=np.intp)

    def dists_from(self, index: int) -> np.ndarray:
        """Distances from the point at ``index`` to every point."""
        if self._matrix is not None:
            return self._matrix[index]
        diff = self.coords - self.coords[index]
        return np.sqrt(np.einsum("ij,ij->i", diff, diff))

    def distance_matrix(self) -> np.ndarray:
        """Full matrix; cached, refused above a size guard."""
        if self._matrix is None:
            if len(self) > _DENSE_LIMIT:
                raise ParameterError(
                    f"refusing to materialize a {len(self)}^2 distance matrix"
                )
            diff = self.coords[:, None, :] - self.coords[None, :, :]
            self._matrix = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        return self._matrix

    def distance_submatrix(self, point_ids: Iterable[int]) -> np.ndarray:
        """Pairwise distances among the given points, in the given order."""
        idx = self.indices_of(point_ids)
        if self._matrix is not None:
            return self._matrix[np.ix_(idx, idx)]
        sub = self.coords[idx]
        diff = sub[:, None, :] - sub[None, :, :]
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))

    def diameter(self) -> float:
        if self._diameter is None:
            best = 0.0
            for k in range(len(self)):
                best = max(best, float(self.dists_from(k).max()))
            self._diameter = best
        return self._diameter

    def min_gap(self) -> float:
        """Smallest positive inter-point distance (0.0 for a singleton)."""
        if self._min_gap is None:
            best = math.inf
            for k in range(len(self)):
                row = self.dists_from(k)
                positive = row[row > 0]
                if positive.size:
                    best = min(best, float(positive.min()))
            self._min_gap = 0.0 if best is math.inf else best
        return self._min_gap


@dataclass(frozen=True)
class Ball:
    """Open ball: the points at distance < ``radius`` from ``center``."""

    center: int
    radius: float

    def __post_init__(self):
        if not (self.radius > 0) or not math.isfinite(self.radius):
            raise ParameterError(f"ball radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class TargetSet:
    """The subset of points a curve must pass through.

    ``xi0`` is a designated basepoint and ``r0`` an enclosing scale:
    every member lies in ``B(xi0, r0/2)``.
    """

    members: tuple[int, ...]
    xi0: int
    r0: float


def validate_target(space: MetricMeasureSpace, target: TargetSet) -> None:
    if not target.members:
        raise DegenerateInputError("target set must be nonempty")
    if len(set(target.members)) != len(target.members):
        raise ParameterError("target set members must be unique")
    if not (target.r0 > 0):
        raise ParameterError("target enclosing scale r0 must be positive")
    idx = space.indices_of(target.members)
    center = space.index_of(target.xi0)
    dists = space.dists_from(center)[idx]
    if np.any(dists >= target.r0 / 2):
        worst = target.members[int(np.argmax(dists))]
        raise ParameterError(
            f"member {worst} is not inside B(xi0, r0/2) "
            f"(distance {float(dists.max()):.6g} >= {target.r0 / 2:.6g})"
        )


def enclosing_target(
    space: MetricMeasureSpace, members: Sequence[int] | None = None
) -> TargetSet:
    """Canonical target set over ``members`` (default: every point).

    The basepoint is the member with the smallest maximal distance to
    the other members (ties: smaller id); ``r0`` is twice that
    eccentricity, padded so the strict enclosure holds.
    """
    ids = tuple(sorted(space.ids if members is None else (int(m) for m in members)))
    if not ids:
        raise DegenerateInputError("target set must be nonempty")
    idx = space.indices_of(ids)
    best_ecc = math.inf
    best_id = ids[0]
    for pid, k in zip(ids, idx):
        ecc = float(space.dists_from(k)[idx].max())
        if ecc < best_ecc:
            best_ecc = ecc
            best_id = pid
    r0 = 1e-9 if best_ecc == 0 else 2.0 * best_ecc * (1.0 + 1e-9)
    return TargetSet(members=ids, xi0=best_id, r0=r0)


# -- measures of balls -------------------------------------------------


def ball_mass(space: MetricMeasureSpace, ball: Ball) -> float:
    """Mass of the open ball."""
    k = space.index_of(ball.center)
    row = space.dists_from(k)
    return float(space.weights[row < ball.radius].sum())


def ball_members(space: MetricMeasureSpace, ball: Ball) -> np.ndarray:
    """Indices of the points inside the open ball."""
    k = space.index_of(ball.center)
    return np.flatnonzero(space.dists_from(k) < ball.radius)


@dataclass(frozen=True)
class DoublingEstimate:
    c_hat: float
    evaluated: int
    skipped: int
    worst_center: int
    worst_radius: float


def doubling_estimate(
    space: MetricMeasureSpace,
    radii: Sequence[float],
    centers: Sequence[int] | None = None,
) -> DoublingEstimate:
    """Largest sampled ratio mass(B(x, 2r)) / mass(B(x, r)).

    Pairs with an empty inner ball mass are skipped and counted; if
    every pair is skipped the input is degenerate.
    """
    radii = [float(r) for r in radii]
    if not radii or any(r <= 0 for r in radii):
        raise ParameterError("radii must be a nonempty list of positive values")
    ids = list(space.ids) if centers is None else [int(c) for c in centers]
    if not ids:
        raise ParameterError("centers must be nonempty")
    idx = space.indices_of(ids)

    best = -math.inf
    best_center, best_radius = ids[0], radii[0]
    evaluated = 0
    skipped = 0
    w = space.weights
    for pid, k in zip(ids, idx):
        row = space.dists_from(k)
        for r in radii:
            inner = float(w[row < r].sum())
            if inner == 0.0:
                skipped += 1
                continue
            outer = float(w[row < 2.0 * r].sum())
            evaluated += 1
            ratio = outer / inner
            if ratio > best:
                best = ratio
                best_center, best_radius = pid, r
    if evaluated == 0:
        raise DegenerateInputError(
            "every sampled (center, radius) pair had an empty inner ball",
            skipped=skipped,
        )
    return DoublingEstimate(
        c_hat=best,
        evaluated=evaluated,
        skipped=skipped,
        worst_center=best_center,
        worst_radius=best_radius,
    )


# -- Vitali-style covers ----------------------------------------------


def vitali_subcover(
    space: MetricMeasureSpace, balls: Sequence[Ball]
) -> list[int]:
    """Greedy disjoint subfamily in Vitali order.

    Balls are visited by decreasing radius (ties: smaller center id,
    then input position); a ball is kept when its point-membership set
    is disjoint from every kept ball.  Every input ball's center then
    lies inside the 5-times dilate of some kept ball.

    Returns positions into ``balls`` of the kept subfamily, in
    selection order.
    """
    if not balls:
        return []
    order = sorted(
        range(len(balls)),
        key=lambda j: (-balls[j].radius, balls[j].center, j),
    )
    taken: np.ndarray = np.zeros(len(space), dtype=bool)
    kept: list[int] = []
    for j in order:
        members = ball_members(space, balls[j])
        if not np.any(taken[members]):
            kept.append(j)
            taken[members] = True
    return kept


@dataclass(frozen=True)
class HausdorffEstimate:
    upper: float
    lower: float
    delta: float
    r_min: float
    upper_balls: tuple[Ball, ...]
    lower_balls: tuple[Ball, ...]


def _cover_radius_grid(delta: float, r_min: float) -> list[float]:
    # Ascending dyadic grid of candidate radii, capped strictly under delta,
    # floored at r_min (the floor itself is always a candidate).
    top = delta * (1.0 - 1e-9)
    if top <= r_min:
        return [r_min]
    radii = [top]
    while radii[-1] / 2.0 > r_min:
        radii.append(radii[-1] / 2.0)
    radii.append(r_min)
    return radii[::-1]


def hausdorff_estimate(
    space: MetricMeasureSpace,
    target: TargetSet | Sequence[int],
    delta: float,
    r_min: float | None = None,
) -> HausdorffEstimate:
    """Spherical one-dimensional measure surrogate at gauge ``delta``.

    upper: sum of diameters ``2 r_i`` of a greedy cover of the target by
    balls centered in it with radii < ``delta``.  Each step takes the
    (center, radius) pair covering the most still-uncovered mass per
    unit radius; ties prefer the smaller radius, then the smaller
    center id.  Radii live on a dyadic grid with floor ``r_min``
    (default: half the smallest positive gap between target points), so
    isolated points cost ``2 r_min`` each rather than collapsing the
    estimate.

    lower: ``sum 2 r_i / 5`` over the Vitali subfamily of the chosen
    cover -- the disjoint family whose 5-times dilates cover the chosen
    centers.
    """
    if not (delta > 0):
        raise ParameterError("delta must be positive")
    members = target.members if isinstance(target, TargetSet) else tuple(target)
    members = tuple(sorted(int(m) for m in members))
    if not members:
        raise DegenerateInputError("target set must be nonempty")
    idx = space.indices_of(members)

    sub = np.stack([space.dists_from(k)[idx] for k in idx])
    if r_min is None:
        positive = sub[sub > 0]
        r_min = (
            float(positive.min()) / 2.0 if positive.size else delta * 1e-9
        )
    if not (0 < r_min < delta):
        raise ParameterError("need 0 < r_min < delta")

    weights = space.weights[idx]
    radii = _cover_radius_grid(delta, r_min)
    uncovered = np.ones(len(members), dtype=bool)
    chosen: list[Ball] = []
    while np.any(uncovered):
        w_unc = np.where(uncovered, weights, 0.0)
        best_gain = 0.0
        best_c = -1
        best_r = radii[0]
        for r in radii:  # ascending: strict > keeps the smallest tied radius
            gains = (sub < r) @ w_unc / r
            c = int(np.argmax(gains))  # first (smallest id) among equal gains
            if gains[c] > best_gain:
                best_gain = float(gains[c])
                best_c = c
                best_r = r
        if best_gain <= 0.0:
            # Only zero-weight points remain; cover them at the floor radius.
            for c in np.flatnonzero(uncovered):
                if uncovered[c]:
                    chosen.append(Ball(center=members[int(c)], radius=r_min))
                    uncovered[sub[int(c)] < r_min] = False
                    uncovered[int(c)] = False
            break
        chosen.append(Ball(center=members[best_c], radius=best_r))
        uncovered[sub[best_c] < best_r] = False
        uncovered[best_c] = False  # the center itself is always at distance 0

    upper = float(sum(2.0 * b.radius for b in chosen))
    kept = vitali_subcover(space, chosen)
    lower_balls = tuple(chosen[j] for j in kept)
    lower = float(sum(2.0 * b.radius for b in lower_balls)) / 5.0
    return HausdorffEstimate(
        upper=upper,
        lower=lower,
        delta=delta,
        r_min=r_min,
        upper_balls=tuple(chosen),
        lower_balls=lower_balls,
    )


# -- linear mass lower bound ------------------------------------------


@dataclass(frozen=True)
class MassCheckResult:
    ok: bool
    factor: float
    radii: tuple[float, ...]
    worst_id: int
    worst_radius: float
    worst_margin: float  # min over checks of mass - factor * r


def dyadic_radii(r_lo: float, r_hi: float) -> list[float]:
    """Geometric grid of ratio 1/2 from ``r_hi`` down to ``r_lo``."""
    if not (0 < r_lo <= r_hi):
        raise ParameterError("need 0 < r_lo <= r_hi")
    radii = []
    r = float(r_hi)
    while r >= r_lo * (1.0 - 1e-12):
        radii.append(r)
        r /= 2.0
    return radii


def linear_mass_check(
    space: MetricMeasureSpace,
    point_ids: Sequence[int],
    r_lo: float,
    r_hi: float,
    factor: float = 2.0,
) -> MassCheckResult:
    """Check ``mass(B(x, r)) >= factor * r`` on the dyadic radius grid."""
    ids = sorted(int(p) for p in point_ids)
    if not ids:
        raise DegenerateInputError("no points to check")
    radii = dyadic_radii(r_lo, r_hi)
    worst = math.inf
    worst_id, worst_r = ids[0], radii[0]
    w = space.weights
    for pid in ids:
        row = space.dists_from(space.index_of(pid))
        for r in radii:
            margin = float(w[row < r].sum()) - factor * r
            if margin < worst:
                worst = margin
                worst_id, worst_r = pid, r
    return MassCheckResult(
        ok=worst >= 0.0,
        factor=factor,
        radii=tuple(radii),
        worst_id=worst_id,
        worst_radius=worst_r,
        worst_margin=worst,
    )


# -- IO ----------------------------------------------------------------


def _parse_id(raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"point id {raw!r} is not an integer") from None


def load_csv(path: str) -> MetricMeasureSpace:
    """Point cloud from CSV with header ``id,x1,...,xd,weight``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if len(header) < 3 or header[0] != "id" or header[-1] != "weight":
            raise InputError(
                f"{path}: expected header id,x1,...,xd,weight, got {header}"
            )
        dim = len(header) - 2
        ids: list[int] = []
        coords: list[list[float]] = []
        weights: list[float] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != dim + 2:
                raise InputError(f"{path}:{lineno}: expected {dim + 2} fields")
            ids.append(_parse_id(row[0]))
            try:
                coords.append([float(v) for v in row[1:-1]])
                weights.append(float(row[-1]))
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
    if not ids:
        raise InputError(f"{path}: no data rows")
    return MetricMeasureSpace.from_coords(
        ids, np.array(coords), np.array(weights)
    )


def save_csv(space: MetricMeasureSpace, path: str) -> None:
    if space.coords is None:
        raise ParameterError("matrix-backed spaces cannot be saved as point CSV")
    dim = space.coords.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id"] + [f"x{k + 1}" for k in range(dim)] + ["weight"])
        for pid, xs, w in zip(space.ids, space.coords, space.weights):
            writer.writerow([pid] + [repr(float(v)) for v in xs] + [repr(float(w))])


def load_json(path: str) -> MetricMeasureSpace:
    """Point cloud from JSON: a list of {id, coords, weight} records."""
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, list) or not data:
        raise InputError(f"{path}: expected a nonempty list of point records")
    ids, coords, weights = [], [], []
    for rec in data:
        try:
            ids.append(int(rec["id"]))
            coords.append([float(v) for v in rec["coords"]])
            weights.append(float(rec["weight"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{path}: bad point record {rec!r} ({exc})") from None
    return MetricMeasureSpace.from_coords(
        ids, np.array(coords), np.array(weights)
    )


def load_matrix(matrix_path: str, weights_path: str) -> MetricMeasureSpace:
    """Explicit metric: square distance CSV plus an ``id,weight`` CSV."""
    with open(weights_path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if header != ["id", "weight"]:
            raise InputError(f"{weights_path}: expected header id,weight")
        ids, weights = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise InputError(f"{weights_path}:{lineno}: expected 2 fields")
            ids.append(_parse_id(row[0]))
            try:
                weights.append(float(row[1]))
            except ValueError as exc:
                raise InputError(f"{weights_path}:{lineno}: {exc}") from None
    try:
        matrix = np.loadtxt(matrix_path, delimiter=",", dtype=float, ndmin=2)
    except ValueError as exc:
        raise InputError(f"{matrix_path}: {exc}") from None
    return MetricMeasureSpace.from_matrix(ids, matrix, np.array(weights))
