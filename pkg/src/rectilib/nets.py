"""Nested maximal separated nets.

Level ``n`` of a hierarchy is a maximal subset of points that is
pairwise ``rho^n``-separated; maximality makes it a ``rho^n``-cover.
Levels are nested: every coarser net is contained in every finer one
(coarser separation implies finer separation, so seeding each level
with the previous one preserves both axioms).

Strictness convention: separation is ``dist >= rho^n``; covering is
``dist < rho^n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ParameterError, UnknownIdentifierError
from .space import MetricMeasureSpace


@dataclass(frozen=True)
class NetHierarchy:
    rho: float
    n_min: int
    n_max: int
    levels: dict[int, tuple[int, ...]]  # level -> member point ids, scan order

    def scale(self, n: int) -> float:
        return self.rho**n

    def level(self, n: int) -> tuple[int, ...]:
        try:
            return self.levels[n]
        except KeyError:
            raise UnknownIdentifierError(f"no net at level {n}") from None

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "n_min": self.n_min,
            "n_max": self.n_max,
            "levels": {str(n): list(self.levels[n]) for n in sorted(self.levels)},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NetHierarchy":
        levels = {
            int(n): tuple(int(p) for p in members)
            for n, members in data["levels"].items()
        }
        return cls(
            rho=float(data["rho"]),
            n_min=int(data["n_min"]),
            n_max=int(data["n_max"]),
            levels=levels,
        )


def _check_rho(rho: float) -> None:
    if not (0.0 < rho < 1.0):
        raise ParameterError(f"rho must be in (0, 1), got {rho}")


def build_nets(
    space: MetricMeasureSpace,
    rho: float,
    n_min: int,
    n_max: int,
    *,
    seed_ids: Sequence[int] | None = None,
    order: str = "id",
) -> NetHierarchy:
    """Greedy nested nets for levels ``n_min..n_max``.

    Each level starts from the previous level's members (the coarsest
    from ``seed_ids``, which lets a caller force a particular root
    point), then scans the remaining points in ascending id order,
    admitting any point at distance >= ``rho^n`` from all current
    members.  ``order="farthest"`` scans by decreasing distance to the
    current members instead; it exists for benchmarking and keeps the
    same axioms but different (still deterministic) membership.
    """
    _check_rho(rho)
    if n_max < n_min:
        raise ParameterError("n_max must be >= n_min")
    if order not in ("id", "farthest"):
        raise ParameterError(f"unknown scan order {order!r}")
    if rho**n_min < space.diameter():
        import warnings

        warnings.warn(
            "coarsest net scale rho^n_min is below the diameter; "
            "the top level will hold several roots",
            stacklevel=2,
        )

    n_pts = len(space)
    order_ids = np.argsort(np.array(space.ids, dtype=np.int64), kind="stable")
    # mindist[k]: distance from point k to the current net members
    mindist = np.full(n_pts, math.inf)
    members: list[int] = []

    def admit(k: int) -> None:
        members.append(k)
        np.minimum(mindist, space.dists_from(k), out=mindist)

    levels: dict[int, tuple[int, ...]] = {}
    for n in range(n_min, n_max + 1):
        scale = rho**n
        if n == n_min and seed_ids:
            for pid in seed_ids:
                k = space.index_of(pid)
                if mindist[k] >= scale:
                    admit(k)
        if order == "id":
            for k in order_ids:
                if mindist[k] >= scale:
                    admit(int(k))
        else:
            while True:
                candidates = np.flatnonzero(mindist >= scale)
                if candidates.size == 0:
                    break
                far = candidates[np.argmax(mindist[candidates])]
                admit(int(far))
        levels[n] = tuple(space.ids[k] for k in members)
    return NetHierarchy(rho=rho, n_min=n_min, n_max=n_max, levels=levels)


def auto_levels(space: MetricMeasureSpace, rho: float) -> tuple[int, int]:
    """Default level range: one root above the diameter, floor near the
    sample's smallest gap."""
    _check_rho(rho)
    diam = space.diameter()
    if diam == 0.0:
        return 0, 0
    n_min = math.floor(math.log(diam) / math.log(rho))
    while rho**n_min <= diam:
        n_min -= 1
    gap = space.min_gap()
    n_max = n_min + 1
    while rho ** (n_max + 1) >= gap and n_max - n_min < 64:
        n_max += 1
    return n_min, max(n_max, n_min + 1)


@dataclass(frozen=True)
class NetCheck:
    ok: bool
    separation_ok: bool
    covering_ok: bool
    nesting_ok: bool
    witness: tuple | None  # (axiom, level, point ids...) for the first failure


def verify_nets(space: MetricMeasureSpace, h: NetHierarchy) -> NetCheck:
    """Exact re-verification of separation, covering, and nesting."""
    sep_ok = cov_ok = nest_ok = True
    witness = None
    previous: set[int] | None = None
    for n in sorted(h.levels):
        ids = h.levels[n]
        scale = h.rho**n
        idx = space.indices_of(ids)
        if previous is not None and nest_ok:
            missing = previous - set(ids)
            if missing:
                nest_ok = False
                witness = witness or ("nesting", n, sorted(missing)[0])
        previous = set(ids)
        # separation
        if sep_ok:
            for pos, k in enumerate(idx):
                row = space.dists_from(k)[idx[pos + 1 :]]
                bad = np.flatnonzero(row < scale)
                if bad.size:
                    sep_ok = False
                    other = ids[pos + 1 + int(bad[0])]
                    witness = witness or ("separation", n, ids[pos], other)
                    break
        # covering
        if cov_ok:
            best = np.full(len(space), math.inf)
            for k in idx:
                np.minimum(best, space.dists_from(k), out=best)
            bad = np.flatnonzero(best >= scale)
            if bad.size:
                cov_ok = False
                witness = witness or ("covering", n, space.ids[int(bad[0])])
    return NetCheck(
        ok=sep_ok and cov_ok and nest_ok,
        separation_ok=sep_ok,
        covering_ok=cov_ok,
        nesting_ok=nest_ok,
        witness=witness,
    )


def packing_counts(
    space: MetricMeasureSpace, h: NetHierarchy
) -> dict[int, int]:
    """Max count of next-level net points inside ``B(x, rho^n)``, per level.

    For a doubling measure this stays bounded by a constant depending
    only on the doubling ratio and ``rho``.
    """
    out: dict[int, int] = {}
    for n in sorted(h.levels):
        if n + 1 not in h.levels:
            break
        scale = h.rho**n
        fine = space.indices_of(h.levels[n + 1])
        worst = 0
        for k in space.indices_of(h.levels[n]):
            worst = max(worst, int((space.dists_from(k)[fine] < scale).sum()))
        out[n] = worst
    return out
