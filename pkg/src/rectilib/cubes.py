"""Metric dyadic cubes over a net hierarchy.

Cubes at level ``n`` are indexed by the level-``n`` net points.  Every
point is assigned to its nearest finest-level net point (ties to the
smaller id) and each net point to its nearest parent one level up, so
the cubes at each level partition the space exactly and children nest
inside parents by construction.

The sidelength convention is ``l(cube) = 5 * rho^n``.  Members always
sit inside the open outer ball ``B(center, l)`` once ``rho <= 1/4``
(the chain of nearest-parent hops has total length below ``2.4 *
rho^(n+1)``), and the achieved inner-ball constant -- the largest ``c``
with ``B(center, c*l)`` containing only members, over all cubes -- is
reported rather than assumed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ParameterError, UnknownIdentifierError
from .nets import NetHierarchy
from .space import MetricMeasureSpace

SIDELENGTH_FACTOR = 5.0


@dataclass(frozen=True)
class Cube:
    cube_id: int
    level: int
    center: int  # point id of the net point indexing this cube
    sidelength: float
    parent: int | None  # cube id
    children: tuple[int, ...]
    members: tuple[int, ...]  # point ids, ascending
    mass: float


@dataclass(frozen=True)
class CubeTree:
    rho: float
    c0_target: float
    n_min: int
    n_max: int
    cubes: tuple[Cube, ...]  # indexed by cube_id
    by_level: dict[int, tuple[int, ...]]  # level -> cube ids
    c0_achieved: float  # +inf when no cube has a non-member
    # (level, center point id) -> cube id
    index: dict[tuple[int, int], int] = field(repr=False, default_factory=dict)

    def cube(self, cube_id: int) -> Cube:
        if not 0 <= cube_id < len(self.cubes):
            raise UnknownIdentifierError(f"unknown cube id {cube_id}")
        return self.cubes[cube_id]

    def roots(self) -> tuple[int, ...]:
        return self.by_level[self.n_min]

    def descendants(self, cube_id: int) -> list[int]:
        """Cube ids of the full subtree, root first (preorder)."""
        out: list[int] = []
        stack = [cube_id]
        while stack:
            cid = stack.pop()
            out.append(cid)
            stack.extend(reversed(self.cubes[cid].children))
        return out

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "c0_target": self.c0_target,
            "c0_achieved": self.c0_achieved,
            "n_min": self.n_min,
            "n_max": self.n_max,
            "cubes": [
                {
                    "id": c.cube_id,
                    "level": c.level,
                    "center": c.center,
                    "sidelength": c.sidelength,
                    "parent": c.parent,
                    "children": list(c.children),
                    "mass": c.mass,
                    "n_members": len(c.members),
                }
                for c in self.cubes
            ],
        }


def _nearest(
    space: MetricMeasureSpace, candidate_idx: np.ndarray
) -> np.ndarray:
    """Index (into candidate_idx) of the nearest candidate per point.

    Candidates are scanned in ascending point-id order and updated only
    on a strict improvement, so equal distances resolve to the smaller
    candidate id.
    """
    best_d = np.full(len(space), math.inf)
    best_j = np.zeros(len(space), dtype=np.intp)
    order = np.argsort(
        np.array([space.ids[k] for k in candidate_idx], dtype=np.int64),
        kind="stable",
    )
    for j in order:
        row = space.dists_from(int(candidate_idx[j]))
        better = row < best_d
        best_d[better] = row[better]
        best_j[better] = j
    return best_j


def build_cubes(
    space: MetricMeasureSpace,
    hierarchy: NetHierarchy,
    c0_target: float = 1.0 / 500.0,
) -> CubeTree:
    """Partition tree over the hierarchy's levels."""
    if not (0 < c0_target < 1):
        raise ParameterError("c0_target must be in (0, 1)")
    levels = sorted(hierarchy.levels)
    if not levels:
        raise ParameterError("hierarchy has no levels")

    level_idx = {
        n: space.indices_of(hierarchy.levels[n]) for n in levels
    }
    # point -> position of its cube center within each level's net
    assign: dict[int, np.ndarray] = {}
    finest = levels[-1]
    assign[finest] = _nearest(space, level_idx[finest])
    for n_above, n in zip(levels[-2::-1], levels[:0:-1]):
        # map each level-n net point to its nearest level-n_above net
        # point, then compose with the existing point assignment
        centers = level_idx[n]
        up = _nearest(space, level_idx[n_above])[centers]
        assign[n_above] = up[assign[n]]

    cubes: list[dict] = []
    by_level: dict[int, tuple[int, ...]] = {}
    index: dict[tuple[int, int], int] = {}
    for n in levels:
        ids = []
        side = SIDELENGTH_FACTOR * hierarchy.rho**n
        groups: dict[int, list[int]] = {
            j: [] for j in range(len(level_idx[n]))
        }
        for point, j in enumerate(assign[n]):
            groups[int(j)].append(point)
        for j, net_k in enumerate(level_idx[n]):
            member_pos = groups[j]
            cube_id = len(cubes)
            center_id = space.ids[int(net_k)]
            cubes.append(
                {
                    "cube_id": cube_id,
                    "level": n,
                    "center": center_id,
                    "sidelength": side,
                    "parent": None,
                    "children": [],
                    "members": tuple(
                        sorted(space.ids[p] for p in member_pos)
                    ),
                    "mass": float(space.weights[member_pos].sum()),
                }
            )
            index[(n, center_id)] = cube_id
            ids.append(cube_id)
        by_level[n] = tuple(ids)

    # parent/child links: the child's center belongs to the parent cube
    for n_above, n in zip(levels, levels[1:]):
        for cid in by_level[n]:
            center = cubes[cid]["center"]
            k = space.index_of(center)
            parent_pos = int(assign[n_above][k])
            parent_id = by_level[n_above][parent_pos]
            cubes[cid]["parent"] = parent_id
            cubes[parent_id]["children"].append(cid)

    c0 = math.inf
    member_mask = np.zeros(len(space), dtype=bool)
    for c in cubes:
        idx = space.indices_of(c["members"])
        member_mask[:] = False
        member_mask[idx] = True
        if member_mask.all():
            continue
        row = space.dists_from(space.index_of(c["center"]))
        nearest_out = float(row[~member_mask].min())
        c0 = min(c0, nearest_out / c["sidelength"])

    frozen = tuple(
        Cube(
            cube_id=c["cube_id"],
            level=c["level"],
            center=c["center"],
            sidelength=c["sidelength"],
            parent=c["parent"],
            children=tuple(c["children"]),
            members=c["members"],
            mass=c["mass"],
        )
        for c in cubes
    )
    return CubeTree(
        rho=hierarchy.rho,
        c0_target=c0_target,
        n_min=levels[0],
        n_max=levels[-1],
        cubes=frozen,
        by_level=by_level,
        c0_achieved=c0,
        index=index,
    )


def cube_of(tree: CubeTree, point_id: int, level: int) -> int:
    """Cube id of the cube at ``level`` containing the point."""
    if level not in tree.by_level:
        raise UnknownIdentifierError(f"no cubes at level {level}")
    for cid in tree.by_level[level]:
        # membership tuples are sorted, so binary search would do; cube
        # counts per level are modest and this stays simple
        members = tree.cubes[cid].members
        lo, hi = 0, len(members)
        while lo < hi:
            mid = (lo + hi) // 2
            if members[mid] < point_id:
                lo = mid + 1
            else:
                hi = mid
        if lo < len(members) and members[lo] == point_id:
            return cid
    raise UnknownIdentifierError(
        f"point {point_id} not found at level {level}"
    )


@dataclass(frozen=True)
class CubeCheck:
    ok: bool
    partition_ok: bool
    nesting_ok: bool
    outer_ok: bool
    inner_ok: bool
    centers_ok: bool
    witness: tuple | None


def verify_cube_axioms(
    space: MetricMeasureSpace,
    hierarchy: NetHierarchy,
    tree: CubeTree,
) -> CubeCheck:
    """Re-verify the cube axioms from scratch.

    Checks, per level: the cubes partition the point set; every member
    sits inside the open outer ball of radius one sidelength; centers
    are exactly the net points.  Across levels: member sets nest into
    the parent.  The inner-ball axiom is the reported ``c0_achieved``
    being at least ``c0_target``.
    """
    partition_ok = nesting_ok = outer_ok = centers_ok = True
    witness = None
    all_ids = set(space.ids)
    for n, cids in sorted(tree.by_level.items()):
        seen: set[int] = set()
        count = 0
        for cid in cids:
            cube = tree.cubes[cid]
            count += len(cube.members)
            seen.update(cube.members)
            if outer_ok and cube.members:
                idx = space.indices_of(cube.members)
                row = space.dists_from(space.index_of(cube.center))[idx]
                far = np.flatnonzero(row >= cube.sidelength)
                if far.size:
                    outer_ok = False
                    witness = witness or (
                        "outer",
                        cid,
                        cube.members[int(far[0])],
                    )
            if nesting_ok and cube.parent is not None:
                parent_members = set(tree.cubes[cube.parent].members)
                stray = set(cube.members) - parent_members
                if stray:
                    nesting_ok = False
                    witness = witness or ("nesting", cid, sorted(stray)[0])
        if partition_ok and (seen != all_ids or count != len(all_ids)):
            partition_ok = False
            missing = sorted(all_ids - seen)
            witness = witness or (
                "partition",
                n,
                missing[0] if missing else "overlap",
            )
        if centers_ok:
            centers = {tree.cubes[cid].center for cid in cids}
            if centers != set(hierarchy.levels[n]):
                centers_ok = False
                witness = witness or ("centers", n)
    inner_ok = tree.c0_achieved >= tree.c0_target
    if not inner_ok:
        witness = witness or ("inner", tree.c0_achieved)
    return CubeCheck(
        ok=partition_ok and nesting_ok and outer_ok and inner_ok and centers_ok,
        partition_ok=partition_ok,
        nesting_ok=nesting_ok,
        outer_ok=outer_ok,
        inner_ok=inner_ok,
        centers_ok=centers_ok,
        witness=witness,
    )
