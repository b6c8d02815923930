"""Porous-cube detection, packing ratios, and the constant machinery.

A cube is porous when it meets the target set yet some sample point
within M sidelengths of its center sits at least delta sidelengths away
from the target set.  The packing (Carleson) check verifies that the
total mass of porous cubes inside any cube stays below C1 times that
cube's mass, with C1 assembled from the doubling estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .cubes import CubeTree
from .errors import ContainmentError, ParameterError
from .space import MetricMeasureSpace, TargetSet


@dataclass(frozen=True)
class PorosityConfig:
    M: float
    delta: float
    n0: int
    rho: float
    c0: float = 1.0 / 500.0
    C_mu: float | None = None  # measured doubling estimate


# each entry: (requirement shown to the user, test)
_CHECKS = (
    ("M > 10", lambda c: c.M > 10),
    ("delta < 4*rho", lambda c: c.delta < 4 * c.rho),
    ("rho < 3/(M+1)", lambda c: c.rho < 3 / (c.M + 1)),
    ("1/rho > M", lambda c: 1 / c.rho > c.M),
    ("n0 >= 2", lambda c: c.n0 >= 2),
    ("5*M*rho^n0 < 1", lambda c: 5 * c.M * c.rho**c.n0 < 1),
)
_STRICT_CHECKS = (
    ("rho < 1/1000", lambda c: c.rho < 1 / 1000),
    ("c0 = 1/500", lambda c: c.c0 == 1 / 500),
)


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    violations: tuple[str, ...]


def validate_config(
    cfg: PorosityConfig, strict: bool = False
) -> ValidationResult:
    """Check the parameter inequalities; violations name the failed one."""
    checks = _CHECKS + (_STRICT_CHECKS if strict else ())
    violations = tuple(name for name, test in checks if not test(cfg))
    return ValidationResult(ok=not violations, violations=violations)


@dataclass(frozen=True)
class PorousCube:
    cube: int  # cube id
    witness: int  # point id
    witness_gap: float  # distance from the witness to the target set


def dist_to_set(
    space: MetricMeasureSpace, member_ids: Iterable[int]
) -> np.ndarray:
    """Distance from every point to the nearest of the given points."""
    best = np.full(len(space), math.inf)
    for k in space.indices_of(member_ids):
        np.minimum(best, space.dists_from(int(k)), out=best)
    return best


def find_porous(
    space: MetricMeasureSpace,
    tree: CubeTree,
    target: TargetSet,
    cfg: PorosityConfig,
    force: bool = False,
) -> tuple[PorousCube, ...]:
    """All cubes under the target's root that are porous for cfg.

    A witness maximizes the gap to the target set among sample points
    strictly within M sidelengths of the cube center; ties go to the
    smaller point id.
    """
    if not force:
        result = validate_config(cfg)
        if not result.ok:
            raise ParameterError(
                "config violates: " + "; ".join(result.violations)
            )
    e_members = set(target.members)
    root = None
    for rid in tree.roots():
        if e_members <= set(tree.cubes[rid].members):
            root = rid
            break
    if root is None:
        raise ContainmentError(
            "target set is not contained in any single root cube"
        )
    gap = dist_to_set(space, target.members)
    id_order = np.argsort(np.asarray(space.ids), kind="stable")
    found: list[PorousCube] = []
    for cid in tree.descendants(root):
        cube = tree.cubes[cid]
        if not e_members.intersection(cube.members):
            continue
        row = space.dists_from(space.index_of(cube.center))
        near = row < cfg.M * cube.sidelength
        gaps = np.where(near, gap, -math.inf)
        best = float(gaps.max())
        if best >= cfg.delta * cube.sidelength:
            # first id (ascending) attaining the maximal gap
            pos = next(int(k) for k in id_order if gaps[k] == best)
            found.append(
                PorousCube(
                    cube=cid,
                    witness=space.ids[pos],
                    witness_gap=best,
                )
            )
    return tuple(sorted(found, key=lambda p: p.cube))


@dataclass(frozen=True)
class AppendixConstants:
    a: float
    C1: float
    b: float
    b_mode: str  # "supplied" | "observed"


def appendix_constants(
    cfg: PorosityConfig,
    b: float | None = None,
    b_observed: int | None = None,
) -> AppendixConstants:
    """Assemble the packing bound C1 from the doubling estimate.

        a  = C_mu^(log2(c0 / (4 M))) * (4 / rho)^(log2 C_mu)
        C1 = a * b * C_mu^(log2(M / c0) + 1)

    The exponents telescope, so C1 also equals
    b * C_mu^(log2(4 / rho) - 1); both forms are evaluated and must
    agree, guarding against transcription slips.  The multiplicity b
    is supplied, or taken from an observed shadow-map multiplicity
    (floored at 1 so an empty family still yields a usable bound).
    """
    if cfg.C_mu is None or not (cfg.C_mu > 1):
        raise ParameterError("constants need a doubling estimate C_mu > 1")
    if b is not None:
        b_mode = "supplied"
        b_val = float(b)
    elif b_observed is not None:
        b_mode = "observed"
        b_val = float(max(1, b_observed))
    else:
        b_mode = "supplied"
        b_val = 1.0
    c = cfg.C_mu
    a = c ** math.log2(cfg.c0 / (4 * cfg.M)) * (4 / cfg.rho) ** math.log2(c)
    c1 = a * b_val * c ** (math.log2(cfg.M / cfg.c0) + 1)
    c1_direct = b_val * c ** (math.log2(4 / cfg.rho) - 1)
    if not math.isclose(c1, c1_direct, rel_tol=1e-9):
        raise ParameterError(
            f"constant assembly disagrees: {c1} vs {c1_direct}"
        )
    return AppendixConstants(a=a, C1=c1, b=b_val, b_mode=b_mode)


@dataclass(frozen=True)
class CarlesonReport:
    ratios: dict[int, float]  # cube id -> packed-mass ratio
    worst_ratio: float
    worst_cube: int | None
    constants: AppendixConstants
    skipped: int  # zero-mass cubes left out
    ok: bool


def carleson_check(
    tree: CubeTree,
    porous: Sequence[PorousCube],
    cfg: PorosityConfig,
    b: float | None = None,
    b_observed: int | None = None,
) -> CarlesonReport:
    """Packed-mass ratio of every cube against the assembled bound.

    The ratio of a cube is the sum of masses of porous cubes inside it
    (itself included) divided by its own mass; nested porous cubes each
    contribute their full mass, matching the packing sum being bounded.
    """
    constants = appendix_constants(cfg, b=b, b_observed=b_observed)
    porous_ids = {p.cube for p in porous}
    packed = [0.0] * len(tree.cubes)
    ratios: dict[int, float] = {}
    skipped = 0
    worst = -math.inf
    worst_cube: int | None = None
    for n in sorted(tree.by_level, reverse=True):
        for cid in tree.by_level[n]:
            cube = tree.cubes[cid]
            total = cube.mass if cid in porous_ids else 0.0
            for child in cube.children:
                total += packed[child]
            packed[cid] = total
            if cube.mass <= 0:
                skipped += 1
                continue
            ratios[cid] = total / cube.mass
            if ratios[cid] > worst:
                worst = ratios[cid]
                worst_cube = cid
    if worst == -math.inf:
        worst = 0.0
    return CarlesonReport(
        ratios=ratios,
        worst_ratio=worst,
        worst_cube=worst_cube,
        constants=constants,
        skipped=skipped,
        ok=worst <= constants.C1,
    )


@dataclass(frozen=True)
class ShadowRecord:
    cube: int
    witness: int
    shadow: int | None  # largest empty-neighborhood cube holding the witness
    scale_lower_ok: bool | None  # delta*l(cube) <= (4/rho)*l(shadow)
    scale_upper_ok: bool | None  # l(shadow) <= (2M/c0)*l(cube)


@dataclass(frozen=True)
class ShadowReport:
    records: tuple[ShadowRecord, ...]
    maximal: tuple[int, ...]  # the empty-neighborhood antichain
    b_observed: int  # max number of porous cubes sharing one shadow
    c0_used: float
    failures: tuple[int, ...]  # porous cubes whose witness found no shadow
    ok: bool  # every mapped pair passes both scale comparisons


def shadow_map(
    space: MetricMeasureSpace,
    tree: CubeTree,
    target: TargetSet,
    porous: Sequence[PorousCube],
    cfg: PorosityConfig,
) -> ShadowReport:
    """Map porous cubes to maximal cubes clear of the target set.

    The antichain consists of maximal cubes whose doubled center ball
    misses the target set entirely.  Each porous cube's witness lies in
    at most one antichain cube (its shadow); for every mapped pair the
    two sidelengths must be comparable, which is checked with the
    achieved inner-ball constant rather than the nominal target.
    A witness contained in no antichain cube at the available levels is
    a resolution failure and is recorded, not raised.
    """
    gap = dist_to_set(space, target.members)
    maximal: list[int] = []
    stack = list(tree.roots())
    while stack:
        cid = stack.pop()
        cube = tree.cubes[cid]
        center_gap = gap[space.index_of(cube.center)]
        if center_gap >= 2 * cube.sidelength:
            maximal.append(cid)
        else:
            stack.extend(cube.children)
    maximal.sort()
    in_antichain = set(maximal)

    # point id -> containing antichain cube (at most one: it is an antichain)
    shadow_of_point: dict[int, int] = {}
    for cid in maximal:
        for pid in tree.cubes[cid].members:
            shadow_of_point[pid] = cid

    c0_used = tree.c0_achieved
    if not math.isfinite(c0_used):
        c0_used = tree.c0_target
    records: list[ShadowRecord] = []
    failures: list[int] = []
    load: dict[int, int] = {}
    all_ok = True
    slack = 1.0 + 1e-12
    for p in porous:
        cube = tree.cubes[p.cube]
        shadow = shadow_of_point.get(p.witness)
        if shadow is None:
            failures.append(p.cube)
            records.append(
                ShadowRecord(
                    cube=p.cube,
                    witness=p.witness,
                    shadow=None,
                    scale_lower_ok=None,
                    scale_upper_ok=None,
                )
            )
            continue
        load[shadow] = load.get(shadow, 0) + 1
        l_cube = cube.sidelength
        l_shadow = tree.cubes[shadow].sidelength
        lower_ok = cfg.delta * l_cube <= (4 / cfg.rho) * l_shadow * slack
        upper_ok = l_shadow <= (2 * cfg.M / c0_used) * l_cube * slack
        all_ok = all_ok and lower_ok and upper_ok
        records.append(
            ShadowRecord(
                cube=p.cube,
                witness=p.witness,
                shadow=shadow,
                scale_lower_ok=lower_ok,
                scale_upper_ok=upper_ok,
            )
        )
    return ShadowReport(
        records=tuple(records),
        maximal=tuple(maximal),
        b_observed=max(load.values(), default=0),
        c0_used=c0_used,
        failures=tuple(failures),
        ok=all_ok,
    )
