"""End-to-end batch pipeline: space to parametrized curve, one report.

The pipeline is stage-sequential and deterministic: identical run
configurations produce byte-identical JSON reports.  Wall-clock
timings are collected but kept out of the report (they go to stderr
or a sidecar file) so reports stay reproducible.

Exit-code convention for front ends: 0 when every verified invariant
holds, 1 when one fails, 2 for input or configuration problems.
"""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .cubes import build_cubes, verify_cube_axioms
from .curve import (
    assemble_gamma,
    build_bridges,
    check_parametrization,
    connectivity,
    edges_csv,
    key_str,
    length_budget,
    parametrize,
    parametrization_csv,
)
from .density import density_profiles, resolution_scale
from .errors import (
    DegenerateInputError,
    DisconnectedError,
    ParameterError,
    RectilibError,
)
from .generators import GeneratorSpec, generate
from .nets import auto_levels, build_nets, verify_nets
from .porosity import (
    PorosityConfig,
    carleson_check,
    find_porous,
    shadow_map,
    validate_config,
)
from .space import (
    MetricMeasureSpace,
    TargetSet,
    doubling_estimate,
    dyadic_radii,
    enclosing_target,
    load_csv,
    load_json,
    load_matrix,
)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class RunConfig:
    # exactly one input source: a file, a matrix pair, or a generator
    input: str | None = None
    matrix: str | None = None
    weights: str | None = None
    kind: str | None = None
    resolution: int = 0
    params: dict = field(default_factory=dict)
    seed: int = 0
    # geometry parameters
    rho: float = 1.0 / 16.0
    c0: float = 1.0 / 500.0
    M: float = 11.0
    delta: float = 0.003
    n0: int = 2
    eps_res: float | None = None  # default: twice the finest net scale
    r_lo: float | None = None
    r_hi: float | None = None
    n_min: int | None = None
    n_max: int | None = None
    bridge_mode: str = "complete"
    strict: bool = False
    out_dir: str | None = None


def load_space(cfg: RunConfig) -> tuple[MetricMeasureSpace, TargetSet | None]:
    """Resolve the configured input source into a space and target."""
    sources = [
        cfg.input is not None,
        cfg.matrix is not None,
        cfg.kind is not None,
    ]
    if sum(sources) != 1:
        raise ParameterError(
            "exactly one of input file, matrix pair, or generator required"
        )
    if cfg.input is not None:
        if cfg.input.endswith(".json"):
            return load_json(cfg.input), None
        return load_csv(cfg.input), None
    if cfg.matrix is not None:
        if cfg.weights is None:
            raise ParameterError("matrix input needs a weights file")
        return load_matrix(cfg.matrix, cfg.weights), None
    spec = GeneratorSpec(
        kind=cfg.kind,
        resolution=cfg.resolution,
        params=dict(cfg.params),
        seed=cfg.seed,
    )
    return generate(spec)


def _plain(obj):
    """Recursively coerce report content to JSON-native types."""
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(x) for x in obj]
    return obj


def report_json(report: dict) -> str:
    return json.dumps(_plain(report), sort_keys=True, indent=2) + "\n"


def run_pipeline(
    cfg: RunConfig,
) -> tuple[dict, list[str], list[tuple[str, float]]]:
    """Execute every stage; returns (report, failures, timings).

    Failures list the verified invariants that did not hold; a
    disconnected curve is a reported outcome, not a failure.  Stage
    errors propagate, prefixed with the stage name.
    """
    timings: list[tuple[str, float]] = []
    failures: list[str] = []
    report: dict = {"schema": SCHEMA_VERSION, "config": asdict(cfg)}

    def stage(name, fn):
        t0 = time.perf_counter()
        try:
            return fn()
        except RectilibError as exc:
            raise type(exc)(f"stage {name}: {exc}") from exc
        finally:
            timings.append((name, time.perf_counter() - t0))

    space, target = stage("load", lambda: load_space(cfg))
    if target is None:
        target = enclosing_target(space, list(space.ids))
    report["space"] = {
        "points": len(space),
        "total_mass": space.total_mass,
        "diameter": space.diameter(),
        "min_gap": space.min_gap(),
        "target_size": len(target.members),
    }

    pcfg_unmeasured = PorosityConfig(
        M=cfg.M, delta=cfg.delta, n0=cfg.n0, rho=cfg.rho, c0=cfg.c0
    )
    validation = stage(
        "validate",
        lambda: validate_config(pcfg_unmeasured, strict=cfg.strict),
    )
    report["validation"] = {
        "ok": validation.ok,
        "violations": list(validation.violations),
        "strict": cfg.strict,
    }
    if not validation.ok:
        raise ParameterError(
            "stage validate: config violates: "
            + "; ".join(validation.violations)
        )

    def run_doubling():
        r_lo = 2 * space.min_gap()
        r_hi = space.diameter() / 2
        if not 0 < r_lo < r_hi:
            raise DegenerateInputError(
                "space too small for a doubling estimate"
            )
        return doubling_estimate(space, dyadic_radii(r_lo, r_hi))

    doubling = stage("doubling", run_doubling)
    report["doubling"] = {
        "c_hat": doubling.c_hat,
        "evaluated": doubling.evaluated,
        "skipped": doubling.skipped,
        "worst_center": doubling.worst_center,
        "worst_radius": doubling.worst_radius,
    }
    pcfg = PorosityConfig(
        M=cfg.M,
        delta=cfg.delta,
        n0=cfg.n0,
        rho=cfg.rho,
        c0=cfg.c0,
        C_mu=max(doubling.c_hat, 1.0 + 1e-9),
    )

    def run_nets():
        if cfg.n_min is not None and cfg.n_max is not None:
            lo, hi = cfg.n_min, cfg.n_max
        else:
            lo, hi = auto_levels(space, cfg.rho)
        return build_nets(
            space, cfg.rho, lo, hi, seed_ids=[target.xi0]
        )

    hierarchy = stage("nets", run_nets)
    net_check = stage("verify_nets", lambda: verify_nets(space, hierarchy))
    report["nets"] = {
        "levels": {
            str(n): len(hierarchy.levels[n])
            for n in sorted(hierarchy.levels)
        },
        "separation_ok": net_check.separation_ok,
        "covering_ok": net_check.covering_ok,
        "nesting_ok": net_check.nesting_ok,
        "ok": net_check.ok,
    }
    if not net_check.ok:
        failures.append(f"nets: witness {net_check.witness}")

    tree = stage("cubes", lambda: build_cubes(space, hierarchy, cfg.c0))
    cube_check = stage(
        "verify_cubes", lambda: verify_cube_axioms(space, hierarchy, tree)
    )
    report["cubes"] = {
        "count": len(tree.cubes),
        "per_level": {
            str(n): len(tree.by_level[n]) for n in sorted(tree.by_level)
        },
        "c0_achieved": tree.c0_achieved
        if np.isfinite(tree.c0_achieved)
        else None,
        "partition_ok": cube_check.partition_ok,
        "nesting_ok": cube_check.nesting_ok,
        "outer_ok": cube_check.outer_ok,
        "inner_ok": cube_check.inner_ok,
        "centers_ok": cube_check.centers_ok,
        "ok": cube_check.ok,
    }
    if not cube_check.ok:
        failures.append(f"cubes: witness {cube_check.witness}")

    def run_density():
        r_lo = cfg.r_lo if cfg.r_lo is not None else resolution_scale(space)
        r_hi = cfg.r_hi if cfg.r_hi is not None else space.diameter() / 4
        if not 0 < r_lo < r_hi:
            return None, r_lo, r_hi
        profiles = density_profiles(space, target.members, r_lo, r_hi)
        return profiles, r_lo, r_hi

    profiles, d_lo, d_hi = stage("density", run_density)
    if profiles is None:
        report["density"] = {"skipped": "radius grid is empty"}
    else:
        lows = np.array([p.lower_estimate for p in profiles])
        report["density"] = {
            "profiled": len(profiles),
            "r_lo": d_lo,
            "r_hi": d_hi,
            "lower_min": float(lows.min()),
            "lower_median": float(np.median(lows)),
            "lower_max": float(lows.max()),
        }

    porous = stage(
        "porous", lambda: find_porous(space, tree, target, pcfg)
    )
    level_hist: dict[str, int] = {}
    for p in porous:
        key = str(tree.cubes[p.cube].level)
        level_hist[key] = level_hist.get(key, 0) + 1
    report["porous"] = {"count": len(porous), "per_level": level_hist}

    shadow = stage(
        "shadow", lambda: shadow_map(space, tree, target, porous, pcfg)
    )
    report["shadow"] = {
        "antichain": len(shadow.maximal),
        "mapped": sum(1 for r in shadow.records if r.shadow is not None),
        "failures": len(shadow.failures),
        "b_observed": shadow.b_observed,
        "c0_used": shadow.c0_used,
        "ok": shadow.ok,
    }
    if not shadow.ok:
        failures.append("shadow: a scale comparison failed")

    carleson = stage(
        "carleson",
        lambda: carleson_check(
            tree, porous, pcfg, b_observed=shadow.b_observed
        ),
    )
    report["carleson"] = {
        "worst_ratio": carleson.worst_ratio,
        "worst_cube": carleson.worst_cube,
        "C1": carleson.constants.C1,
        "a": carleson.constants.a,
        "b": carleson.constants.b,
        "b_mode": carleson.constants.b_mode,
        "skipped": carleson.skipped,
        "ok": carleson.ok,
    }
    if not carleson.ok:
        failures.append(
            f"carleson: worst ratio {carleson.worst_ratio} exceeds "
            f"{carleson.constants.C1}"
        )

    bridges = stage(
        "bridges",
        lambda: build_bridges(
            space, tree, hierarchy, porous, pcfg, mode=cfg.bridge_mode
        ),
    )
    report["bridges"] = {
        "pairs": len(bridges.bridge_pairs),
        "edges": bridges.edge_count(),
        "skipped_cubes": len(bridges.skipped),
        "mode": cfg.bridge_mode,
    }

    eps_res = (
        cfg.eps_res
        if cfg.eps_res is not None
        else 2 * cfg.rho ** max(hierarchy.levels)
    )
    gamma = stage(
        "gamma", lambda: assemble_gamma(space, target, bridges, eps_res)
    )
    report["gamma"] = {
        "vertices": len(gamma.vertices),
        "edges": gamma.edge_count(),
        "eps_res": eps_res,
    }

    conn = stage("connectivity", lambda: connectivity(gamma))
    report["connectivity"] = {
        "components": conn.components,
        "representatives": [
            key_str(v) for v in conn.representatives[:10]
        ],
        "disconnected": conn.components != 1,
    }

    budget = stage(
        "budget",
        lambda: length_budget(space, target, gamma, porous, tree, pcfg),
    )
    report["budget"] = {
        "e_part": budget.e_part,
        "bridge_part": budget.bridge_part,
        "bound_e": budget.bound_e,
        "bound_bridge": budget.bound_bridge,
        "c_pair": budget.c_pair,
        "sidelength_sum": budget.sidelength_sum,
        "mass_check_ok": budget.mass_check_ok,
        "e_vacuous": budget.e_vacuous,
        "gated_cubes": budget.gated_cubes,
        "gated_sidelength_sum": budget.gated_sidelength_sum,
        "gated_mass_sum": budget.gated_mass_sum,
        "gated_ok": budget.gated_ok,
        "ok": budget.ok,
    }
    if not budget.ok:
        failures.append("budget: a length bound failed")

    def run_param():
        try:
            return parametrize(gamma), None
        except DisconnectedError as exc:
            return None, str(exc)

    param, param_skip = stage("parametrize", run_param)
    if param is None:
        report["parametrization"] = {"skipped": param_skip}
        report["param_check"] = {"skipped": param_skip}
    else:
        report["parametrization"] = {
            "visits": len(param.visits),
            "lip_bound": param.lip_bound,
            "tree_length": param.tree_length,
        }
        check = stage(
            "check_param", lambda: check_parametrization(param, gamma)
        )
        report["param_check"] = {
            "surjective": check.surjective,
            "missing": check.missing,
            "max_ratio": check.max_ratio,
            "lipschitz_ok": check.lipschitz_ok,
            "ok": check.ok,
        }
        if not check.ok:
            failures.append("param_check: surjectivity or ratio failed")

    report["invariant_failures"] = list(failures)
    report["ok"] = not failures

    if cfg.out_dir is not None:
        write_outputs(
            cfg.out_dir, report, timings, space, profiles, gamma, param
        )
    return report, failures, timings


def write_outputs(
    out_dir: str,
    report: dict,
    timings: list[tuple[str, float]],
    space: MetricMeasureSpace,
    profiles,
    gamma,
    param,
) -> None:
    """Side files: report, per-point density, edge list, tour, timings."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        fh.write(report_json(report))
    if profiles is not None:
        with open(
            os.path.join(out_dir, "density.csv"), "w", newline=""
        ) as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "lower_estimate"])
            for p in sorted(profiles, key=lambda q: q.point):
                writer.writerow([p.point, repr(p.lower_estimate)])
    edges_csv(gamma, os.path.join(out_dir, "edges.csv"))
    if param is not None:
        parametrization_csv(
            param, space, os.path.join(out_dir, "tour.csv")
        )
    with open(os.path.join(out_dir, "timings.txt"), "w") as fh:
        for name, seconds in timings:
            fh.write(f"{name}\t{seconds:.6f}\n")
