#!/usr/bin/env python3
"""
Experiment runner - builds a space and runs the verification suites.

Suites run in dependency order (space -> dyadic -> the rest), write a
canonical JSON report plus CSV tables and keep a status file current.

Usage:
    python runner.py run --config cfg.json            # Run the configured suites
    python runner.py run --config cfg.json --parallel # Independent suites concurrently
    python runner.py gen-space --generator tree --q 3 --depth 4 --out tree.json
    python runner.py h1-norm --space tree.json --function g.json --b 2
"""
import argparse
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from config import SUITES, get_seed, load_config, validate_config
from dyadic import (
    base_resolution,
    build_forest,
    cube_ball_interaction,
    cube_doubling,
    cubes_meeting_ball,
    covering_select,
    forest_from_dict,
    forest_to_dict,
    interaction_constant,
    packing_constant,
    verify_forest,
)
from errors import ConfigError, HblError, InvalidParameterError, SpaceDataError, SpaceParseError
from hardy_bmo import (
    bmo_norm,
    bmo_scale_equivalence,
    default_b0,
    duality_pairing_check,
    h1_norm,
    h1_scale_equivalence,
    jn_experiment,
    l2_sandwich,
    random_atom,
    split_atom,
    split_constants,
    triviality_check,
    validate_atom,
)
from maximal import (
    good_lambda_check,
    maximal_function,
    sharp_lower_bound,
    weak_type_check,
)
from operators import (
    KernelOperator,
    fit_corpus_constant,
    hormander_constants,
    l2_norm,
    operator_to_dict,
    preset_multiplier,
    spectral_decomposition,
)
from reports import dumps_canonical, tag, update_status, write_csv, write_json, write_plain_json
from schemas import Assertion, ForestDocument, FunctionDocument, RunReport, SpaceDocument, parse_document
from space import (
    FiniteSpace,
    amp_check,
    ball,
    concentric_doubling,
    enumerate_balls,
    function_from_dict,
    gen_grid,
    gen_hyperbolic_disk,
    gen_path,
    gen_tree,
    geometry_report,
    isoperimetric_profile,
    space_from_dict,
    space_to_dict,
    volume_growth_check,
)

VERSION = "0.1.0"
EXIT_OK, EXIT_HARD_FAILURE, EXIT_USAGE = 0, 1, 2
TRIVIALITY_SAMPLES = 50


# =============================================================================
# SPACE INPUT
# =============================================================================

def ingest_space(path: str | Path) -> FiniteSpace:
    """
    Load and validate a space JSON file.

    Raises:
        SpaceParseError: file is not JSON or does not match the schema.
        SpaceDataError: metric or weight axioms fail.
    """
    try:
        with open(path, 'r', encoding='utf-8') as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise SpaceParseError(f"invalid JSON: {e.msg}") from e
    model = parse_document(SpaceDocument, doc)
    return space_from_dict(model.model_dump())


def load_function(space: FiniteSpace, path: str | Path) -> np.ndarray:
    with open(path, 'r', encoding='utf-8') as f:
        doc = json.load(f)
    model = parse_document(FunctionDocument, doc)
    try:
        return function_from_dict(space, model.model_dump())
    except InvalidParameterError as e:
        raise SpaceParseError(str(e), "/values") from e


def load_forest(space: FiniteSpace, path: str | Path):
    """Forest document written by the `forest` command, checked against the space."""
    try:
        with open(path, 'r', encoding='utf-8') as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise SpaceParseError(f"invalid JSON: {e.msg}") from e
    model = parse_document(ForestDocument, doc)
    try:
        return forest_from_dict(space, model.model_dump())
    except InvalidParameterError as e:
        raise SpaceParseError(str(e), "/levels") from e


def build_space(space_cfg: dict, seed: int) -> FiniteSpace:
    """Space from a config section: a generator with params, or a file path."""
    if "path" in space_cfg:
        return ingest_space(space_cfg["path"])
    params = space_cfg.get("params", {})
    generator = space_cfg["generator"]
    if generator == "tree":
        return gen_tree(params.get("q", 3), params.get("depth", 4))
    if generator == "path":
        return gen_path(params.get("n", 16))
    if generator == "grid":
        return gen_grid(params.get("d", 2), params.get("n", 6))
    if generator == "hyperbolic":
        return gen_hyperbolic_disk(params.get("n_cells", 200), params.get("max_radius", 3.0),
                                   params.get("seed", seed))
    raise ConfigError(f"space.generator: unknown generator {generator}")


# =============================================================================
# RUN CONTEXT
# =============================================================================

@dataclass
class SuiteResult:
    """One suite's report blob, assertions and CSV tables."""
    name: str
    blob: dict = field(default_factory=dict)
    assertions: list[Assertion] = field(default_factory=list)
    tables: dict[str, list[dict]] = field(default_factory=dict)
    elapsed: float = 0.0

    def check(self, check_id: str, passed: bool, hard: bool = True, message: str = "") -> None:
        self.assertions.append(Assertion(id=f"{self.name}.{check_id}", suite=self.name,
                                         hard=hard, passed=bool(passed), message=message))


class RunContext:
    """Shared inputs of a run, built lazily and cached."""

    def __init__(self, config: dict, space: FiniteSpace | None = None):
        self.config = config
        self.seed = get_seed(config)
        self._space = space

    @cached_property
    def space(self) -> FiniteSpace:
        return self._space if self._space is not None else build_space(self.config["space"], self.seed)

    @cached_property
    def forest(self):
        return build_forest(self.space, self.config["delta"], self.config["tie_break"], self.seed)

    @cached_property
    def profile(self):
        if self.space.n < 2:
            return None
        kappas = self.config["geometry"]["kappas"]
        return isoperimetric_profile(self.space, kappas, self.config["samples"], self.seed)

    @cached_property
    def b0(self) -> float:
        scales, amp = self.config["scales"], self.config["amp"]
        if scales.get("b0") is not None:
            return float(scales["b0"])
        return default_b0(self.space, amp["R0"], amp["beta"])

    @cached_property
    def corpus(self) -> list[np.ndarray]:
        """log(1 + d(o, .)) followed by seeded Gaussian functions."""
        rng = np.random.default_rng(self.seed)
        d = self.space.dist[0]
        first = np.log1p(np.where(np.isfinite(d), d, 0.0))
        return [first] + [rng.standard_normal(self.space.n) for _ in range(self.config["functions"] - 1)]

    def prepare(self, suites: list[str]) -> None:
        """Build shared inputs up front so suites can run concurrently."""
        self.space
        if suites:
            self.corpus
        if {"dyadic", "maximal", "hardy_bmo"} & set(suites):
            self.forest
        if {"geometry", "dyadic", "maximal"} & set(suites):
            self.profile
        if {"maximal", "hardy_bmo"} & set(suites):
            self.b0


# =============================================================================
# SUITES
# =============================================================================

def suite_geometry(ctx: RunContext) -> SuiteResult:
    result = SuiteResult("geometry")
    space, geo_cfg, amp = ctx.space, ctx.config["geometry"], ctx.config["amp"]
    report = geometry_report(space, geo_cfg["taus"], geo_cfg["bs"], geo_cfg["kappas"],
                             amp["R0"], amp["beta"], ctx.config["samples"], ctx.seed)
    blob = report.to_dict(space)
    constants = {f"D[tau={t},b={b}]": tag(e.value) for (t, b), e in report.doubling.items()}
    for b in geo_cfg["bs"]:
        constants[f"concentric[tau=2,b={b}]"] = tag(concentric_doubling(space, 2.0, b))
    result.tables["doubling"] = [{"tau": t, "b": b, "D": e.value} for (t, b), e in report.doubling.items()]

    for b in geo_cfg["bs"]:
        values = [report.doubling[(float(t), float(b))].value for t in sorted(geo_cfg["taus"])]
        result.check("doubling-monotone", all(x <= y for x, y in zip(values, values[1:])),
                     message=f"b={b}: {values}")
    for t in geo_cfg["taus"]:
        values = [report.doubling[(float(t), float(b))].value for b in sorted(geo_cfg["bs"])]
        result.check("doubling-monotone", all(x <= y for x, y in zip(values, values[1:])),
                     message=f"tau={t}: {values}")

    profile = ctx.profile
    if profile is not None:
        constants["iHat"] = tag(profile.i_hat, profile.provenance)
        result.tables["isoperimetric"] = [
            {"kappa": k, "minimum": m, "profile": p}
            for k, m, p in zip(profile.kappas, profile.raw, profile.profile)
        ]
        result.check("profile-decreasing",
                     all(x >= y for x, y in zip(profile.profile, profile.profile[1:])))
        result.check("isoperimetric-positive", profile.i_hat > 0, hard=False,
                     message=f"I_hat={profile.i_hat:.6g} ({profile.provenance})")
        growth = volume_growth_check(profile)
        blob["volumeGrowthCheck"] = {str(k): v for k, v in growth.items()}
        result.check("volume-growth", all(v >= 1 - 1e-12 for v in growth.values()), hard=False)

    result.check("amp", report.amp.passed, hard=False,
                 message=f"{len(report.amp.violations)} pairs without a midpoint ball")
    if report.cheeger is not None:
        constants["cheeger"] = tag(report.cheeger.value,
                                   "exact" if report.cheeger.mode == "exact" else "estimate")
        constants["spectralGap"] = tag(report.spectral_gap)
        max_degree = max(dict(space.graph().degree()).values())
        bound = report.cheeger.value ** 2 / (2 * max_degree)
        result.check("cheeger-spectral", report.spectral_gap >= bound * (1 - 1e-9) - 1e-12,
                     hard=report.cheeger.mode == "exact" and bool(np.all(space.weight == 1)),
                     message=f"gap={report.spectral_gap:.6g}, h^2/(2 dmax)={bound:.6g}")
    blob["constants"] = constants
    result.blob = blob
    return result


def suite_dyadic(ctx: RunContext) -> SuiteResult:
    result = SuiteResult("dyadic")
    space, forest = ctx.space, ctx.forest
    verification = verify_forest(forest)
    result.check("forest", verification.passed,
                 message=f"{len(verification.violations)} violations")

    b = max(space.diameter / 4, space.min_distance if math.isfinite(space.min_distance) else 1.0)
    family = enumerate_balls(space, b)
    bound = packing_constant(forest, b)
    packing = [cubes_meeting_ball(forest, B, b, bound) for B in family.balls]
    result.check("packing", all(p.holds for p in packing),
                 message=f"{sum(not p.holds for p in packing)} of {len(packing)} balls fail")

    failures, checked, constants = 0, 0, {}
    for B in family.balls:
        for k in forest.resolutions:
            if k not in constants:
                constants[k] = interaction_constant(forest, k)
            cube = forest.cube_of(B.center, k)
            checked += 1
            failures += not cube_ball_interaction(forest, B, cube, constants[k]).holds
    result.check("interaction", failures == 0, message=f"{failures} of {checked} pairs fail")

    selection = None
    profile = ctx.profile
    if space.n > 2 and profile is not None:
        target = ball(space, 0, max(b, space.min_distance * 1.5))
        if 0 < target.size < space.n:
            kappa = space.min_distance if math.isfinite(space.min_distance) else 1.0
            selection = covering_select(forest, target.members, kappa, forest.k_min, profile.i_hat)
            mask = np.zeros(space.n, dtype=bool)
            disjoint = True
            for cube in selection.cubes:
                disjoint &= not mask[cube.members].any()
                mask[cube.members] = True
            result.check("covering-disjoint", disjoint and all(
                d <= selection.kappa for d in selection.distances))
            result.check("covering-mass", selection.feasible, hard=False,
                         message=f"achieved {selection.achieved_fraction:.6g} of target {selection.target_fraction:.6g}")

    result.blob = {
        "verification": verification.to_dict(),
        "realizedA0": tag(forest.realized_a0),
        "realizedC1": tag(forest.realized_c1),
        "cubeDoubling": tag(cube_doubling(forest)),
        "packingConstant": tag(bound),
        "packingScale": b,
        "covering": selection.to_dict() if selection else None,
        "levels": [len(forest.cubes(k)) for k in forest.resolutions],
    }
    return result


def suite_maximal(ctx: RunContext) -> SuiteResult:
    result = SuiteResult("maximal")
    space, forest, profile = ctx.space, ctx.forest, ctx.profile
    functions = [f for f in ctx.corpus if np.any(f)]

    pointwise = all(np.all(maximal_function(forest, f, forest.k_min) >= np.abs(f)) for f in functions)
    result.check("pointwise", pointwise)
    weak = weak_type_check(forest, functions, forest.k_min)
    result.check("weak-type", weak.constant <= 1 + 1e-12, message=f"constant={weak.constant:.6g}")
    blob = {"weakType": weak.to_dict(), "weakTypeConstant": tag(weak.constant)}

    if profile is not None and profile.i_hat > 0:
        eta_prime = ctx.config["maximal"]["eta_prime"]
        reports = [good_lambda_check(forest, f, profile.i_hat, ctx.b0, eta_prime,
                                     i_hat_provenance=profile.provenance) for f in functions]
        rows = [row for r in reports for row in r.rows]
        checked = [r for r in rows if r.status in ("pass", "fail")]
        fraction = sum(r.status == "pass" for r in checked) / len(checked) if checked else 1.0
        result.check("good-lambda", fraction >= 0.8, hard=False,
                     message=f"{fraction:.3f} of {len(checked)} applicable rows pass")
        result.tables["good_lambda"] = [dict(rec, function=i) for i, r in enumerate(reports)
                                        for rec in r.records()]
        constants = reports[0].constants
        blob["goodLambda"] = {
            "constants": {k: tag(v, profile.provenance) for k, v in constants.items()},
            "passFraction": fraction,
            "vacuous": reports[0].vacuous,
        }
        lower = sharp_lower_bound(space, functions, ctx.config["maximal"]["ps"], constants["bPrime"])
        blob["sharpLowerBound"] = dict(lower.to_dict(), constant=tag(lower.constant, "estimate"))
        result.check("sharp-lower-bound", lower.constant > 0, hard=False)
    result.blob = blob
    return result


def _mean_zero_corpus(ctx: RunContext, radius: float, count: int) -> list[np.ndarray]:
    """Sums of two seeded atoms on balls of radius <= radius."""
    space = ctx.space
    rng = np.random.default_rng(ctx.seed + 1)
    balls = [B for B in enumerate_balls(space, radius).balls if B.size >= 2]
    out = []
    for _ in range(count if balls else 0):
        g = np.zeros(space.n)
        for _ in range(2):
            B = balls[int(rng.integers(len(balls)))]
            g += rng.uniform(-1, 1) * random_atom(space, B, rng).as_function(space.n)
        out.append(g)
    return out


def suite_hardy_bmo(ctx: RunContext) -> SuiteResult:
    result = SuiteResult("hardy_bmo")
    space, scales, amp_cfg = ctx.space, ctx.config["scales"], ctx.config["amp"]
    b, c, q = float(scales["b"]), float(scales["c"]), float(scales.get("q", 2.0))
    r0, beta = float(amp_cfg["R0"]), float(amp_cfg["beta"])
    rng = np.random.default_rng(ctx.seed)
    n_atoms = min(ctx.config["samples"], 8)
    blob: dict = {"b": b, "c": c, "b0": tag(ctx.b0)}

    family_b = enumerate_balls(space, b)
    large = [B for B in family_b.balls if B.size >= 2 and B.radius > c]
    pool = large or [B for B in family_b.balls if B.size >= 2]
    atoms = [random_atom(space, pool[int(rng.integers(len(pool)))], rng) for _ in range(n_atoms if pool else 0)]
    result.check("atom-valid", all(validate_atom(space, a).passed for a in atoms))

    norms = [h1_norm(space, a.as_function(space.n), b, family=family_b) for a in atoms]
    result.check("atom-norm", all(r.feasible and r.value <= 1 + 1e-6 for r in norms))
    result.check("lp-gap", all(r.certified for r in norms),
                 message=f"max gap {max((r.gap or 0.0) for r in norms) if norms else 0.0:.3g}")

    if space.has_adjacency and space.n > 1:
        triviality = triviality_check(space, min(TRIVIALITY_SAMPLES, ctx.config["samples"]), ctx.seed + 2)
        result.check("b1-trivial", triviality.infeasible_at_one == triviality.samples,
                     message=f"{triviality.infeasible_at_one}/{triviality.samples} infeasible at b=1")
        result.check("b2-local", triviality.local_samples > 0
                     and triviality.feasible_at_two == triviality.local_samples,
                     message=f"{triviality.feasible_at_two}/{triviality.local_samples} feasible at b=2")
        blob["triviality"] = triviality.to_dict()

    amp = amp_check(space, r0, beta)
    if not amp.passed:
        result.check("amp", False, hard=False,
                     message=f"splitting and scale equivalence skipped: {len(amp.violations)} pairs fail")
    else:
        constants = split_constants(space, c, b, beta, r0, family_b)
        split_rows = []
        ok = True
        for atom in (a for a in atoms if a.support.radius > c):
            dec = split_atom(space, atom, c, b, beta, r0, constants)
            error = dec.relative_error(space, atom.as_function(space.n))
            within = (
                error <= 1e-9
                and dec.max_radius <= c
                and all(validate_atom(space, a).passed for _, a in dec.terms)
                and all(abs(lam) <= dec.constants.coefficient_bound * (1 + 1e-9) for lam, _ in dec.terms)
                and len(dec.terms) <= dec.constants.term_bound
            )
            ok &= within
            split_rows.append({"terms": len(dec.terms), "passes": dec.constants.passes,
                               "relativeError": error, "coefficientSum": dec.coefficient_sum})
        result.check("split", ok)
        blob["split"] = {"constants": {k: tag(v) for k, v in constants.to_dict().items()},
                         "rows": split_rows}

        gs = _mean_zero_corpus(ctx, c, ctx.config["functions"])
        h1_eq = h1_scale_equivalence(space, gs, b, c, r0, beta)
        result.check("h1-scale-order", h1_eq.passed, message="; ".join(h1_eq.hard_failures))
        bmo_eq = bmo_scale_equivalence(space, ctx.corpus, q, b, c, r0, beta)
        result.check("bmo-scale-order", bmo_eq.ordering_holds)
        blob["scaleEquivalence"] = {"h1Ratio": tag(h1_eq.ratio, "estimate"),
                                    "bmoRatio": tag(bmo_eq.ratio, "estimate")}

        family_c = enumerate_balls(space, c)
        pairs = [duality_pairing_check(space, f, g, c, family_c) for f in ctx.corpus for g in gs]
        result.check("pairing", all(p.holds for p in pairs))
        blob["pairing"] = [p.to_dict() for p in pairs]
        sandwich = [l2_sandwich(space, g, c) for g in gs]
        result.check("l2-sandwich", all(s is None or s["ratio"] <= 1 + 1e-9 for s in sandwich))

    jn = jn_experiment(space, ctx.corpus[0], ctx.b0, ctx.forest.realized_c1 if space.n > 1 else 1.0)
    if not jn.degenerate:
        result.check("jn-envelope", jn.eta > 0 and jn.envelope_holds)
        moment = bmo_norm(space, ctx.corpus[0], q, ctx.b0).value
        result.check("jn-moment", not jn.covers_range or moment <= jn.moment_bound(q) * (1 + 1e-9),
                     message=f"N^q={moment:.6g}, bound={jn.moment_bound(q):.6g}")
        blob["jn"] = {"J": tag(jn.J, "estimate"), "eta": tag(jn.eta, "estimate"),
                      "norm": tag(jn.norm), "momentBound": tag(jn.moment_bound(q), "estimate")}
        result.tables["jn"] = jn.records(space)
    result.blob = blob
    return result


def suite_operators(ctx: RunContext) -> SuiteResult:
    result = SuiteResult("operators")
    space, ops_cfg = ctx.space, ctx.config["operators"]
    if not space.has_adjacency:
        result.blob = {"skipped": "space has no adjacency"}
        return result
    b = float(ops_cfg["b"])
    decomposition = spectral_decomposition(space)
    operators = []
    for entry in ops_cfg.get("multipliers", []):
        params = {k: v for k, v in entry.items() if k != "kind"}
        operators.append(preset_multiplier(space, entry["kind"], params, decomposition))

    rows = []
    for op in operators:
        hc = hormander_constants(space, op, b)
        result.check("self-adjoint", op.is_self_adjoint(), message=op.name)
        scale = max(1.0, hc.nu)
        result.check("nu-equals-upsilon", abs(hc.nu - hc.upsilon) <= 1e-9 * scale, message=op.name)
        rows.append({"operator": op.name, "nu": hc.nu, "upsilon": hc.upsilon, "l2Norm": l2_norm(space, op)})
    identity = KernelOperator.identity(space.weight)
    result.check("identity-norm", abs(l2_norm(space, identity) - 1.0) <= 1e-12)

    fit = fit_corpus_constant(space, operators, b, ctx.config["samples"], ctx.seed)
    result.tables["operators"] = fit.rows
    result.blob = {
        "b": b,
        "hormander": rows,
        "fit": dict(fit.to_dict(), h1Constant=tag(fit.h1_constant, "estimate"),
                    bmoConstant=tag(fit.bmo_constant, "estimate")),
    }
    return result


SUITE_FUNCTIONS = {
    "geometry": suite_geometry,
    "dyadic": suite_dyadic,
    "maximal": suite_maximal,
    "hardy_bmo": suite_hardy_bmo,
    "operators": suite_operators,
}


# =============================================================================
# RUN
# =============================================================================

def _timed(fn, ctx: RunContext) -> SuiteResult:
    start = time.time()
    result = fn(ctx)
    result.elapsed = time.time() - start
    return result


def run(config: dict, out_dir: str | Path | None = None, parallel: bool = False,
        space: FiniteSpace | None = None) -> RunReport:
    """
    Execute the configured suites and write report.json, CSV tables and
    run_status.json under the output directory.

    Raises:
        ConfigError: configuration does not validate.
    """
    is_valid, error = validate_config(config)
    if not is_valid:
        raise ConfigError(error)
    out = Path(out_dir if out_dir is not None else config.get("out", "results"))
    status_file = out / "run_status.json"
    suites = [s for s in SUITES if s in config.get("suites", [])]
    ctx = RunContext(config, space)
    echo = dict(config, seed=ctx.seed)
    report = RunReport(version=VERSION, config=echo)

    start_time = time.time()
    total = len(suites)
    update_status(status_file, f"Starting {total} suites...", 0, 0, total, 0, None)
    if suites:
        print(f"Running {total} suites on {config['space'].get('generator', config['space'].get('path'))}...")

    try:
        ctx.prepare(suites)
        if suites:
            print(f"Space: {ctx.space.name or 'unnamed'} ({ctx.space.n} points)")
        if parallel and total > 1:
            with ThreadPoolExecutor(max_workers=total) as pool:
                futures = [pool.submit(_timed, SUITE_FUNCTIONS[name], ctx) for name in suites]
                results = [f.result() for f in futures]
        else:
            results = []
            for i, name in enumerate(suites):
                elapsed = time.time() - start_time
                eta = elapsed / i * (total - i) if i else None
                print(f"[{i + 1}/{total}] {name}...")
                update_status(status_file, f"Running: {name}", i / total * 100, i + 1, total, elapsed, eta)
                results.append(_timed(SUITE_FUNCTIONS[name], ctx))
    except Exception as e:
        update_status(status_file, f"Error: {e}", 0, 0, total, time.time() - start_time, None, error=True)
        raise

    for res in results:
        report.suites[res.name] = res.blob
        report.assertions.extend(res.assertions)
        report.timing[res.name] = f"{res.elapsed:.3f}"
        for table, records in res.tables.items():
            if records:
                write_csv(out / f"{table}.csv", records)
    write_json(out / "report.json", report.model_dump(exclude={"timing"}))
    write_json(out / "timing.json", report.timing)

    final_elapsed = time.time() - start_time
    hard, soft = report.hard_failures, report.soft_failures
    for a in soft:
        print(f"WARNING: {a.id} failed: {a.message}")
    for a in hard:
        print(f"FAILED: {a.id}: {a.message}")

    print()
    print("=" * 50)
    print("RUN COMPLETE")
    print("=" * 50)
    print(f"Suites:        {', '.join(suites) if suites else '(none)'}")
    print(f"Assertions:    {len(report.assertions)}")
    print(f"Hard failures: {len(hard)}")
    print(f"Warnings:      {len(soft)}")
    print(f"Total time:    {final_elapsed:.1f}s")

    update_status(
        status_file,
        f"Complete: {len(report.assertions)} assertions, {len(hard)} hard failures, {len(soft)} warnings",
        100, total, total, final_elapsed, 0, complete=True, error=bool(hard),
    )
    return report


# =============================================================================
# AD-HOC SUBCOMMANDS
# =============================================================================

def _emit(doc, out: str | None) -> None:
    if out:
        write_json(out, doc)
    else:
        print(dumps_canonical(doc), end="")


def cmd_gen_space(args) -> int:
    cfg = {"generator": args.generator,
           "params": {"q": args.q, "depth": args.depth, "n": args.n, "d": args.d,
                      "n_cells": args.cells, "max_radius": args.radius, "seed": args.seed}}
    space = build_space(cfg, args.seed)
    doc = space_to_dict(space)
    if args.out:
        write_plain_json(args.out, doc)
        print(f"Wrote {space.name} ({space.n} points) to {args.out}")
    else:
        print(json.dumps(doc, indent=2))
    return EXIT_OK


def cmd_geometry(args) -> int:
    space = ingest_space(args.space)
    report = geometry_report(space, args.taus, args.bs, args.kappas, args.r0, args.beta,
                             args.samples, args.seed)
    _emit(report.to_dict(space), args.out)
    return EXIT_OK


def cmd_forest(args) -> int:
    space = ingest_space(args.space)
    forest = build_forest(space, args.delta, args.tie_break, args.seed)
    verification = verify_forest(forest)
    if args.out:
        write_plain_json(args.out, forest_to_dict(forest))
    print(f"Forest: k in [{forest.k_min}, {forest.k_max}], "
          f"a0={forest.realized_a0:.6g}, C1={forest.realized_c1:.6g}, "
          f"violations={len(verification.violations)}")
    return EXIT_OK if verification.passed else EXIT_HARD_FAILURE


def cmd_maximal(args) -> int:
    space = ingest_space(args.space)
    f = load_function(space, args.function)
    if args.forest:
        forest = load_forest(space, args.forest)
    else:
        forest = build_forest(space, args.delta, args.tie_break, args.seed)
    if args.k_floor == "auto":
        k = base_resolution(forest)
    else:
        try:
            k = int(args.k_floor)
        except ValueError:
            raise InvalidParameterError(f"--k-floor must be 'auto' or an integer, got {args.k_floor}") from None
    M = maximal_function(forest, f, k)
    doc = {"k": k, "values": {p: v for p, v in zip(space.points, M)}}

    if space.n > 1 and np.any(f):
        profile = isoperimetric_profile(space, args.kappas, args.samples, args.seed)
        if profile.i_hat > 0:
            b0 = args.b0 if args.b0 is not None else default_b0(space, args.r0, args.beta)
            report = good_lambda_check(forest, f, profile.i_hat, b0, args.eta_prime,
                                       i_hat_provenance=profile.provenance)
            doc["goodLambda"] = report.to_dict()
            if args.csv:
                write_csv(args.csv, report.records())
    _emit(doc, args.out)
    return EXIT_OK


def cmd_h1_norm(args) -> int:
    space = ingest_space(args.space)
    g = load_function(space, args.function)
    _emit(h1_norm(space, g, args.b, formulation=args.formulation).to_dict(), args.out)
    return EXIT_OK


def cmd_bmo_norm(args) -> int:
    space = ingest_space(args.space)
    f = load_function(space, args.function)
    _emit(bmo_norm(space, f, args.q, args.b).to_dict(space), args.out)
    return EXIT_OK


def cmd_split_atom(args) -> int:
    space = ingest_space(args.space)
    support = ball(space, space.index_of(args.center), args.radius)
    atom = random_atom(space, support, np.random.default_rng(args.seed))
    dec = split_atom(space, atom, args.c, args.b_big, args.beta, args.r0)
    doc = {
        "constants": dec.constants.to_dict(),
        "terms": [{"lambda": lam, "support": a.support.to_dict(space)} for lam, a in dec.terms],
        "relativeError": dec.relative_error(space, atom.as_function(space.n)),
    }
    _emit(doc, args.out)
    return EXIT_OK


def cmd_jn(args) -> int:
    space = ingest_space(args.space)
    f = load_function(space, args.function)
    forest = build_forest(space, args.delta)
    _emit(jn_experiment(space, f, args.b0, forest.realized_c1).to_dict(space), args.out)
    return EXIT_OK


def cmd_pairing(args) -> int:
    space = ingest_space(args.space)
    f, g = load_function(space, args.f), load_function(space, args.g)
    check = duality_pairing_check(space, f, g, args.b)
    _emit(check.to_dict(), args.out)
    return EXIT_OK if check.holds else EXIT_HARD_FAILURE


def cmd_operator(args) -> int:
    space = ingest_space(args.space)
    params = {"heat": {"t": args.t}, "resolvent": {"s": args.s},
              "band_limited": {"cutoff": args.cutoff, "width": args.width},
              "polynomial": {"coeffs": args.coeffs}}[args.kind]
    op = preset_multiplier(space, args.kind, params)
    hc = hormander_constants(space, op, args.b, strict=args.strict)
    doc = {"hormander": hc.to_dict(space), "l2Norm": l2_norm(space, op),
           "selfAdjoint": op.is_self_adjoint()}
    if args.kernel_out:
        write_plain_json(args.kernel_out, operator_to_dict(space, op))
    _emit(doc, args.out)
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        config = load_config(args.config)
    except FileNotFoundError as e:
        raise ConfigError(str(e)) from e
    report = run(config, args.out, args.parallel)
    return report.exit_code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hbl",
        description="Hardy space and BMO experiments on finite metric measure spaces",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python runner.py run --config config.example.json     Run every configured suite
  python runner.py gen-space --generator path --n 9     Print a path space as JSON
  python runner.py h1-norm --space s.json --function g.json --b 2
  python runner.py operator --space s.json --kind heat --t 0.5 --b 2
        """
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="Run the configured suites")
    p.add_argument('--config', required=True, help='Experiment config JSON')
    p.add_argument('--parallel', action='store_true', help='Run independent suites concurrently')
    p.add_argument('--out', help='Output directory (default: config "out")')
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("gen-space", help="Generate a corpus space")
    p.add_argument('--generator', choices=["tree", "path", "grid", "hyperbolic"], required=True)
    p.add_argument('--q', type=int, default=3)
    p.add_argument('--depth', type=int, default=4)
    p.add_argument('--n', type=int, default=16)
    p.add_argument('--d', type=int, default=2)
    p.add_argument('--cells', type=int, default=200)
    p.add_argument('--radius', type=float, default=3.0)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--out', help='Write the space JSON here')
    p.set_defaults(func=cmd_gen_space)

    def with_space(name, help_text, func):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument('--space', required=True, help='Space JSON file')
        sp.add_argument('--out', help='Write the result JSON here')
        sp.set_defaults(func=func)
        return sp

    p = with_space("geometry", "Doubling, isoperimetric, AMP and graph constants", cmd_geometry)
    p.add_argument('--taus', type=float, nargs='+', default=[2.0, 4.0])
    p.add_argument('--bs', type=float, nargs='+', default=[1.0, 2.0])
    p.add_argument('--kappas', type=float, nargs='+', default=[1.0, 2.0])
    p.add_argument('--r0', type=float, default=1.0)
    p.add_argument('--beta', type=float, default=0.75)
    p.add_argument('--samples', type=int, default=200)
    p.add_argument('--seed', type=int, default=0)

    for name, help_text, func in (("forest", "Build and verify a dyadic forest", cmd_forest),
                                  ("maximal", "Dyadic maximal function of a point function", cmd_maximal)):
        p = with_space(name, help_text, func)
        p.add_argument('--delta', type=float, default=0.5)
        p.add_argument('--tie-break', dest='tie_break', choices=["id", "random"], default="id")
        p.add_argument('--seed', type=int, default=0)
        if name == "maximal":
            p.add_argument('--function', '--f', dest='function', required=True)
            p.add_argument('--forest', help='Forest JSON from the forest command (default: build one)')
            p.add_argument('--k-floor', dest='k_floor', default="auto",
                           help="Finest resolution k, or 'auto' for the base resolution")
            p.add_argument('--kappas', type=float, nargs='+', default=[1.0, 2.0])
            p.add_argument('--samples', type=int, default=200)
            p.add_argument('--b0', type=float, help='Sharp-function scale floor (default from R0, beta)')
            p.add_argument('--r0', type=float, default=1.0)
            p.add_argument('--beta', type=float, default=0.75)
            p.add_argument('--eta-prime', dest='eta_prime', type=float, default=0.5)
            p.add_argument('--csv', help='Write the good-lambda rows here')

    p = with_space("h1-norm", "Exact H^1_b norm by linear programming", cmd_h1_norm)
    p.add_argument('--function', required=True)
    p.add_argument('--b', type=float, required=True)
    p.add_argument('--formulation', choices=["standard", "split"], default="standard")

    p = with_space("bmo-norm", "BMO_b^q norm", cmd_bmo_norm)
    p.add_argument('--function', required=True)
    p.add_argument('--b', type=float, required=True)
    p.add_argument('--q', type=float, default=1.0)

    p = with_space("split-atom", "Split a random atom into small-ball atoms", cmd_split_atom)
    p.add_argument('--center', required=True, help='Point id of the support center')
    p.add_argument('--radius', type=float, required=True)
    p.add_argument('--c', type=float, required=True)
    p.add_argument('--b-big', dest='b_big', type=float, required=True)
    p.add_argument('--r0', type=float, default=1.0)
    p.add_argument('--beta', type=float, default=0.75)
    p.add_argument('--seed', type=int, default=0)

    p = with_space("jn", "John-Nirenberg level-set experiment", cmd_jn)
    p.add_argument('--function', required=True)
    p.add_argument('--b0', type=float, required=True)
    p.add_argument('--delta', type=float, default=0.5)

    p = with_space("pairing", "Check |<f,g>| <= N(f) ||g||_H1", cmd_pairing)
    p.add_argument('--f', required=True)
    p.add_argument('--g', required=True)
    p.add_argument('--b', type=float, required=True)

    p = with_space("operator", "Hormander constants of a spectral multiplier", cmd_operator)
    p.add_argument('--kind', choices=["heat", "resolvent", "polynomial", "band_limited"], required=True)
    p.add_argument('--t', type=float, default=1.0)
    p.add_argument('--s', type=float, default=1.0)
    p.add_argument('--cutoff', type=float, default=1.0)
    p.add_argument('--width', type=float, default=0.5)
    p.add_argument('--coeffs', type=float, nargs='+', default=[0.0, 1.0])
    p.add_argument('--b', type=float, required=True)
    p.add_argument('--strict', action='store_true', help='Use the smallest admissible 2B')
    p.add_argument('--kernel-out', dest='kernel_out', help='Write the kernel JSON here')
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SpaceParseError, SpaceDataError, InvalidParameterError) as e:
        print(f"Error: {e}")
        return EXIT_USAGE
    except FileNotFoundError as e:
        print(f"Error: {e}")
        return EXIT_USAGE
    except HblError as e:
        print(f"Error: {e}")
        return EXIT_HARD_FAILURE


if __name__ == "__main__":
    sys.exit(main())
