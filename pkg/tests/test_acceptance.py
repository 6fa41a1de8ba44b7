"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v -s``.
"""

import json
import math
import os
import time
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from conftest import e2_counterexample, vertex_row_grid
from oracles import finite_difference_gradient
from nlmarkov.hypermatrix import StochasticHypermatrix, lift_order, random_hypermatrix
from nlmarkov.oracle import (INJECTIVITY_REPORT_SCHEMA, m2_polynomial_check, objective,
                             objective_gradient, probe_injectivity, sample_surjectivity)
from nlmarkov.pso import Pso, bb_counterexample, check_bb_factorization, facet_image_check
from nlmarkov.simplex import dirichlet_points, nonempty_subsets
from nlmarkov.structure import (absorbing_equivalence_check, all_small_subsets_absorbing,
                                decide_surjectivity, facet_conditions, is_absorbing,
                                is_orthogonal_preserving, vertex_map)

ARTIFACT_DIR = Path(os.environ.get("NLMARKOV_ARTIFACTS", Path(__file__).parent.parent / "artifacts"))


@pytest.fixture
def verdict(capsys):
    def emit(criterion, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return emit


def sparse_hypermatrix(m, l, rng):
    """Random rows with roughly half of the entries set to exact zero."""
    n = math.comb(m + l - 1, l)
    rows = rng.random((n, m))
    rows[rng.random((n, m)) < 0.5] = 0.0
    empty = rows.sum(axis=1) == 0
    rows[empty, rng.integers(0, m, size=int(empty.sum()))] = 1.0
    return StochasticHypermatrix(m, l, rows / rows.sum(axis=1, keepdims=True))


def mixed_population(n, max_m, max_l, seed):
    """Operators cycling through the generator modes plus sparse rows."""
    rng = np.random.default_rng(seed)
    modes = ["sparse", "op_structured", "permuted_op", "vertex_fixing", "general"]
    for i in range(n):
        m, l = int(rng.integers(2, max_m + 1)), int(rng.integers(1, max_l + 1))
        mode = modes[i % len(modes)]
        p = sparse_hypermatrix(m, l, rng) if mode == "sparse" else random_hypermatrix(m, l, mode, rng)
        yield Pso(p)


def test_criterion_01_theorem_equivalence_grid(verdict):
    start = time.perf_counter()
    count, mismatches = 0, []
    for m in (2, 3):
        for op in vertex_row_grid(m, 2):
            count += 1
            perm = vertex_map(op).permutation
            comb = is_orthogonal_preserving(op, "combinatorial").is_op
            struct = is_orthogonal_preserving(op, "structural").is_op
            facets = all(facet_conditions(op, perm))
            if not comb == struct == facets:
                mismatches.append((op.P.to_json(), comb, struct, facets))
    elapsed = time.perf_counter() - start
    verdict(1, not mismatches and elapsed < 60,
            f"{count} grid operators, {len(mismatches)} disagreements, {elapsed:.2f}s")


@pytest.mark.slow
def test_criterion_02_oracle_cross_validation(verdict):
    start = time.perf_counter()
    shapes = [(2, 2), (2, 3), (3, 2), (3, 3)]
    disagreements, counts = [], {True: 0, False: 0}
    for mode in ("op_structured", "vertex_fixing"):
        for seed in range(100):
            m, l = shapes[seed % 4]
            op = Pso(random_hypermatrix(m, l, mode, seed))
            decided = decide_surjectivity(op).surjective
            counts[decided] += 1
            sample = sample_surjectivity(op, 50, starts=64, tol=1e-9, rng_seed=seed)
            if sample.consistent_with_surjective != decided:
                disagreements.append((mode, seed, decided, sample.max_residual))
    elapsed = time.perf_counter() - start
    verdict(2, not disagreements and elapsed < 600,
            f"200 operators ({counts[True]} surjective, {counts[False]} not), "
            f"{len(disagreements)} disagreements {disagreements[:3]}, {elapsed:.1f}s")


def test_criterion_03_image_support_of_faces(verdict):
    violations, checked = [], 0
    for n, op in enumerate(mixed_population(20, 5, 3, seed=3)):
        for a in nonempty_subsets(op.m):
            checked += 1
            if not facet_image_check(op, a, samples=5, rng_seed=n):
                violations.append((n, sorted(a)))
    verdict(3, not violations, f"{checked} (operator, face) pairs, {len(violations)} violations")


def test_criterion_04_absorbing_three_way(verdict):
    disagreements, checked, absorbing = [], 0, 0
    for n, op in enumerate(mixed_population(50, 4, 3, seed=4)):
        for a in nonempty_subsets(op.m):
            checked += 1
            absorbing += is_absorbing(op, a)
            if not absorbing_equivalence_check(op, a, samples=10, rng_seed=n):
                disagreements.append((n, sorted(a)))
    verdict(4, not disagreements,
            f"{checked} subsets ({absorbing} absorbing), {len(disagreements)} disagreements")


def test_criterion_05_small_subsets_suffice(verdict):
    violations, passing = [], 0
    rng = np.random.default_rng(5)
    for seed in range(100):
        m, l = int(rng.integers(2, 6)), int(rng.integers(1, 4))
        op = Pso(random_hypermatrix(m, l, "op_structured", seed))
        if not all_small_subsets_absorbing(op):
            continue
        passing += 1
        violations += [(seed, sorted(a)) for a in nonempty_subsets(m)
                       if len(a) < m and not is_absorbing(op, a)]
    verdict(5, passing == 100 and not violations,
            f"{passing}/100 operators pass the small-subset test, {len(violations)} violations")


def test_criterion_06_lift_identity(verdict):
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(50):
        m, l = int(rng.integers(2, 5)), int(rng.integers(1, 4))
        p0 = random_hypermatrix(m, l, "general", rng)
        xs = dirichlet_points(m, 200, rng)
        diff = Pso(lift_order(p0)).evaluate_many(xs) - Pso(p0).evaluate_many(xs)
        worst = max(worst, float(np.abs(diff).max()))
    verdict(6, worst <= 1e-12, f"max |lifted - original| = {worst:.3e} over 50 x 200 points")


def test_criterion_07_vanishing_coordinates(verdict):
    failures, tested = [], 0
    population = [Pso(random_hypermatrix(2 + s % 3, 1 + s % 3, "op_structured", s)) for s in range(60)]
    population += [op for m in (2, 3) for op in vertex_row_grid(m, 2)]
    for n, op in enumerate(population):
        if not all_small_subsets_absorbing(op):
            continue
        tested += 1
        if not check_bb_factorization(op, samples=5, rng_seed=n):
            failures.append(n)
    e2 = Pso(e2_counterexample())
    hit = bb_counterexample(e2, points=[[0.5, 0.5, 0.0]])
    sensitive = hit is not None and hit[1] == 3 and list(hit[0]) == [0.5, 0.5, 0.0]
    verdict(7, not failures and sensitive,
            f"{tested} structured operators, {len(failures)} failures; "
            f"E2 flagged at (0.5, 0.5, 0) coordinate 3: {sensitive}")


def test_criterion_08_m2_closed_form(verdict):
    bad, worst = [], 0.0
    for seed in range(100):
        op = Pso(random_hypermatrix(2, 2 + seed % 3, "vertex_fixing", seed))
        check = m2_polynomial_check(op, grid=10_000)
        worst = max(worst, abs(check.fmin), abs(check.fmax - 1.0))
        if not check or abs(check.fmin) > 1e-9 or abs(check.fmax - 1.0) > 1e-9:
            bad.append(seed)
    verdict(8, not bad, f"100 operators, {len(bad)} failures, worst extreme gap {worst:.1e}")


def test_criterion_09_gradient(verdict):
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(100):
        m, l = int(rng.integers(2, 5)), int(rng.integers(1, 4))
        op = Pso(random_hypermatrix(m, l, "general", rng))
        x, y = dirichlet_points(m, 2, rng)
        fd = finite_difference_gradient(lambda z: objective(op, z, y)[0], x)
        g = objective_gradient(op, x, y)[0]
        worst = max(worst, float(np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12)))
    verdict(9, worst <= 1e-5, f"max relative error {worst:.2e} at 100 interior points")


def test_criterion_10_injectivity_probe(verdict):
    summaries = []
    rng = np.random.default_rng(10)
    for seed in range(50):
        m, l = int(rng.integers(2, 5)), int(rng.integers(2, 4))
        mode = "op_structured" if seed % 2 else "permuted_op"
        op = Pso(random_hypermatrix(m, l, mode, seed))
        report = probe_injectivity(op, n_pairs=10_000, rng_seed=seed)
        payload = report.to_json()
        jsonschema.validate(payload, INJECTIVITY_REPORT_SCHEMA)
        summaries.append({"seed": seed, "mode": mode, "m": m, "l": l,
                          "digest": op.P.digest(), "report": payload})
    ARTIFACT_DIR.mkdir(parents=True, exist_ok=True)
    path = ARTIFACT_DIR / "injectivity_probe.json"
    path.write_text(json.dumps(summaries, indent=2, sort_keys=True))
    candidates = sum(len(s["report"]["candidates"]) for s in summaries)
    confirmed = sum(s["report"]["confirmed"] for s in summaries)
    verdict(10, len(summaries) == 50,
            f"50 operators probed, {candidates} candidates, {confirmed} confirmed; summary at {path}")
