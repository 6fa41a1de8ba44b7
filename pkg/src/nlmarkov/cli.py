"""Command line interface: ``nlmarkov <command> FILE ...``.

Hypermatrices are read from JSON files (``-`` for standard input).  Every
analysis exits 0 whatever the verdict and 2 on malformed input.
"""

from __future__ import annotations

import argparse
import sys
import time

from . import hypermatrix as hm
from . import oracle, structure
from .pso import Pso, facet_image_check
from .report import AnalysisReport
from .simplex import SimplexError, from_mask, parse_subset, parse_vector, support

EXIT_OK = 0
EXIT_INPUT = 2


class InputError(Exception):
    pass


def _load(path: str) -> hm.StochasticHypermatrix:
    try:
        text = sys.stdin.read() if path == "-" else open(path, encoding="utf-8").read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    return hm.loads(text)


def _seed(args, randomized: bool = True) -> int | None:
    if not randomized:
        return None
    if args.seed is not None:
        return args.seed
    if args.json:
        raise InputError("randomized commands need an explicit --seed with --json")
    seed = time.time_ns() % (2**63)
    print(f"seed: {seed}", file=sys.stderr)
    return seed


def _oracle_summary(op: Pso, args, seed) -> dict:
    sample = oracle.sample_surjectivity(op, args.targets, args.starts, args.tol, seed)
    return sample.to_json()


def _sets(items) -> list[list[int]]:
    return [sorted(a) for a in items]


# -- commands --------------------------------------------------------------------

def cmd_validate(args, report):
    p = _load(args.file)
    report.operator = AnalysisReport.digest_of(p)
    report.verdicts = {"valid": True, "rows": p.n_rows}


def cmd_eval(args, report):
    p = _load(args.file)
    op = Pso(p)
    x = parse_vector(args.x, p.m)
    y = op.evaluate(x)
    report.operator = AnalysisReport.digest_of(p)
    report.verdicts = {"x": x.tolist(), "image": y.tolist(),
                       "image_support": sorted(support(y, eps=0.0))}


def cmd_support(args, report):
    p = _load(args.file)
    op = Pso(p)
    a = parse_subset(args.set, p.m)
    seed = _seed(args)
    report.seed = seed
    report.operator = AnalysisReport.digest_of(p)
    report.verdicts = {"set": sorted(a), "image_support": sorted(op.image_support(a)),
                       "facet_image_check": facet_image_check(op, a, args.samples, seed)}


def cmd_absorbing(args, report):
    p = _load(args.file)
    op = Pso(p)
    report.operator = AnalysisReport.digest_of(p)
    if args.set:
        a = parse_subset(args.set, p.m)
        seed = _seed(args)
        report.seed = seed
        report.verdicts = {"set": sorted(a), "absorbing": structure.is_absorbing(op, a),
                           "equivalence_check": structure.absorbing_equivalence_check(op, a, args.samples, seed)}
        return
    check = structure.all_small_subsets_absorbing(op)
    report.verdicts = {"absorbing_sets": _sets(structure.absorbing_sets(op)),
                       "all_small_subsets_absorbing": check.holds}
    if check.certificate:
        report.certificates.append(check.certificate.to_json())


def _op_verdicts(op: Pso, report):
    comb = structure.is_orthogonal_preserving(op, "combinatorial")
    vmap = structure.vertex_map(op)
    report.verdicts["op"] = comb.is_op
    report.verdicts["vertex_permutation"] = list(vmap.permutation) if vmap.permutation else None
    if comb.certificate:
        report.certificates.append(comb.certificate.to_json())
    try:
        struct = structure.is_orthogonal_preserving(op, "structural")
        report.verdicts["op_structural"] = struct.is_op
        if struct.certificate:
            report.certificates.append(struct.certificate.to_json())
    except structure.Inapplicable:
        report.verdicts["op_structural"] = "inapplicable"
        report.certificates.append(vmap.violation.to_json())
    return vmap


def cmd_check_op(args, report):
    p = _load(args.file)
    op = Pso(p)
    report.operator = AnalysisReport.digest_of(p)
    _op_verdicts(op, report)
    if args.oracle:
        report.seed = _seed(args)
        report.oracle = _oracle_summary(op, args, report.seed)


def cmd_surjective(args, report):
    p = _load(args.file)
    op = Pso(p)
    report.operator = AnalysisReport.digest_of(p)
    verdict = structure.decide_surjectivity(op)
    report.verdicts = {"surjective": verdict.surjective, "reason": verdict.reason.value,
                       "permutation": list(verdict.permutation) if verdict.permutation else None}
    if verdict.certificate:
        report.certificates.append(verdict.certificate.to_json())
    if verdict.permutation and p.m <= structure.FACET_MAX_M:
        checks = structure.facet_conditions(op, verdict.permutation)
        report.verdicts["facet_conditions"] = [c.holds for c in checks]
        report.certificates.extend(c.certificate.to_json() for c in checks if c.certificate)
    if args.oracle:
        report.seed = _seed(args)
        report.oracle = _oracle_summary(op, args, report.seed)


def cmd_preimage(args, report):
    p = _load(args.file)
    op = Pso(p)
    y = parse_vector(args.y, p.m)
    seed = _seed(args)
    report.seed = seed
    report.operator = AnalysisReport.digest_of(p)
    result = oracle.solve_preimage(op, y, args.starts, args.tol, seed)
    report.verdicts = result.to_json()


def cmd_sample_surjectivity(args, report):
    p = _load(args.file)
    op = Pso(p)
    report.seed = _seed(args)
    report.operator = AnalysisReport.digest_of(p)
    report.oracle = _oracle_summary(op, args, report.seed)
    report.verdicts = {"consistent_with_surjective": report.oracle["consistent_with_surjective"]}


def cmd_lift(args, report):
    print(hm.dumps(hm.lift_order(_load(args.file))))
    return True


def cmd_gen(args, report):
    perm = [int(t) for t in args.perm.split(",")] if args.perm else None
    seed = _seed(args)
    p = hm.random_hypermatrix(args.m, args.l, args.mode, seed, perm)
    print(hm.dumps(p))
    return True


def cmd_trajectory(args, report):
    p = _load(args.file)
    op = Pso(p)
    x0 = parse_vector(args.x0, p.m)
    if args.steps < 0:
        raise InputError("steps must be nonnegative")
    report.operator = AnalysisReport.digest_of(p)
    report.verdicts = {"trajectory": [x.tolist() for x in op.iterate(x0, args.steps)]}


def cmd_probe_injectivity(args, report):
    p = _load(args.file)
    op = Pso(p)
    report.seed = _seed(args)
    report.operator = AnalysisReport.digest_of(p)
    probe = oracle.probe_injectivity(op, args.pairs, args.sep_tol, args.img_tol, report.seed)
    report.oracle = probe.to_json()
    report.verdicts = {"collision_candidates": len(probe.candidates), "confirmed": probe.confirmed}


# -- parser --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="emit a JSON report")
    common.add_argument("--seed", type=int, default=None, help="random seed (required with --json for randomized commands)")
    common.add_argument("--tol", type=float, default=oracle.DEFAULT_TOL, help="preimage residual tolerance")
    common.add_argument("--starts", type=int, default=oracle.DEFAULT_STARTS, help="multi-start count")
    common.add_argument("--samples", type=int, default=10, help="face samples per check")
    common.add_argument("--targets", type=int, default=50, help="random targets for surjectivity sampling")
    common.add_argument("--oracle", action="store_true", help="attach the numerical surjectivity cross-check")
    common.add_argument("--no-timings", action="store_true", help="omit timings from the report")

    parser = argparse.ArgumentParser(prog="nlmarkov", description="Analyze polynomial stochastic operators.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=func)
        return sp

    add("validate", cmd_validate, "validate a hypermatrix file").add_argument("file")
    sp = add("eval", cmd_eval, "evaluate B(x)")
    sp.add_argument("file")
    sp.add_argument("x", help="comma-separated stochastic vector")
    sp = add("support", cmd_support, "image support of a face")
    sp.add_argument("file")
    sp.add_argument("set", help="comma-separated 1-based indices")
    sp = add("absorbing", cmd_absorbing, "absorbing sets")
    sp.add_argument("file")
    sp.add_argument("set", nargs="?", help="test one set instead of listing all")
    add("check-op", cmd_check_op, "orthogonal preservation").add_argument("file")
    add("surjective", cmd_surjective, "exact surjectivity verdict").add_argument("file")
    sp = add("preimage", cmd_preimage, "numerical preimage of y")
    sp.add_argument("file")
    sp.add_argument("y")
    add("sample-surjectivity", cmd_sample_surjectivity, "numerical surjectivity sampling").add_argument("file")
    add("lift", cmd_lift, "raise the order by one, same operator").add_argument("file")
    sp = add("gen", cmd_gen, "random hypermatrix")
    sp.add_argument("m", type=int)
    sp.add_argument("l", type=int)
    sp.add_argument("mode", choices=hm.MODES)
    sp.add_argument("--perm", help="permutation for permuted_op, e.g. 2,3,1")
    sp = add("trajectory", cmd_trajectory, "iterate B from x0")
    sp.add_argument("file")
    sp.add_argument("x0")
    sp.add_argument("steps", type=int)
    sp = add("probe-injectivity", cmd_probe_injectivity, "search for image collisions")
    sp.add_argument("file")
    sp.add_argument("--pairs", type=int, default=10_000)
    sp.add_argument("--sep-tol", type=float, default=1e-2)
    sp.add_argument("--img-tol", type=float, default=1e-10)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    report = AnalysisReport(command=args.command)
    start = time.perf_counter()
    try:
        raw = args.func(args, report)
    except (InputError, hm.HypermatrixError, SimplexError, structure.StructureError,
            oracle.PreconditionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if raw:
        return EXIT_OK
    if not args.no_timings:
        report.timings = {"total": time.perf_counter() - start}
    print(report.dumps() if args.json else report.render_text())
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
