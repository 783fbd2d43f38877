import argparse
import json
import pathlib
import sys
from fractions import Fraction
from typing import List, Optional

from hardtrees.claims import ClaimId, ClaimParams, report_to_json, verify_claim
from hardtrees.config import DEFAULT_GUARDS, Guards, env_int, guards_from_env, parse_guard_overrides
from hardtrees.constants import DEFAULT_ELL, DEFAULT_SAMPLES, DEFAULT_SEED, DEFAULT_TRIALS, LAW_TRIALS
from hardtrees.errors import InstanceError
from hardtrees.hypotheses import hypothesis_from_json
from hardtrees.logging import log, set_verbosity
from hardtrees.pipeline import GridSpec, adjudicate, check_bundle_coherence, dump_json, gen_construction, \
    gen_estimation, read_bundle, rederive_metadata, run_suite, verdict_to_json, write_bundle
from hardtrees.setcover import exact_opt, greedy_cover, hitting_set_opt, normalize, parse_instance
from hardtrees.types import GapParams

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_ERROR = 2


def _read_instance(path: str):
    return parse_instance(pathlib.Path(path).read_text())


def _read_hypothesis(path: str):
    try:
        document = json.loads(pathlib.Path(path).read_text())
    except json.JSONDecodeError as e:
        raise InstanceError(f"Hypothesis file {path} is not valid JSON: {e}") from e
    if not isinstance(document, dict):
        raise InstanceError(f"Hypothesis file {path} does not hold a JSON object")
    return hypothesis_from_json(document)


def _rational(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"'{text}' is not a rational number")


def _gap(args: argparse.Namespace) -> Optional[GapParams]:
    if args.k is None and args.k_prime is None:
        return None
    if args.k is None or args.k_prime is None:
        raise RuntimeError("--k and --k-prime must be given together")
    return GapParams(k=args.k, k_prime=args.k_prime)


def _gen(args: argparse.Namespace, guards: Guards) -> int:
    inst = _read_instance(args.instance)
    if args.problem == "construction":
        bundle = gen_construction(inst, ell=args.ell, negated=args.negated, strict_size=args.strict_size,
                                  gap=_gap(args), eps=args.eps, allow_degenerate=args.allow_degenerate, guards=guards)
    else:
        bundle = gen_estimation(inst, gap=_gap(args), m=args.m, eps=args.eps, guards=guards)
    write_bundle(bundle, args.out)
    return EXIT_PASS


def _solve_setcover(args: argparse.Namespace, guards: Guards) -> int:
    inst = _read_instance(args.instance)
    normalized, note = normalize(inst)
    opt, cover = exact_opt(inst, guards)
    hitting_size, hitting_set = hitting_set_opt(inst, guards)
    print(dump_json({
        "n": inst.n,
        "universe_size": len(inst.universe),
        "N": inst.total_vertices,
        "opt": opt,
        "cover": cover,
        "greedy_cover": greedy_cover(inst),
        "hitting_set_opt": hitting_size,
        "hitting_set": hitting_set,
        "normalized": {"n": normalized.n, "universe_size": len(normalized.universe),
                       "deleted": note.deleted, "replicated": note.replicated},
    }), end="")
    return EXIT_PASS


def _adjudicate(args: argparse.Namespace, guards: Guards) -> int:
    bundle = read_bundle(args.bundle)
    hypothesis = _read_hypothesis(args.hypothesis)
    verdict = adjudicate(bundle, hypothesis, mode=args.mode, samples=args.samples, seed=args.seed, eps=args.eps,
                         guards=guards)
    print(dump_json(verdict_to_json(verdict)), end="")
    return EXIT_PASS if verdict.passed else EXIT_FAIL


def _selected_claims(text: str) -> List[str]:
    if text == "all":
        return [claim.value for claim in ClaimId]
    return [c.strip() for c in text.split(",") if c.strip()]


def _verify(args: argparse.Namespace, guards: Guards) -> int:
    claims = _selected_claims(args.claims)
    if args.instance:
        normalized, _ = normalize(_read_instance(args.instance))
        flip = (0,) * normalized.n if args.flip_zero else None
        params = ClaimParams(ell=args.ell, seed=args.seed, trials=args.trials, law_trials=args.law_trials, m=args.m,
                             flip=flip, guards=guards)
        reports = [verify_claim(claim, normalized, params) for claim in claims]
    else:
        grid = GridSpec(max_sets=args.max_sets, max_universe=args.max_universe, ells=tuple(args.ells or [args.ell]),
                        seed=args.seed, trials=args.trials, law_trials=args.law_trials, m=args.m,
                        flip_zero=args.flip_zero)
        reports = run_suite(claims, grid, guards, workers=args.workers)
    print(dump_json([report_to_json(r) for r in reports]), end="")
    return EXIT_PASS if all(r.verdict for r in reports) else EXIT_FAIL


def _report(args: argparse.Namespace, guards: Guards) -> int:
    bundle = read_bundle(args.bundle)
    problems = check_bundle_coherence(bundle, guards)
    print(dump_json({"problem": bundle.problem, "coherent": not problems, "problems": problems,
                     "metadata": rederive_metadata(bundle, guards)}), end="")
    return EXIT_PASS if not problems else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ell = env_int("ELL", DEFAULT_ELL)
    m = env_int("M", 1)
    seed = env_int("SEED", DEFAULT_SEED)
    samples = env_int("SAMPLES", DEFAULT_SAMPLES)

    parser = argparse.ArgumentParser(description="Hard decision-tree instances from Set-Cover")
    parser.add_argument("--guards", help="Guard overrides, e.g. tree_dp_max_depth=4,dnf_max_terms=2", default="")
    parser.add_argument("--verbose", help="Log at debug level", action="store_true")
    parser.add_argument("--quiet", help="Only log warnings and errors", action="store_true")
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen", help="Generate a hard-instance bundle")
    gen.add_argument("problem", choices=["construction", "estimation"])
    gen.add_argument("--instance", help="Set-Cover instance JSON file", required=True)
    gen.add_argument("--out", help="Bundle output directory", required=True)
    gen.add_argument("--ell", help="Block length (construction)", type=int, default=ell)
    gen.add_argument("--m", help="XOR copies (estimation)", type=int, default=m)
    gen.add_argument("--negated", help="Emit the negated function (construction)", action="store_true")
    gen.add_argument("--strict-size", help="Size cap for strictly-proper adjudication", type=int, default=None)
    gen.add_argument("--k", help="Yes threshold of the gap", type=int, default=None)
    gen.add_argument("--k-prime", help="No threshold of the gap", type=int, default=None)
    gen.add_argument("--eps", help="Target accuracy as a rational, e.g. 1/36", type=_rational, default=None)
    gen.add_argument("--allow-degenerate", help="Permit ell = 1", action="store_true")
    gen.set_defaults(handler=_gen)

    solve = commands.add_parser("solve-setcover", help="Solve a Set-Cover instance exactly")
    solve.add_argument("--instance", help="Set-Cover instance JSON file", required=True)
    solve.set_defaults(handler=_solve_setcover)

    judge = commands.add_parser("adjudicate", help="Judge a hypothesis against a bundle")
    judge.add_argument("--bundle", help="Bundle directory", required=True)
    judge.add_argument("--hypothesis", help="Hypothesis JSON file", required=True)
    judge.add_argument("--mode", choices=["exact", "monte_carlo"], default="exact")
    judge.add_argument("--samples", help="Monte-Carlo samples", type=int, default=samples)
    judge.add_argument("--seed", help="Monte-Carlo seed", type=int, default=seed)
    judge.add_argument("--eps", help="Override the bundle's accuracy", type=_rational, default=None)
    judge.set_defaults(handler=_adjudicate)

    verify = commands.add_parser("verify", help="Verify claims on one instance or on the instance grid")
    verify.add_argument("--claims", help="Comma separated claim ids, or 'all'", default="all")
    verify.add_argument("--instance", help="Verify on this instance instead of the grid", default=None)
    verify.add_argument("--max-sets", type=int, default=4)
    verify.add_argument("--max-universe", type=int, default=4)
    verify.add_argument("--ell", type=int, default=ell)
    verify.add_argument("--ells", help="Block lengths of the grid", type=int, nargs="*", default=None)
    verify.add_argument("--m", help="XOR copies", type=int, default=max(m, 2))
    verify.add_argument("--seed", type=int, default=seed)
    verify.add_argument("--trials", help="Random candidates per restriction claim", type=int, default=DEFAULT_TRIALS)
    verify.add_argument("--law-trials", help="Random hypotheses per average-depth and average-width law", type=int,
                        default=LAW_TRIALS)
    verify.add_argument("--flip-zero", help="Verify the mutant that labels the all-zeros string 1",
                        action="store_true")
    verify.add_argument("--workers", type=int, default=None)
    verify.set_defaults(handler=_verify)

    report = commands.add_parser("report", help="Re-derive and check a bundle's metadata")
    report.add_argument("--bundle", help="Bundle directory", required=True)
    report.set_defaults(handler=_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    try:
        parser = build_parser()
    except RuntimeError as e:
        log.error(f"{e}")
        return EXIT_ERROR
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_PASS if e.code in (None, 0) else EXIT_ERROR
    set_verbosity(args.verbose, args.quiet)
    try:
        guards = guards_from_env(base=DEFAULT_GUARDS).with_overrides(parse_guard_overrides(args.guards))
        return args.handler(args, guards)
    except RuntimeError as e:
        log.error(f"{type(e).__name__}: {e}")
        return EXIT_ERROR
    except OSError as e:
        log.error(f"{e}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
