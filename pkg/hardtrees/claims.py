import dataclasses
import math
from enum import Enum
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from hardtrees.bits import Bits, bits_to_str
from hardtrees.circuit import emit_circuit
from hardtrees.config import Guards, DEFAULT_GUARDS
from hardtrees.constants import ABORT_DELTA_LIMIT, ABORT_TREE_SIZE_DIVISOR, BASE_ABORT_LIMIT, DEFAULT_ABORT_DELTA, \
    DEFAULT_ELL, DEFAULT_SEED, DEFAULT_TRIALS, DNF_SIZE_DIVISOR, LAW_ATTEMPT_FACTOR, LAW_MAX_SIZE, LAW_MIN_SIZE, \
    LAW_TRIALS, TREE_SIZE_DIVISOR
from hardtrees.construction import PartialFunctionTable, build_dist, build_gamma, negate
from hardtrees.errors import DomainError, GuardExceeded, UnknownClaim
from hardtrees.hypotheses import DecisionTree, DnfFormula, Literal, abort_prob, avg_depth, avg_width, \
    cover_dnf, dist_exact, junta_tree, random_dnf, random_tree
from hardtrees.logging import log
from hardtrees.oracles import find_dnf_restriction, find_restriction, junta_learner, min_dist_dnf, \
    min_error_with_avg_depth, min_error_with_avg_width, opt_tree_dp, opt_tree_size_dp
from hardtrees.parity import AmplifiedDistribution, AmplifiedFunction, build_generator, generator_pushforward, \
    leaf_reach_probability, pmf_equivalence_check, uniform_likeness_violations
from hardtrees.setcover import SetCoverInstance, exact_opt
from hardtrees.types import OracleReport
from hardtrees.xor import drucker_bound, solve_alpha, xor_compose, xor_junta_tree


class ClaimId(Enum):
    DEPTH_ERROR = "depth-error"  # Shallow trees on average are 1/(2N)-far from the base function
    DEPTH_ERROR_ABORT = "depth-error-abort"  # Same with an abort budget below 1/2
    WIDTH_ERROR = "width-error"  # Narrow DNFs on average are 1/(2N)-far from the negated base function
    TREE_RESTRICTION = "tree-restriction"
    TREE_RESTRICTION_ABORT = "tree-restriction-abort"
    DNF_RESTRICTION = "dnf-restriction"
    TREE_FARNESS = "tree-farness"  # Trees of size < 2^(opt*ell/8) are 1/(4N)-far
    ABORT_FARNESS = "abort-farness"  # Abort trees of size < 2^(opt*ell/40) are 1/(20N)-far
    DNF_FARNESS = "dnf-farness"  # DNFs of size < 2^(opt*ell/16) are 1/(4N)-far from the negation
    DIST_EQUIVALENCE = "dist-equivalence"
    GENERATOR_EXACTNESS = "generator-exactness"
    JUNTA_CERTIFICATE = "junta-certificate"
    JUNTA_LEARNING = "junta-learning"
    AVG_DEPTH = "avg-depth"
    AVG_WIDTH = "avg-width"
    UNIFORM_LIKENESS = "uniform-likeness"
    XOR_YES_DEPTH = "xor-yes-depth"
    XOR_AMPLIFICATION = "xor-amplification"


def parse_claim_id(claim_id) -> ClaimId:
    if isinstance(claim_id, ClaimId):
        return claim_id
    try:
        return ClaimId(claim_id)
    except ValueError:
        raise UnknownClaim(f"Unknown claim id '{claim_id}'")


@dataclasses.dataclass(frozen=True)
class ClaimParams:
    ell: int = DEFAULT_ELL
    delta: Fraction = DEFAULT_ABORT_DELTA  # Abort budget for the abort far-ness check, below 2/5
    seed: int = DEFAULT_SEED
    trials: int = DEFAULT_TRIALS  # Random candidates per restriction check
    law_trials: int = LAW_TRIALS  # Random hypotheses per average-depth and average-width law
    m: int = 2  # Copies for the XOR checks
    flip: Optional[Bits] = None  # Flip the base function at this support point (mutation check)
    guards: Guards = DEFAULT_GUARDS


def _integer_root(value: int, k: int) -> int:
    """
    floor(value^(1/k)) for non-negative integers
    """
    lo, hi = 0, 1 << (value.bit_length() // k + 1)
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if mid ** k <= value:
            lo = mid
        else:
            hi = mid - 1
    return lo


def largest_size_below(exponent: int, divisor: int) -> int:
    """
    Largest s with s < 2^(exponent/divisor), i.e. s^divisor < 2^exponent. 0 when even s = 1 fails.
    """
    if exponent < 0 or divisor < 1:
        raise DomainError(f"Bad threshold 2^({exponent}/{divisor})")
    power = 1 << exponent
    s = _integer_root(power, divisor)
    if s ** divisor == power:
        s -= 1
    return s


def size_threshold(opt: int, ell: int, divisor: int) -> dict:
    return {"exponent": f"{opt * ell}/{divisor}", "max_size_below": largest_size_below(opt * ell, divisor)}


def _below_log_bound(value: Fraction, size: int, factor: int) -> bool:
    """
    value <= factor * log2(size), exactly: 2^p <= size^(factor*q) for value = p/q
    """
    value = Fraction(value)
    if size < 1:
        return False
    return 2 ** value.numerator <= size ** (factor * value.denominator)


def report_to_json(report: OracleReport) -> dict:
    return {
        "claim_id": report.claim_id,
        "parameters": report.parameters,
        "computed": None if report.computed is None else str(report.computed),
        "threshold": str(report.threshold),
        "relation": report.relation,
        "verdict": report.verdict,
        "witness": report.witness,
        "details": report.details,
    }


@dataclasses.dataclass
class _Context:
    inst: SetCoverInstance
    params: ClaimParams
    opt: int
    cover: List[str]
    gamma: PartialFunctionTable

    @property
    def guards(self) -> Guards:
        return self.params.guards

    @property
    def total_vertices(self) -> int:
        return self.inst.total_vertices

    @property
    def amp_vars(self) -> int:
        return self.inst.n * self.params.ell

    def dist(self):
        return build_dist(self.inst)

    def amplified(self, negated: bool = False) -> Tuple[AmplifiedFunction, AmplifiedDistribution]:
        base = negate(self.gamma) if negated else self.gamma
        return (AmplifiedFunction(base, self.params.ell),
                AmplifiedDistribution(self.dist(), self.params.ell, guards=self.guards))

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.params.seed)


def _report(ctx: _Context, claim: ClaimId, computed: Optional[Fraction], threshold: Fraction, relation: str,
            witness=None, details: str = "", **parameters) -> OracleReport:
    if computed is None:
        verdict = True
    elif relation == ">=":
        verdict = computed >= threshold
    else:
        verdict = computed <= threshold
    parameters = {"n": ctx.inst.n, "N": ctx.total_vertices, "opt": ctx.opt, **parameters}
    return OracleReport(claim_id=claim.value, parameters=parameters, computed=computed, threshold=threshold,
                        relation=relation, verdict=verdict, witness=witness, details=details)


def _violations(ctx: _Context, claim: ClaimId, failures: list, checked: int, **parameters) -> OracleReport:
    witness = failures[0] if failures else None
    return _report(ctx, claim, Fraction(len(failures)), Fraction(0), "<=", witness=witness,
                   details=f"{len(failures)} of {checked} checks failed", **parameters)


def _depth_error(ctx: _Context, abort: bool) -> OracleReport:
    bound = Fraction(ctx.opt, 2)
    allow_abort = BASE_ABORT_LIMIT if abort else None
    tree, error = min_error_with_avg_depth(ctx.gamma, ctx.dist(), bound, allow_abort=allow_abort, abort_strict=True,
                                           guards=ctx.guards)
    claim = ClaimId.DEPTH_ERROR_ABORT if abort else ClaimId.DEPTH_ERROR
    return _report(ctx, claim, error, Fraction(1, 2 * ctx.total_vertices), ">=",
                   witness=None if tree is None else tree.to_json(),
                   details="vacuous: no tree meets the depth bound" if tree is None else "",
                   avg_depth_below=str(bound), abort_below=None if allow_abort is None else str(allow_abort))


def _width_error(ctx: _Context) -> OracleReport:
    bound = Fraction(ctx.opt, 2)
    formula, error = min_error_with_avg_width(negate(ctx.gamma), ctx.dist(), bound, guards=ctx.guards)
    return _report(ctx, ClaimId.WIDTH_ERROR, error, Fraction(1, 2 * ctx.total_vertices), ">=",
                   witness=None if formula is None else formula.to_json(), avg_width_below=str(bound))


def _tree_farness(ctx: _Context) -> OracleReport:
    f, dist = ctx.amplified()
    threshold = size_threshold(ctx.opt, ctx.params.ell, TREE_SIZE_DIVISOR)
    size = threshold["max_size_below"]
    if size == 0:
        return _report(ctx, ClaimId.TREE_FARNESS, None, Fraction(1, 4 * ctx.total_vertices), ">=",
                       details="vacuous: no tree is small enough", size_threshold=threshold)
    tree, error = opt_tree_size_dp(f, dist, size, guards=ctx.guards)
    return _report(ctx, ClaimId.TREE_FARNESS, error, Fraction(1, 4 * ctx.total_vertices), ">=",
                   witness=tree.to_json(), ell=ctx.params.ell, size_threshold=threshold)


def _abort_farness(ctx: _Context) -> OracleReport:
    delta = Fraction(ctx.params.delta)
    if not 0 <= delta < ABORT_DELTA_LIMIT:
        raise DomainError(f"Abort budget {delta} must lie in [0, {ABORT_DELTA_LIMIT})")
    f, dist = ctx.amplified()
    threshold = size_threshold(ctx.opt, ctx.params.ell, ABORT_TREE_SIZE_DIVISOR)
    size = threshold["max_size_below"]
    floor = Fraction(1, 20 * ctx.total_vertices)
    if size == 0:
        return _report(ctx, ClaimId.ABORT_FARNESS, None, floor, ">=", details="vacuous: no tree is small enough",
                       size_threshold=threshold, delta=str(delta))
    tree, error = opt_tree_size_dp(f, dist, size, allow_abort=delta, guards=ctx.guards)
    return _report(ctx, ClaimId.ABORT_FARNESS, error, floor, ">=", witness=tree.to_json(), ell=ctx.params.ell,
                   size_threshold=threshold, delta=str(delta))


def _dnf_farness(ctx: _Context) -> OracleReport:
    f, dist = ctx.amplified(negated=True)
    threshold = size_threshold(ctx.opt, ctx.params.ell, DNF_SIZE_DIVISOR)
    terms = threshold["max_size_below"]
    formula, error = min_dist_dnf(f, dist, terms, ctx.amp_vars, guards=ctx.guards)
    return _report(ctx, ClaimId.DNF_FARNESS, error, Fraction(1, 4 * ctx.total_vertices), ">=",
                   witness=formula.to_json(), ell=ctx.params.ell, size_threshold=threshold)


def _tree_candidates(ctx: _Context, f, dist, abort: bool) -> List[DecisionTree]:
    """
    The junta tree of the optimal cover, optimal trees for every depth budget in the guard, and random trees
    """
    allow_abort = Fraction(ctx.params.delta) if abort else None
    candidates = [junta_tree(ctx.inst, ctx.cover, ctx.params.ell)]
    for budget in range(min(ctx.amp_vars, ctx.guards.tree_dp_max_depth) + 1):
        candidates.append(opt_tree_dp(f, dist, budget, allow_abort=allow_abort, guards=ctx.guards)[0])
    rng = ctx.rng()
    for _ in range(ctx.params.trials):
        size = int(rng.integers(1, 2 ** min(ctx.amp_vars, 4) + 1))
        candidates.append(random_tree(ctx.amp_vars, size, rng, abort_rate=0.25 if abort else 0.0))
    return candidates


def _tree_restriction(ctx: _Context, abort: bool) -> OracleReport:
    f, dist = ctx.amplified()
    failures = []
    candidates = _tree_candidates(ctx, f, dist, abort)
    for tree in candidates:
        eps, d = dist_exact(tree, f, dist), avg_depth(tree, dist)
        delta = abort_prob(tree, dist) if abort else None
        result = find_restriction(tree, ctx.gamma, ctx.dist(), ctx.params.ell, eps, d, abort_delta=delta,
                                  seed=ctx.params.seed, guards=ctx.guards)
        if not result.report.verdict:
            failures.append(tree.to_json())
    claim = ClaimId.TREE_RESTRICTION_ABORT if abort else ClaimId.TREE_RESTRICTION
    return _violations(ctx, claim, failures, len(candidates), ell=ctx.params.ell)


def _dnf_candidates(ctx: _Context, f, dist) -> List[DnfFormula]:
    candidates = [cover_dnf(ctx.inst, ctx.cover, ctx.params.ell)]
    for max_terms, max_width in ((1, ctx.amp_vars), (2, 2)):
        try:
            candidates.append(min_dist_dnf(f, dist, max_terms, max_width, guards=ctx.guards)[0])
        except GuardExceeded as e:
            log.debug(f"Skipping the ({max_terms}, {max_width}) DNF optimum: {e}")
    rng = ctx.rng()
    for _ in range(ctx.params.trials):
        candidates.append(random_dnf(ctx.amp_vars, int(rng.integers(0, 6)), rng))
    return candidates


def _dnf_restriction(ctx: _Context) -> OracleReport:
    f, dist = ctx.amplified(negated=True)
    base = negate(ctx.gamma)
    failures = []
    candidates = _dnf_candidates(ctx, f, dist)
    for formula in candidates:
        eps, w = dist_exact(formula, f, dist), avg_width(formula, dist)
        result = find_dnf_restriction(formula, base, ctx.dist(), ctx.params.ell, eps, w, seed=ctx.params.seed,
                                      guards=ctx.guards)
        if not result.report.verdict:
            failures.append(formula.to_json())
    return _violations(ctx, ClaimId.DNF_RESTRICTION, failures, len(candidates), ell=ctx.params.ell)


def _dist_equivalence(ctx: _Context) -> OracleReport:
    _, dist = ctx.amplified()
    failures = [j for j in range(1, ctx.params.ell + 1) if not pmf_equivalence_check(dist, j, ctx.guards)]
    return _violations(ctx, ClaimId.DIST_EQUIVALENCE, failures, ctx.params.ell, ell=ctx.params.ell)


def _generator_exactness(ctx: _Context) -> OracleReport:
    ell = ctx.params.ell
    spec = build_generator(ctx.inst, ell)
    pushforward = generator_pushforward(spec, ctx.guards)
    target = AmplifiedDistribution(spec.base_distribution(), ell, guards=ctx.guards)
    strings = set(pushforward) | {y for y, _ in target.atoms()}
    failures: list = [bits_to_str(y) for y in sorted(strings) if pushforward.get(y, 0) != target.pmf(y)]

    f, _ = ctx.amplified()
    points = list(f.support())
    outputs = emit_circuit(ctx.inst, ell, negated=False).evaluate_batch(np.array(points, dtype=np.uint8))
    failures += [bits_to_str(y) for y, out in zip(points, outputs) if int(out) != f.evaluate(y)]
    return _violations(ctx, ClaimId.GENERATOR_EXACTNESS, failures, len(strings) + len(points), ell=ell,
                       seed_bits=spec.seed_bits)


def _junta_certificate(ctx: _Context) -> OracleReport:
    ell = ctx.params.ell
    f, dist = ctx.amplified()
    relevant = [b * ell + p for b in ctx.inst.set_indices(ctx.cover) for p in range(ell)]
    values: Dict[Bits, int] = {}
    failures: list = []
    for y in f.support():
        projection = tuple(y[v] for v in relevant)
        if values.setdefault(projection, f.evaluate(y)) != f.evaluate(y):
            failures.append(bits_to_str(y))
    tree = junta_tree(ctx.inst, ctx.cover, ell)
    if dist_exact(tree, f, dist) != 0:
        failures.append(tree.to_json())
    return _violations(ctx, ClaimId.JUNTA_CERTIFICATE, failures, len(values) + 1, ell=ell, cover=ctx.cover,
                       relevant_variables=relevant)


def _junta_learning(ctx: _Context) -> OracleReport:
    dist = ctx.dist()
    largest = min(ctx.inst.n, ctx.guards.junta_max_k)
    failures = [k for k in range(largest + 1)
                if (junta_learner(ctx.gamma, dist, k, ctx.guards) is not None) != (ctx.opt <= k)]
    return _violations(ctx, ClaimId.JUNTA_LEARNING, failures, largest + 1, k_range=[0, largest])


def _avg_depth(ctx: _Context) -> OracleReport:
    _, dist = ctx.amplified()
    rng = ctx.rng()
    largest = min(LAW_MAX_SIZE, 2 ** ctx.amp_vars)
    failures = []
    for _ in range(ctx.params.law_trials):
        tree = random_tree(ctx.amp_vars, int(rng.integers(LAW_MIN_SIZE, largest + 1)), rng)
        depth = avg_depth(tree, dist)
        reach_total = Fraction(0)
        ok = _below_log_bound(depth, tree.size, 2)
        for path, _ in tree.leaf_paths():
            reach = leaf_reach_probability(path, dist)
            reach_total += reach * len(path)
            # reach <= 2^(-|L|/2)  <=>  reach^2 * 2^|L| <= 1
            ok = ok and reach * reach * 2 ** len(path) <= 1
        if not ok or reach_total != depth:
            failures.append(tree.to_json())
    return _violations(ctx, ClaimId.AVG_DEPTH, failures, ctx.params.law_trials, ell=ctx.params.ell,
                       size_range=[LAW_MIN_SIZE, largest])


def _subsumed_term(term: Sequence[Literal], num_vars: int, rng: np.random.Generator) -> List[Literal]:
    """
    term with one more literal on an unused variable, or term itself when it already mentions every variable
    """
    used = {v for v, _ in term}
    free = [v for v in range(num_vars) if v not in used]
    if not free:
        return list(term)
    return sorted(list(term) + [(free[int(rng.integers(len(free)))], int(rng.integers(2)))])


def _avg_width(ctx: _Context) -> OracleReport:
    f, dist = ctx.amplified(negated=True)
    rng = ctx.rng()
    base_terms = list(cover_dnf(ctx.inst, ctx.cover, ctx.params.ell).terms)
    target = ctx.params.law_trials
    max_attempts = LAW_ATTEMPT_FACTOR * target
    failures, checked, attempts = [], 0, 0
    while checked < target and attempts < max_attempts:
        attempts += 1
        terms = list(base_terms)
        if len(terms) > 1 and rng.random() < 0.5:
            terms.pop(int(rng.integers(len(terms))))
        extra = max(0, 4 - len(terms)) + int(rng.integers(0, 3))
        for _ in range(extra):
            if terms and rng.random() < 0.5:
                terms.append(_subsumed_term(terms[int(rng.integers(len(terms)))], ctx.amp_vars, rng))
            else:
                terms += random_dnf(ctx.amp_vars, 1, rng).terms
        formula = DnfFormula(terms, ctx.amp_vars)
        if formula.size < 4 or dist_exact(formula, f, dist) > Fraction(1, 4):
            continue
        checked += 1
        if not _below_log_bound(avg_width(formula, dist), formula.size, 4):
            failures.append(formula.to_json())
    if checked < target:
        failures.append({"attempts": attempts, "checked": checked})
    return _violations(ctx, ClaimId.AVG_WIDTH, failures, target, ell=ctx.params.ell, attempts=attempts)


def _uniform_likeness(ctx: _Context) -> OracleReport:
    _, dist = ctx.amplified()
    failures = [list(v) for v in uniform_likeness_violations(dist, ctx.guards)]
    return _violations(ctx, ClaimId.UNIFORM_LIKENESS, failures, ctx.inst.n, ell=ctx.params.ell)


def _xor_yes_depth(ctx: _Context) -> OracleReport:
    m, ell = ctx.params.m, ctx.params.ell
    f, dist = ctx.amplified()
    composed, product = xor_compose(f, dist, m, ctx.guards)
    tree = xor_junta_tree(ctx.inst, ctx.cover, m, ell)
    bound = ctx.opt * ell * m
    failures = []
    if tree.depth > bound:
        failures.append(f"depth {tree.depth} > {bound}")
    if dist_exact(tree, composed, product) != 0:
        failures.append(tree.to_json())
    return _violations(ctx, ClaimId.XOR_YES_DEPTH, failures, 2, m=m, ell=ell, depth=tree.depth, depth_bound=bound)


def _xor_amplification(ctx: _Context) -> OracleReport:
    """
    Desk check of the XOR stage: the composed function keeps the drucker_bound distance from every tree of depth
    floor(alpha * e_d * d * m), where e_d is the base error at depth d
    """
    m = ctx.params.m
    alpha = solve_alpha()
    f, dist = ctx.amplified()
    composed, product = xor_compose(f, dist, m, ctx.guards)
    failures, checked = [], 0
    for d in range(1, min(ctx.amp_vars, ctx.guards.tree_dp_max_depth) + 1):
        _, base_error = opt_tree_dp(f, dist, d, guards=ctx.guards)
        if base_error == 0:
            continue
        composed_depth = math.floor(alpha * float(base_error) * d * m)
        _, composed_error = opt_tree_dp(composed, product, composed_depth, guards=ctx.guards)
        bound = drucker_bound(float(base_error), alpha, m)
        checked += 1
        if float(composed_error) < bound:
            failures.append({"d": d, "base_error": str(base_error), "composed_depth": composed_depth,
                             "composed_error": str(composed_error), "bound": bound})
    return _violations(ctx, ClaimId.XOR_AMPLIFICATION, failures, checked, m=m, alpha=alpha)


_CHECKS: Dict[ClaimId, Callable[[_Context], OracleReport]] = {
    ClaimId.DEPTH_ERROR: lambda ctx: _depth_error(ctx, abort=False),
    ClaimId.DEPTH_ERROR_ABORT: lambda ctx: _depth_error(ctx, abort=True),
    ClaimId.WIDTH_ERROR: _width_error,
    ClaimId.TREE_RESTRICTION: lambda ctx: _tree_restriction(ctx, abort=False),
    ClaimId.TREE_RESTRICTION_ABORT: lambda ctx: _tree_restriction(ctx, abort=True),
    ClaimId.DNF_RESTRICTION: _dnf_restriction,
    ClaimId.TREE_FARNESS: _tree_farness,
    ClaimId.ABORT_FARNESS: _abort_farness,
    ClaimId.DNF_FARNESS: _dnf_farness,
    ClaimId.DIST_EQUIVALENCE: _dist_equivalence,
    ClaimId.GENERATOR_EXACTNESS: _generator_exactness,
    ClaimId.JUNTA_CERTIFICATE: _junta_certificate,
    ClaimId.JUNTA_LEARNING: _junta_learning,
    ClaimId.AVG_DEPTH: _avg_depth,
    ClaimId.AVG_WIDTH: _avg_width,
    ClaimId.UNIFORM_LIKENESS: _uniform_likeness,
    ClaimId.XOR_YES_DEPTH: _xor_yes_depth,
    ClaimId.XOR_AMPLIFICATION: _xor_amplification,
}


def verify_claim(claim_id, inst: SetCoverInstance, params: ClaimParams = ClaimParams()) -> OracleReport:
    """
    Checks one claim exactly on a normalized instance

    :param claim_id: A ClaimId or its string value
    :param inst: A normalized instance within the oracle guards
    :param params: Block length, abort budget, seed, trial count, XOR copies, optional label flip and guards
    :return: The report; verdict False means the claim's inequality failed on this instance
    """
    claim = parse_claim_id(claim_id)
    opt, cover = exact_opt(inst, params.guards)
    gamma = build_gamma(inst)
    if params.flip is not None:
        gamma = gamma.with_flipped(params.flip)
    ctx = _Context(inst=inst, params=params, opt=opt, cover=cover, gamma=gamma)
    report = _CHECKS[claim](ctx)
    if params.flip is not None:
        report.parameters["flipped"] = bits_to_str(params.flip)
    if report.verdict:
        log.debug(f"{claim.value} holds on {inst.n}x{len(inst.universe)} instance: {report.details}")
    else:
        log.warning(f"{claim.value} FAILED on {inst.n}x{len(inst.universe)} instance: computed "
                    f"{report.computed}, threshold {report.relation} {report.threshold}")
    return report
