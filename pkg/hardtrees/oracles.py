import dataclasses
import itertools
import math
from fractions import Fraction
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from hardtrees.bits import Bits, all_bitstrings, bits_to_str, mask_members
from hardtrees.config import Guards, DEFAULT_GUARDS
from hardtrees.constants import ABORT_RESTRICTION_DELTA, ABORT_RESTRICTION_FACTOR, DEFAULT_SEED, \
    TREE_RESTRICTION_FACTOR
from hardtrees.construction import Distribution, PartialFunction
from hardtrees.errors import DomainError, GuardExceeded
from hardtrees.hypotheses import DecisionTree, DnfFormula, Hypothesis, Leaf, Node, TreeNode, abort_prob, \
    avg_depth, avg_width, dist_exact, evaluate_function_batch, expected_position_counts, restrict_dnf, \
    restrict_tree
from hardtrees.logging import log
from hardtrees.parity import AmplifiedDistribution, GeneratorSpec, sample
from hardtrees.types import JuntaHypothesis, OracleReport


class AtomTable:
    """
    The atoms of a distribution with their labels under a function, as integer weights over a common denominator.
    Sets of atoms are integer masks; bit a stands for atom a.
    """

    def __init__(self, f: PartialFunction, dist: Distribution) -> None:
        atoms = list(dist.atoms())
        if not atoms:
            raise DomainError("Distribution has no atoms")
        defined_at = getattr(f, "defined_at", None)
        for x, _ in atoms:
            if defined_at is not None and not defined_at(x):
                raise DomainError(f"Atom {bits_to_str(x)} lies outside the function's support")
        self.points: Tuple[Bits, ...] = tuple(x for x, _ in atoms)
        self.labels: Tuple[int, ...] = tuple(f.evaluate(x) for x in self.points)
        self.denominator = math.lcm(*(p.denominator for _, p in atoms))
        self.weights: Tuple[int, ...] = tuple(int(p * self.denominator) for _, p in atoms)
        self.num_vars = dist.arity
        self.full = (1 << len(atoms)) - 1
        self.var_masks: Tuple[int, ...] = tuple(sum(1 << a for a, x in enumerate(self.points) if x[v])
                                                for v in range(self.num_vars))
        self.ones = sum(1 << a for a, label in enumerate(self.labels) if label == 1)
        self._mass: Dict[int, int] = {}

    def __len__(self) -> int:
        return len(self.points)

    def mass(self, mask: int) -> int:
        if mask not in self._mass:
            self._mass[mask] = sum(self.weights[a] for a in mask_members(mask))
        return self._mass[mask]

    def fraction(self, value: int) -> Fraction:
        return Fraction(value, self.denominator)

    def error_of(self, accepted: int) -> int:
        """
        Weighted disagreements of the hypothesis that outputs 1 exactly on the accepted atoms
        """
        return self.mass(accepted & ~self.ones & self.full) + self.mass(self.ones & ~accepted)

    def literal_mask(self, var: int, polarity: int) -> int:
        return self.var_masks[var] if polarity else self.full & ~self.var_masks[var]

    def cap(self, bound: Fraction, strict: bool) -> int:
        """
        Largest integer weight w with w < bound (strict) or w <= bound, in units of the common denominator
        """
        scaled = Fraction(bound) * self.denominator
        return math.ceil(scaled) - 1 if strict else math.floor(scaled)


_Entry = Tuple[int, int, int, TreeNode]  # (abort weight, weighted depth, error weight, subtree)


def _prune(entries: List[_Entry]) -> List[_Entry]:
    """
    Pareto frontier over (abort, cost, error). Among equal triples the earliest generated entry survives.
    """
    kept: List[_Entry] = []
    for entry in sorted(entries, key=lambda e: e[:3]):
        if not any(k[0] <= entry[0] and k[1] <= entry[1] and k[2] <= entry[2] for k in kept):
            kept.append(entry)
    return kept


class _TreeSearch:
    """
    Memoized search over the atom sets reachable by restrictions. Budget modes: "depth" (remaining depth),
    "size" (remaining leaves) and "free" (no budget, weighted depth tracked instead).
    """

    def __init__(self, table: AtomTable, mode: str, abort_cap: Optional[int] = None,
                 cost_cap: Optional[int] = None) -> None:
        self.table = table
        self.mode = mode
        self.abort_cap = abort_cap
        self.cost_cap = cost_cap  # Weighted depth must stay strictly below this
        self._memo: Dict[Tuple[int, int], List[_Entry]] = {}

    def _leaves(self, mask: int) -> List[_Entry]:
        weight = self.table.mass(mask)
        error_zero = self.table.mass(mask & self.table.ones)
        entries = [(0, 0, error_zero, Leaf(0)), (0, 0, weight - error_zero, Leaf(1))]
        if self.abort_cap is not None and weight <= self.abort_cap:
            entries.append((weight, 0, 0, Leaf(None)))
        return entries

    def _budget_splits(self, budget: int) -> List[Tuple[int, int]]:
        if self.mode == "depth":
            return [(budget - 1, budget - 1)] if budget > 0 else []
        if self.mode == "size":
            return [(left, budget - left) for left in range(1, budget)]
        return [(0, 0)]

    def frontier(self, mask: int, budget: int = 0) -> List[_Entry]:
        key = (mask, budget)
        if key in self._memo:
            return self._memo[key]
        entries = self._leaves(mask)
        if min(entries[0][2], entries[1][2]) > 0:
            weight = self.table.mass(mask)
            for var in range(self.table.num_vars):
                hi = mask & self.table.var_masks[var]
                lo = mask & ~self.table.var_masks[var]
                if not hi or not lo:
                    continue
                for budget_lo, budget_hi in self._budget_splits(budget):
                    for a0, c0, e0, t0 in self.frontier(lo, budget_lo):
                        for a1, c1, e1, t1 in self.frontier(hi, budget_hi):
                            abort = a0 + a1
                            if self.abort_cap is not None and abort > self.abort_cap:
                                continue
                            cost = c0 + c1 + weight if self.mode == "free" else 0
                            if self.cost_cap is not None and cost >= self.cost_cap:
                                continue
                            entries.append((abort, cost, e0 + e1, Node(var, t0, t1)))
        result = _prune(entries)
        self._memo[key] = result
        return result

    def best(self, budget: int = 0) -> Optional[_Entry]:
        """
        Least error at the root, then least abort mass, then least cost
        """
        frontier = self.frontier(self.table.full, budget)
        if self.cost_cap is not None:
            frontier = [e for e in frontier if e[1] < self.cost_cap]
        if not frontier:
            return None
        return min(frontier, key=lambda e: (e[2], e[0], e[1]))


def _abort_cap(table: AtomTable, allow_abort: Optional[Fraction], abort_strict: bool) -> Optional[int]:
    if allow_abort is None:
        return None
    if allow_abort < 0:
        raise DomainError(f"Abort budget must be non-negative, got {allow_abort}")
    return table.cap(allow_abort, abort_strict)


def _check_tree_vars(table: AtomTable, limit: int, name: str) -> None:
    if table.num_vars > limit:
        raise GuardExceeded(f"Tree search over {table.num_vars} variables exceeds guard {name}={limit}")


def opt_tree_dp(f: PartialFunction, dist: Distribution, depth_budget: int, allow_abort: Optional[Fraction] = None,
                abort_strict: bool = False, guards: Guards = DEFAULT_GUARDS) -> Tuple[DecisionTree, Fraction]:
    """
    Exact minimum of dist_exact over all trees of depth at most depth_budget. Leaves beat splits on ties, label 0
    beats label 1 and lower variables beat higher ones, so the witness is deterministic.

    :param f: Target function, defined on every atom
    :param dist: Distribution
    :param depth_budget: Largest allowed depth
    :param allow_abort: Largest abort mass the tree may have, or None for trees without abort leaves
    :param abort_strict: Require abort mass strictly below allow_abort
    :param guards: tree_dp_max_vars and tree_dp_max_depth
    :return: An optimal tree and its error
    """
    if depth_budget < 0:
        raise DomainError(f"Depth budget must be non-negative, got {depth_budget}")
    if depth_budget > guards.tree_dp_max_depth:
        raise GuardExceeded(f"Depth budget {depth_budget} exceeds guard tree_dp_max_depth={guards.tree_dp_max_depth}")
    table = AtomTable(f, dist)
    _check_tree_vars(table, guards.tree_dp_max_vars, "tree_dp_max_vars")
    search = _TreeSearch(table, "depth", abort_cap=_abort_cap(table, allow_abort, abort_strict))
    _, _, error, root = search.best(depth_budget)
    return DecisionTree(root, table.num_vars), table.fraction(error)


def opt_tree_size_dp(f: PartialFunction, dist: Distribution, size_budget: int,
                     allow_abort: Optional[Fraction] = None, abort_strict: bool = False,
                     guards: Guards = DEFAULT_GUARDS) -> Tuple[DecisionTree, Fraction]:
    """
    Exact minimum of dist_exact over all trees with at most size_budget leaves
    """
    if size_budget < 1:
        raise DomainError(f"Size budget must be at least 1, got {size_budget}")
    if size_budget > guards.tree_dp_max_size:
        raise GuardExceeded(f"Size budget {size_budget} exceeds guard tree_dp_max_size={guards.tree_dp_max_size}")
    table = AtomTable(f, dist)
    _check_tree_vars(table, guards.tree_dp_max_vars, "tree_dp_max_vars")
    search = _TreeSearch(table, "size", abort_cap=_abort_cap(table, allow_abort, abort_strict))
    _, _, error, root = search.best(size_budget)
    return DecisionTree(root, table.num_vars), table.fraction(error)


def min_error_with_avg_depth(f: PartialFunction, dist: Distribution, bound: Fraction,
                             allow_abort: Optional[Fraction] = None, abort_strict: bool = False,
                             strict: bool = True, guards: Guards = DEFAULT_GUARDS) \
        -> Tuple[Optional[DecisionTree], Optional[Fraction]]:
    """
    Exact minimum of dist_exact over all trees whose average depth under dist is below bound (at most bound when
    strict is False), optionally with an abort budget

    :return: An optimal tree and its error, or (None, None) when no tree meets the bound
    """
    table = AtomTable(f, dist)
    _check_tree_vars(table, guards.frontier_max_vars, "frontier_max_vars")
    cost_cap = table.cap(bound, strict) + 1
    if cost_cap <= 0:
        return None, None
    search = _TreeSearch(table, "free", abort_cap=_abort_cap(table, allow_abort, abort_strict), cost_cap=cost_cap)
    best = search.best()
    if best is None:
        return None, None
    return DecisionTree(best[3], table.num_vars), table.fraction(best[2])


def _check_dnf_vars(table: AtomTable, guards: Guards) -> None:
    if table.num_vars > guards.dnf_max_vars:
        raise GuardExceeded(f"DNF search over {table.num_vars} variables exceeds guard dnf_max_vars="
                            f"{guards.dnf_max_vars}")


def min_dist_dnf(f: PartialFunction, dist: Distribution, max_terms: int, max_width: int,
                 guards: Guards = DEFAULT_GUARDS) -> Tuple[DnfFormula, Fraction]:
    """
    Exact minimum of dist_exact over all DNFs with at most max_terms terms of width at most max_width. Terms are
    enumerated by width, then variables, then polarities; terms accepting the same atoms as an earlier term are
    skipped, and term sets are tried in combination order, so the witness is deterministic.

    :param f: Target function
    :param dist: Distribution
    :param max_terms: Largest number of terms
    :param max_width: Largest term width (clamped to the number of variables)
    :param guards: dnf_max_vars, dnf_max_terms and dnf_max_combinations
    :return: An optimal DNF and its error
    """
    if max_terms < 0 or max_width < 0:
        raise DomainError(f"Caps must be non-negative, got max_terms={max_terms}, max_width={max_width}")
    if max_terms > guards.dnf_max_terms:
        raise GuardExceeded(f"{max_terms} terms exceed guard dnf_max_terms={guards.dnf_max_terms}")
    table = AtomTable(f, dist)
    _check_dnf_vars(table, guards)
    max_width = min(max_width, table.num_vars)

    candidates: List[Tuple[int, Tuple[Tuple[int, int], ...]]] = []
    seen = {0}
    for width in range(max_width + 1):
        for variables in itertools.combinations(range(table.num_vars), width):
            for polarities in all_bitstrings(width):
                accepted = table.full
                for v, p in zip(variables, polarities):
                    accepted &= table.literal_mask(v, p)
                if accepted not in seen:
                    seen.add(accepted)
                    candidates.append((accepted, tuple(zip(variables, polarities))))

    combinations = sum(math.comb(len(candidates), r) for r in range(max_terms + 1))
    if combinations > guards.dnf_max_combinations:
        raise GuardExceeded(f"{combinations} term combinations exceed guard dnf_max_combinations="
                            f"{guards.dnf_max_combinations}")

    best_error, best_terms = table.error_of(0), ()
    for r in range(1, max_terms + 1):
        if best_error == 0:
            break
        for combo in itertools.combinations(range(len(candidates)), r):
            accepted = 0
            for c in combo:
                accepted |= candidates[c][0]
            error = table.error_of(accepted)
            if error < best_error:
                best_error, best_terms = error, combo
                if error == 0:
                    break
    formula = DnfFormula([candidates[c][1] for c in best_terms], table.num_vars)
    return formula, table.fraction(best_error)


def min_error_with_avg_width(f: PartialFunction, dist: Distribution, bound: Fraction, strict: bool = True,
                             guards: Guards = DEFAULT_GUARDS) -> Tuple[Optional[DnfFormula], Optional[Fraction]]:
    """
    Exact minimum of dist_exact over all DNFs whose average width under dist is below bound (at most bound when
    strict is False). For every set A of accepted atoms, each atom in A takes its narrowest sub-term that accepts
    no atom outside A, and the DNF of those terms has the least average width among DNFs accepting exactly A.

    :return: An optimal DNF and its error, or (None, None) when no DNF meets the bound
    """
    table = AtomTable(f, dist)
    _check_dnf_vars(table, guards)
    if 2 ** len(table) > guards.dnf_max_combinations:
        raise GuardExceeded(f"{2 ** len(table)} acceptance sets exceed guard dnf_max_combinations="
                            f"{guards.dnf_max_combinations}")
    cost_cap = table.cap(bound, strict)

    # Sub-terms of every atom ordered by width: (width, agreeing atoms, term)
    subterms = []
    for x in table.points:
        options = []
        for width in range(table.num_vars + 1):
            for variables in itertools.combinations(range(table.num_vars), width):
                agreeing = table.full
                for v in variables:
                    agreeing &= table.literal_mask(v, x[v])
                options.append((width, agreeing, tuple((v, x[v]) for v in variables)))
        subterms.append(options)

    best: Optional[Tuple[int, int, List[Tuple[Tuple[int, int], ...]]]] = None
    for accepted in range(table.full + 1):
        cost, terms = 0, []
        for a in mask_members(accepted):
            width, _, term = next(o for o in subterms[a] if o[1] & ~accepted == 0)
            cost += table.weights[a] * width
            if term not in terms:
                terms.append(term)
        if cost > cost_cap:
            continue
        error = table.error_of(accepted)
        if best is None or (error, cost) < best[:2]:
            best = (error, cost, terms)
    if best is None:
        return None, None
    return DnfFormula(best[2], table.num_vars), table.fraction(best[0])


@dataclasses.dataclass
class RestrictionResult:
    j: Optional[int]  # Completion position, None when the search failed before choosing one
    z: Optional[Bits]  # Fixed bits of the witness restriction
    hypothesis: Optional[Hypothesis]  # The restricted tree or DNF over the base variables
    report: OracleReport


def _candidate_restrictions(width: int, guards: Guards, seed: int) -> Iterator[Bits]:
    if width <= guards.restriction_max_z_bits:
        yield from all_bitstrings(width)
        return
    log.debug(f"Sampling {guards.restriction_samples} restrictions of {width} bits instead of enumerating them")
    rng = np.random.default_rng(seed)
    for _ in range(guards.restriction_samples):
        yield tuple(int(b) for b in rng.integers(0, 2, size=width))


def _search_restriction(h: Hypothesis, f_base: PartialFunction, dist_base: Distribution, ell: int,
                        claim_id: str, restrict: Callable, measure: Callable, eps: Fraction, size: Fraction,
                        factor: int, abort_bound: Optional[Fraction], seed: int, guards: Guards) \
        -> RestrictionResult:
    n = f_base.arity
    if h.num_vars != n * ell:
        raise DomainError(f"Hypothesis has {h.num_vars} variables, expected {n} blocks of {ell}")
    amp = AmplifiedDistribution(dist_base, ell, guards=guards)
    counts = expected_position_counts(h, amp, (n, ell))
    j = min(range(ell), key=lambda p: counts[p]) + 1
    error_bound = factor * Fraction(eps)
    size_bound = factor * Fraction(size) / ell
    parameters = {"j": j, "ell": ell, "eps": str(eps), "size": str(size),
                  "expected_position_counts": [str(c) for c in counts]}
    if abort_bound is not None:
        parameters["abort_bound"] = str(abort_bound)

    for z in _candidate_restrictions(n * (ell - 1), guards, seed):
        restricted = restrict(h, z, j)
        error = dist_exact(restricted, f_base, dist_base)
        if error > error_bound or measure(restricted, dist_base) > size_bound:
            continue
        if abort_bound is not None and abort_prob(restricted, dist_base) > abort_bound:
            continue
        parameters["z"] = bits_to_str(z)
        report = OracleReport(claim_id=claim_id, parameters=parameters, computed=error, threshold=error_bound,
                              relation="<=", verdict=True, witness=restricted.to_json())
        return RestrictionResult(j=j, z=z, hypothesis=restricted, report=report)

    log.warning(f"No restriction at position {j} keeps error <= {error_bound} and size <= {size_bound}")
    report = OracleReport(claim_id=claim_id, parameters=parameters, computed=None, threshold=error_bound,
                          relation="<=", verdict=False, witness=h.to_json(), details="search exhausted")
    return RestrictionResult(j=j, z=None, hypothesis=None, report=report)


def find_restriction(tree: DecisionTree, f_base: PartialFunction, dist_base: Distribution, ell: int,
                     eps: Fraction, d: Fraction, abort_delta: Optional[Fraction] = None, seed: int = DEFAULT_SEED,
                     guards: Guards = DEFAULT_GUARDS) -> RestrictionResult:
    """
    Turns a tree for the amplified function into one for the base function. Picks the position j that the tree
    queries least in expectation, then the first z in lexicographic order (seeded samples above the guard) whose
    restriction has error at most 2*eps and average depth at most 2d/ell. With an abort budget delta the bounds
    are 10*eps, 10d/ell and an abort probability of 5/4*delta.

    :param tree: Tree over n*ell variables with error eps and average depth d on the amplified pair
    :param f_base: The base function
    :param dist_base: The base distribution
    :param ell: Block length
    :param eps: Error of the tree
    :param d: Average depth of the tree
    :param abort_delta: Abort probability of the tree, or None for the plain variant
    :param seed: Seed for sampled restrictions
    :param guards: restriction_max_z_bits and restriction_samples
    :return: The position, fixed bits and restricted tree, with a report
    """
    if abort_delta is None:
        return _search_restriction(tree, f_base, dist_base, ell, "tree-restriction", restrict_tree, avg_depth,
                                   eps, d, TREE_RESTRICTION_FACTOR, None, seed, guards)
    return _search_restriction(tree, f_base, dist_base, ell, "tree-restriction-abort", restrict_tree, avg_depth,
                               eps, d, ABORT_RESTRICTION_FACTOR, ABORT_RESTRICTION_DELTA * Fraction(abort_delta),
                               seed, guards)


def find_dnf_restriction(formula: DnfFormula, f_base: PartialFunction, dist_base: Distribution, ell: int,
                         eps: Fraction, w: Fraction, seed: int = DEFAULT_SEED,
                         guards: Guards = DEFAULT_GUARDS) -> RestrictionResult:
    """
    DNF analogue of find_restriction: error at most 2*eps and average width at most 2w/ell
    """
    return _search_restriction(formula, f_base, dist_base, ell, "dnf-restriction", restrict_dnf, avg_width,
                               eps, w, TREE_RESTRICTION_FACTOR, None, seed, guards)


def _junta_table(codes: Sequence[int], labels: Sequence[int], k: int) -> Optional[Tuple[int, ...]]:
    table: Dict[int, int] = {}
    for code, label in zip(codes, labels):
        if table.setdefault(code, label) != label:
            return None
    return tuple(table.get(code, 0) for code in range(2 ** k))


def _check_junta_guards(num_vars: int, k: int, guards: Guards) -> None:
    if k < 0:
        raise DomainError(f"Junta size must be non-negative, got {k}")
    if num_vars > guards.junta_max_vars or k > guards.junta_max_k:
        raise GuardExceeded(f"Junta search over {num_vars} variables with k={k} exceeds guards "
                            f"junta_max_vars={guards.junta_max_vars}, junta_max_k={guards.junta_max_k}")


def junta_learner(f: PartialFunction, dist: Distribution, k: int, guards: Guards = DEFAULT_GUARDS) \
        -> Optional[JuntaHypothesis]:
    """
    Tries every k-subset of variables in lexicographic order and returns the first one on which f, restricted to
    the atoms of dist, is a function of the projection. Projections never seen get the value 0.

    :return: The relevant variables with their truth table, or None when f is not a k-junta on the support
    """
    _check_junta_guards(f.arity, k, guards)
    table = AtomTable(f, dist)
    for variables in itertools.combinations(range(f.arity), k):
        codes = [sum(x[v] << (k - 1 - i) for i, v in enumerate(variables)) for x in table.points]
        truth = _junta_table(codes, table.labels, k)
        if truth is not None:
            log.debug(f"{f.label} is a {k}-junta on variables {list(variables)}")
            return JuntaHypothesis(variables=variables, table=truth)
    return None


class ExampleOracle:
    """
    Labelled examples (y, f(y)) with y drawn through the generator from one seeded random stream
    """

    def __init__(self, f: PartialFunction, gen: GeneratorSpec, seed: int = DEFAULT_SEED) -> None:
        if gen.output_bits != f.arity:
            raise DomainError(f"Generator outputs {gen.output_bits} bits, function has arity {f.arity}")
        self.f = f
        self.gen = gen
        self._rng = np.random.default_rng(seed)
        self.drawn = 0

    def draw(self, count: int) -> Tuple[np.ndarray, np.ndarray]:
        """
        :param count: Number of examples
        :return: (count, arity) inputs and their labels
        """
        if count < 1:
            raise DomainError(f"Need at least one example, got {count}")
        xs = sample(self.gen, count, self._rng)
        self.drawn += count
        return xs, evaluate_function_batch(self.f, xs)


def learn_junta_from_examples(oracle: ExampleOracle, k: int, samples: int, guards: Guards = DEFAULT_GUARDS) \
        -> Optional[JuntaHypothesis]:
    """
    Proper k-junta learner: draws samples examples and returns the first k-subset in lexicographic order that is
    consistent with all of them
    """
    _check_junta_guards(oracle.f.arity, k, guards)
    xs, labels = oracle.draw(samples)
    weights = (1 << np.arange(k - 1, -1, -1)).astype(np.int64)
    for variables in itertools.combinations(range(oracle.f.arity), k):
        codes = xs[:, list(variables)].astype(np.int64) @ weights if k else np.zeros(len(xs), dtype=np.int64)
        pairs = np.unique(codes * 2 + labels)
        if len(np.unique(pairs >> 1)) != len(pairs):
            continue
        truth = [0] * (2 ** k)
        for pair in pairs:
            truth[int(pair) >> 1] = int(pair) & 1
        return JuntaHypothesis(variables=variables, table=tuple(truth))
    return None
