import dataclasses
import math
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from hardtrees.bits import Bits, all_bitstrings, bits_to_str, parity
from hardtrees.constants import ABORT_LABEL, MC_DELTA
from hardtrees.construction import Distribution
from hardtrees.errors import DomainError
from hardtrees.parity import GeneratorSpec, sample
from hardtrees.setcover import SetCoverInstance
from hardtrees.types import Label, MonteCarloEstimate, TraceResult

ABORT: Label = None
ABORT_CODE = -1  # Abort marker in batch evaluation arrays

Literal = Tuple[int, int]  # (variable, polarity); polarity 1 reads x_v, polarity 0 reads not x_v


@dataclasses.dataclass(frozen=True)
class Leaf:
    label: Label


@dataclasses.dataclass(frozen=True)
class Node:
    var: int
    lo: "TreeNode"
    hi: "TreeNode"


TreeNode = Union[Leaf, Node]


def _reduce(node: TreeNode, fixed: Dict[int, int]) -> TreeNode:
    if isinstance(node, Leaf):
        return node
    if node.var in fixed:
        return _reduce(node.hi if fixed[node.var] else node.lo, fixed)
    return Node(node.var, _reduce(node.lo, {**fixed, node.var: 0}), _reduce(node.hi, {**fixed, node.var: 1}))


class DecisionTree:
    """
    Binary decision tree over num_vars variables with leaves labelled 0, 1 or abort (None). Repeated queries of a
    variable on one path are contracted away at construction.
    """

    def __init__(self, root: TreeNode, num_vars: int) -> None:
        self._check(root, num_vars)
        self.root = _reduce(root, {})
        self.num_vars = num_vars

    @staticmethod
    def _check(node: TreeNode, num_vars: int) -> None:
        stack = [node]
        while stack:
            current = stack.pop()
            if isinstance(current, Leaf):
                if current.label not in (0, 1, ABORT):
                    raise DomainError(f"Leaf label {current.label!r} is not 0, 1 or abort")
                continue
            if not 0 <= current.var < num_vars:
                raise DomainError(f"Tree queries variable {current.var} outside 0..{num_vars - 1}")
            stack += [current.lo, current.hi]

    @property
    def size(self) -> int:
        return sum(1 for _ in self.leaf_paths())

    @property
    def depth(self) -> int:
        return max(len(path) for path, _ in self.leaf_paths())

    def leaf_paths(self) -> List[Tuple[Tuple[Tuple[int, int], ...], Label]]:
        """
        Every leaf as its (variable, value) path from the root and its label, lo branches first
        """
        paths = []
        stack: List[Tuple[TreeNode, Tuple[Tuple[int, int], ...]]] = [(self.root, ())]
        while stack:
            node, path = stack.pop()
            if isinstance(node, Leaf):
                paths.append((path, node.label))
            else:
                stack.append((node.hi, path + ((node.var, 1),)))
                stack.append((node.lo, path + ((node.var, 0),)))
        return paths

    def evaluate(self, x: Sequence[int]) -> Label:
        return dt_trace(self, x).label

    def evaluate_batch(self, xs: np.ndarray) -> np.ndarray:
        """
        Labels for every row of a (k, num_vars) array, with ABORT_CODE for aborts
        """
        xs = np.asarray(xs)
        out = np.full(len(xs), ABORT_CODE, dtype=np.int8)
        stack = [(self.root, np.arange(len(xs)))]
        while stack:
            node, rows = stack.pop()
            if not rows.size:
                continue
            if isinstance(node, Leaf):
                out[rows] = ABORT_CODE if node.label is ABORT else node.label
                continue
            column = xs[rows, node.var]
            stack.append((node.lo, rows[column == 0]))
            stack.append((node.hi, rows[column == 1]))
        return out

    def to_json(self) -> dict:
        def _node(node: TreeNode) -> dict:
            if isinstance(node, Leaf):
                return {"leaf": ABORT_LABEL if node.label is ABORT else node.label}
            return {"var": node.var, "lo": _node(node.lo), "hi": _node(node.hi)}

        return {"kind": "tree", "num_vars": self.num_vars, "root": _node(self.root)}

    @staticmethod
    def from_json(document: dict) -> "DecisionTree":
        def _node(item: dict) -> TreeNode:
            if "leaf" in item:
                label = item["leaf"]
                return Leaf(ABORT if label == ABORT_LABEL else label)
            return Node(item["var"], _node(item["lo"]), _node(item["hi"]))

        return DecisionTree(_node(document["root"]), document["num_vars"])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DecisionTree):
            return NotImplemented
        return self.num_vars == other.num_vars and self.root == other.root

    def __repr__(self) -> str:
        return f"DecisionTree(num_vars={self.num_vars}, size={self.size})"


class DnfFormula:
    """
    Disjunction of terms, each a conjunction of signed literals. The empty formula is constant 0 and an empty term
    accepts everything.
    """

    def __init__(self, terms: Iterable[Iterable[Literal]], num_vars: int) -> None:
        checked = []
        for term in terms:
            term = tuple((int(v), int(p)) for v, p in term)
            variables = [v for v, _ in term]
            if len(set(variables)) != len(variables):
                raise DomainError(f"Term {term} mentions a variable twice")
            for v, p in term:
                if not 0 <= v < num_vars or p not in (0, 1):
                    raise DomainError(f"Literal ({v}, {p}) is not valid over {num_vars} variables")
            checked.append(term)
        self.terms: Tuple[Tuple[Literal, ...], ...] = tuple(checked)
        self.num_vars = num_vars

    @property
    def size(self) -> int:
        return len(self.terms)

    @property
    def width(self) -> int:
        return max((len(t) for t in self.terms), default=0)

    def evaluate(self, x: Sequence[int]) -> int:
        return dnf_trace(self, x).label

    def evaluate_batch(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs)
        out = np.zeros(len(xs), dtype=np.int8)
        for term in self.terms:
            if not term:
                out[:] = 1
                break
            variables = [v for v, _ in term]
            polarities = np.array([p for _, p in term], dtype=xs.dtype)
            out |= np.all(xs[:, variables] == polarities, axis=1)
        return out

    def to_json(self) -> dict:
        return {"kind": "dnf", "num_vars": self.num_vars,
                "terms": [[v + 1 if p else -(v + 1) for v, p in term] for term in self.terms]}

    @staticmethod
    def from_json(document: dict) -> "DnfFormula":
        terms = []
        for term in document["terms"]:
            if any(literal == 0 for literal in term):
                raise DomainError("Signed literal 0 is not allowed; variables are numbered from 1")
            terms.append([(abs(literal) - 1, 1 if literal > 0 else 0) for literal in term])
        return DnfFormula(terms, document["num_vars"])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DnfFormula):
            return NotImplemented
        return self.num_vars == other.num_vars and self.terms == other.terms

    def __repr__(self) -> str:
        return f"DnfFormula(num_vars={self.num_vars}, size={self.size}, width={self.width})"


Hypothesis = Union[DecisionTree, DnfFormula]


def hypothesis_from_json(document: dict) -> Hypothesis:
    kind = document.get("kind")
    if kind == "tree":
        return DecisionTree.from_json(document)
    if kind == "dnf":
        return DnfFormula.from_json(document)
    raise DomainError(f"Unknown hypothesis kind {kind!r}")


def _position_counter(block_shape: Optional[Tuple[int, int]], num_vars: int) -> Optional[List[int]]:
    if block_shape is None:
        return None
    n, ell = block_shape
    if n * ell != num_vars:
        raise DomainError(f"Block shape {n}x{ell} does not match {num_vars} variables")
    return [0] * ell


def dt_trace(tree: DecisionTree, y: Sequence[int], block_shape: Optional[Tuple[int, int]] = None) -> TraceResult:
    """
    Follows y down the tree

    :param tree: The tree
    :param y: Input of length tree.num_vars
    :param block_shape: Optional (n, ell); when given, counts the queries of each in-block position
    :return: The reached label, the path length and the per-position query counts
    """
    if len(y) != tree.num_vars:
        raise DomainError(f"Tree has {tree.num_vars} variables, input has {len(y)} bits")
    counts = _position_counter(block_shape, tree.num_vars)
    node, depth = tree.root, 0
    while isinstance(node, Node):
        if counts is not None:
            counts[node.var % block_shape[1]] += 1
        depth += 1
        node = node.hi if y[node.var] else node.lo
    return TraceResult(label=node.label, size=depth, per_position_counts=tuple(counts or ()))


def dnf_trace(formula: DnfFormula, y: Sequence[int], block_shape: Optional[Tuple[int, int]] = None) -> TraceResult:
    """
    Evaluates the formula and finds its minimal accepting term (lowest term index among the narrowest)

    :param formula: The DNF
    :param y: Input of length formula.num_vars
    :param block_shape: Optional (n, ell); when given, counts the literals of the minimal term per position
    :return: The value, the width of the minimal accepting term (0 on rejects) and the per-position counts
    """
    if len(y) != formula.num_vars:
        raise DomainError(f"Formula has {formula.num_vars} variables, input has {len(y)} bits")
    counts = _position_counter(block_shape, formula.num_vars)
    best: Optional[Tuple[Literal, ...]] = None
    for term in formula.terms:
        if (best is None or len(term) < len(best)) and all(y[v] == p for v, p in term):
            best = term
    if best is None:
        return TraceResult(label=0, size=0, per_position_counts=tuple(counts or ()))
    if counts is not None:
        for v, _ in best:
            counts[v % block_shape[1]] += 1
    return TraceResult(label=1, size=len(best), per_position_counts=tuple(counts or ()))


def dist_exact(h, f, dist: Distribution) -> Fraction:
    """
    Pr[h(x) != f(x) and h(x) is not an abort] under dist. Aborted mass never counts as an error.

    :param h: A hypothesis or function
    :param f: The target, usually a partial function; every atom must lie in its support
    :param dist: The distribution
    :return: The exact distance
    """
    defined_at = getattr(f, "defined_at", None)
    distance = Fraction(0)
    for x, p in dist.atoms():
        if defined_at is not None and not defined_at(x):
            raise DomainError(f"Atom {bits_to_str(x)} lies outside the target's support")
        value = h.evaluate(x)
        if value is not ABORT and value != f.evaluate(x):
            distance += p
    return distance


def evaluate_function_batch(f, xs: np.ndarray) -> np.ndarray:
    """
    Evaluates a partial function on every row, once per distinct row
    """
    rows, inverse = np.unique(np.asarray(xs), axis=0, return_inverse=True)
    values = np.array([f.evaluate(tuple(int(b) for b in row)) for row in rows], dtype=np.int8)
    return values[inverse.reshape(-1)]


def dist_mc(h: Hypothesis, f, gen: GeneratorSpec, samples: int, seed: int, delta: float = MC_DELTA) \
        -> MonteCarloEstimate:
    """
    Estimates dist_exact(h, f, D) from generator samples. The estimate counts non-abort disagreements over all
    samples and lies within the returned radius of the exact distance with probability at least 1 - delta.

    :param h: The hypothesis
    :param f: The target function
    :param gen: Generator of the distribution
    :param samples: Number of samples, at least 1
    :param seed: Seed of the sampling stream
    :param delta: Failure probability of the radius
    :return: The estimate with its Hoeffding radius
    """
    if samples < 1:
        raise DomainError(f"Need at least one sample, got {samples}")
    if gen.output_bits != f.arity or h.num_vars != f.arity:
        raise DomainError(f"Arity mismatch: generator {gen.output_bits}, target {f.arity}, "
                          f"hypothesis {h.num_vars}")
    rng = np.random.default_rng(seed)
    ys = sample(gen, samples, rng)
    predictions = h.evaluate_batch(ys)
    truth = evaluate_function_batch(f, ys)
    aborted = predictions == ABORT_CODE
    disagreements = int(np.count_nonzero(~aborted & (predictions != truth)))
    radius = math.sqrt(math.log(2 / delta) / (2 * samples))
    return MonteCarloEstimate(estimate=disagreements / samples, radius=radius, delta=delta, samples=samples,
                              aborts=int(np.count_nonzero(aborted)))


def avg_depth(tree: DecisionTree, dist: Distribution) -> Fraction:
    return sum((p * dt_trace(tree, x).size for x, p in dist.atoms()), Fraction(0))


def avg_width(formula: DnfFormula, dist: Distribution) -> Fraction:
    return sum((p * dnf_trace(formula, x).size for x, p in dist.atoms()), Fraction(0))


def abort_prob(tree: DecisionTree, dist: Distribution) -> Fraction:
    return sum((p for x, p in dist.atoms() if dt_trace(tree, x).label is ABORT), Fraction(0))


def expected_position_counts(h: Hypothesis, dist: Distribution, block_shape: Tuple[int, int]) -> Tuple[Fraction, ...]:
    """
    E[q_j] for every position j: expected queries (or minimal-term literals) at in-block position j
    """
    trace = dt_trace if isinstance(h, DecisionTree) else dnf_trace
    totals = [Fraction(0)] * block_shape[1]
    for y, p in dist.atoms():
        for j, count in enumerate(trace(h, y, block_shape).per_position_counts):
            totals[j] += p * count
    return tuple(totals)


def _restriction_shape(num_vars: int, z: Sequence[int], j: int) -> Tuple[int, int]:
    n = num_vars - len(z)
    if n <= 0 or num_vars % n:
        raise DomainError(f"{len(z)} fixed bits do not fit a block structure over {num_vars} variables")
    ell = num_vars // n
    if len(z) != n * (ell - 1) or not 1 <= j <= ell:
        raise DomainError(f"Restriction position {j} or {len(z)} fixed bits do not match {n} blocks of {ell}")
    return n, ell


def _fixed_value(z: Sequence[int], var: int, j: int, ell: int) -> int:
    block, position = divmod(var, ell)
    offset = position if position + 1 < j else position - 1
    return z[block * (ell - 1) + offset]


def restrict_tree(tree: DecisionTree, z: Sequence[int], j: int) -> DecisionTree:
    """
    The tree computing x -> T(ParComplete_j(z, x)). Queries at positions other than j are answered by z; a query
    at position j of block i becomes a query of x_i, with its children swapped when z_i has odd parity.

    :param tree: Tree over n*ell variables
    :param z: The n*(ell-1) fixed bits
    :param j: The completion position
    :return: The restricted tree over n variables
    """
    n, ell = _restriction_shape(tree.num_vars, z, j)
    block_parities = [parity(z[i * (ell - 1):(i + 1) * (ell - 1)]) for i in range(n)]

    def _restrict(node: TreeNode) -> TreeNode:
        if isinstance(node, Leaf):
            return node
        block, position = divmod(node.var, ell)
        if position + 1 != j:
            return _restrict(node.hi if _fixed_value(z, node.var, j, ell) else node.lo)
        lo, hi = _restrict(node.lo), _restrict(node.hi)
        return Node(block, hi, lo) if block_parities[block] else Node(block, lo, hi)

    return DecisionTree(_restrict(tree.root), n)


def restrict_dnf(formula: DnfFormula, z: Sequence[int], j: int) -> DnfFormula:
    """
    The DNF computing x -> F(ParComplete_j(z, x)). Literals at positions other than j are evaluated on z: true
    literals are dropped and terms with a false literal are removed. Literals at position j become literals of
    x_i, with their polarity flipped when z_i has odd parity.
    """
    n, ell = _restriction_shape(formula.num_vars, z, j)
    block_parities = [parity(z[i * (ell - 1):(i + 1) * (ell - 1)]) for i in range(n)]
    terms = []
    for term in formula.terms:
        restricted = []
        for v, p in term:
            block, position = divmod(v, ell)
            if position + 1 == j:
                restricted.append((block, p ^ block_parities[block]))
            elif _fixed_value(z, v, j, ell) != p:
                break
        else:
            terms.append(restricted)
    return DnfFormula(terms, n)


def constant_tree(label: Label, num_vars: int) -> DecisionTree:
    return DecisionTree(Leaf(label), num_vars)


def junta_tree(inst: SetCoverInstance, cover: Iterable[str], ell: int, negated: bool = False) -> DecisionTree:
    """
    Tree for the amplified function that reads the blocks of a cover one after the other and stops at the first
    block of odd parity. It depends only on the |cover|*ell variables of those blocks.
    """
    blocks = inst.set_indices(cover)
    flip = 1 if negated else 0

    def _build(k: int, position: int, odd: int) -> TreeNode:
        if position == ell:
            if odd:
                return Leaf(1 ^ flip)
            k, position = k + 1, 0
        if k == len(blocks):
            return Leaf(flip)
        var = blocks[k] * ell + position
        return Node(var, _build(k, position + 1, odd), _build(k, position + 1, odd ^ 1))

    return DecisionTree(_build(0, 0, 0), inst.n * ell)


def cover_dnf(inst: SetCoverInstance, cover: Iterable[str], ell: int) -> DnfFormula:
    """
    DNF of the negated amplified function built from a cover: one term per choice of even-parity pattern for
    every cover block
    """
    blocks = inst.set_indices(cover)
    even_patterns = [p for p in all_bitstrings(ell) if parity(p) == 0]
    terms = [[(block * ell + position, value) for block, pattern in zip(blocks, choice)
              for position, value in enumerate(pattern)]
             for choice in _cartesian(even_patterns, len(blocks))]
    return DnfFormula(terms, inst.n * ell)


def _cartesian(options: Sequence[Bits], repeat: int) -> List[Tuple[Bits, ...]]:
    combos: List[Tuple[Bits, ...]] = [()]
    for _ in range(repeat):
        combos = [c + (o,) for c in combos for o in options]
    return combos


def random_tree(num_vars: int, size: int, rng: np.random.Generator, abort_rate: float = 0.0) -> DecisionTree:
    """
    Grows a tree by splitting uniformly chosen leaves on uniformly chosen unused variables until it has size leaves
    (or every leaf has used all variables), then labels the leaves at random

    :param num_vars: Number of variables
    :param size: Target number of leaves
    :param rng: Random stream
    :param abort_rate: Probability that a leaf is an abort leaf
    :return: The random tree
    """
    splits: Dict[Tuple[Tuple[int, int], ...], int] = {}
    leaves: List[Tuple[Tuple[int, int], ...]] = [()]
    while len(leaves) < size:
        open_leaves = [i for i, path in enumerate(leaves) if len(path) < num_vars]
        if not open_leaves:
            break
        path = leaves.pop(open_leaves[int(rng.integers(len(open_leaves)))])
        used = {v for v, _ in path}
        free = [v for v in range(num_vars) if v not in used]
        var = free[int(rng.integers(len(free)))]
        splits[path] = var
        leaves += [path + ((var, 0),), path + ((var, 1),)]

    def _build(path: Tuple[Tuple[int, int], ...]) -> TreeNode:
        if path in splits:
            var = splits[path]
            return Node(var, _build(path + ((var, 0),)), _build(path + ((var, 1),)))
        if abort_rate and rng.random() < abort_rate:
            return Leaf(ABORT)
        return Leaf(int(rng.integers(2)))

    return DecisionTree(_build(()), num_vars)


def random_dnf(num_vars: int, num_terms: int, rng: np.random.Generator, max_width: Optional[int] = None) \
        -> DnfFormula:
    """
    num_terms terms of uniform width in 1..max_width over distinct random variables with random polarities
    """
    max_width = num_vars if max_width is None else min(max_width, num_vars)
    terms = []
    for _ in range(num_terms):
        width = int(rng.integers(1, max_width + 1))
        variables = sorted(int(v) for v in rng.choice(num_vars, size=width, replace=False))
        terms.append([(v, int(rng.integers(2))) for v in variables])
    return DnfFormula(terms, num_vars)
