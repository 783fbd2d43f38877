import itertools
import math
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator, Tuple

from hardtrees.bits import Bits
from hardtrees.config import Guards, DEFAULT_GUARDS
from hardtrees.constants import ALPHA_TOLERANCE, CHAIN_BASE, DEFAULT_C1, DEFAULT_C2, FIRST_STAGE_ABORT, \
    FIRST_STAGE_FARNESS
from hardtrees.construction import Distribution, PartialFunction, ProductDistribution
from hardtrees.errors import DomainError, GuardExceeded
from hardtrees.hypotheses import DecisionTree, Leaf, Node, TreeNode, junta_tree
from hardtrees.logging import log
from hardtrees.setcover import SetCoverInstance
from hardtrees.types import XorParams


class XorComposedFunction(PartialFunction):
    """
    (y_1, ..., y_m) -> f(y_1) XOR ... XOR f(y_m) over m concatenated copies of the base arity
    """

    def __init__(self, base: PartialFunction, m: int) -> None:
        if m < 1:
            raise DomainError(f"XOR composition needs at least one copy, got {m}")
        self.base = base
        self.m = m
        self.arity = base.arity * m
        self.label = f"xor{m}({base.label})"

    def _chunks(self, y: Bits) -> Iterator[Bits]:
        if len(y) != self.arity:
            raise DomainError(f"Expected {self.arity} bits, got {len(y)}")
        k = self.base.arity
        return (tuple(y[c * k:(c + 1) * k]) for c in range(self.m))

    def defined_at(self, y: Bits) -> bool:
        return len(y) == self.arity and all(self.base.defined_at(chunk) for chunk in self._chunks(y))

    def evaluate(self, y: Bits) -> int:
        value = 0
        for chunk in self._chunks(y):
            value ^= self.base.evaluate(chunk)
        return value

    def support(self) -> Iterator[Bits]:
        for combo in itertools.product(list(self.base.support()), repeat=self.m):
            yield tuple(b for chunk in combo for b in chunk)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, XorComposedFunction):
            return NotImplemented
        return self.m == other.m and self.base == other.base


def xor_compose(f: PartialFunction, dist: Distribution, m: int, guards: Guards = DEFAULT_GUARDS) \
        -> Tuple[PartialFunction, Distribution]:
    """
    m-fold XOR composition of a function under the m-fold product of its distribution. A single copy returns the
    inputs unchanged.

    :param f: Base function
    :param dist: Base distribution
    :param m: Number of copies
    :param guards: product_max_atoms bounds the product support
    :return: The composed function and the product distribution
    """
    if m < 1:
        raise DomainError(f"XOR composition needs at least one copy, got {m}")
    if m == 1:
        return f, dist
    atoms = sum(1 for _ in dist.atoms()) ** m
    if atoms > guards.product_max_atoms:
        raise GuardExceeded(f"Product of {m} copies has {atoms} atoms, guard is {guards.product_max_atoms}")
    return XorComposedFunction(f, m), ProductDistribution(dist, m, guards)


def _alpha_residual(alpha: float) -> float:
    return 6 * alpha * math.log(2 / alpha) - 1


def solve_alpha(tolerance: float = ALPHA_TOLERANCE) -> float:
    """
    Solves 6*alpha*ln(2/alpha) = 1 by bisection. The left side increases on (0, 2/e), where the root lies.

    :param tolerance: Allowed absolute residual
    :return: The root, about 0.0435
    """
    lo, hi = 1e-12, 2 / math.e
    for _ in range(200):
        mid = (lo + hi) / 2
        residual = _alpha_residual(mid)
        if abs(residual) <= tolerance:
            return mid
        if residual < 0:
            lo = mid
        else:
            hi = mid
    raise DomainError(f"Bisection for alpha did not reach residual {tolerance}")


def drucker_bound(eps: float, alpha: float, m: int) -> float:
    """
    Distance from every depth-(alpha*eps*d*m) tree that the m-fold XOR of an eps-far function keeps:
    (1/2) * (1 - (1 - 2*eps + 6*alpha*ln(2/alpha)*eps)^m)
    """
    if not 0 < eps < 1:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    if not 0 < alpha <= 1:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    if m < 1:
        raise DomainError(f"m must be positive, got {m}")
    eps = float(eps)
    base = 1 - 2 * eps + 6 * alpha * math.log(2 / alpha) * eps
    return 0.5 * (1 - base ** m)


def _log2_exact(value: Fraction) -> Tuple[int, bool]:
    """
    :return: (ceil(log2(value)), whether value is an exact power of two)
    """
    if value.denominator == 1 and value.numerator & (value.numerator - 1) == 0:
        return value.numerator.bit_length() - 1, True
    return math.ceil(math.log2(value)), False


def amplification_params(eps: Fraction, gamma: Fraction, c1: int = DEFAULT_C1, c2: int = DEFAULT_C2,
                         delta_abort: Fraction = FIRST_STAGE_ABORT) -> XorParams:
    """
    Parameters of the two-stage XOR amplification: m1 = ceil(c1/eps) copies take an eps-far function to 1/800-far
    (recorded guarantee, abort budget at least 0.34), then m2 = ceil(c2*log2(1/gamma)) copies push the distance to
    within gamma of 1/2

    :param eps: Base far-ness, in (0, 1)
    :param gamma: Target slack below 1/2, in (0, 1/2)
    :param c1: Constant of the first stage
    :param c2: Constant of the second stage
    :param delta_abort: Abort budget of the first stage
    :return: The parameters
    """
    eps, gamma = Fraction(eps), Fraction(gamma)
    if not 0 < eps < 1:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    if not 0 < gamma < Fraction(1, 2):
        raise DomainError(f"gamma must lie in (0, 1/2), got {gamma}")
    if c1 < 1 or c2 < 1:
        raise DomainError(f"Constants must be at least 1, got c1={c1}, c2={c2}")
    if delta_abort < FIRST_STAGE_ABORT:
        log.warning(f"Abort budget {delta_abort} is below {FIRST_STAGE_ABORT}; the first-stage guarantee is not "
                    f"recorded for it")
    m1 = math.ceil(c1 / eps)
    log_inverse, exact = _log2_exact(1 / gamma)
    m2 = c2 * log_inverse if exact else math.ceil(c2 * math.log2(1 / gamma))
    return XorParams(eps=eps, gamma=gamma, delta_abort=Fraction(delta_abort), m1=m1, m2=m2, m=m1 * m2,
                     alpha=solve_alpha(), c1=c1, c2=c2, first_stage_farness=FIRST_STAGE_FARNESS,
                     first_stage_abort=FIRST_STAGE_ABORT)


def min_m2_for_gamma(gamma: Fraction) -> int:
    """
    Smallest m2 with (1/2)(1 - (799/800)^m2) >= 1/2 - gamma, i.e. (799/800)^m2 <= 2*gamma
    """
    gamma = Fraction(gamma)
    if not 0 < gamma < Fraction(1, 2):
        raise DomainError(f"gamma must lie in (0, 1/2), got {gamma}")
    m2 = max(1, math.ceil(math.log(2 * gamma) / math.log(CHAIN_BASE)))
    while CHAIN_BASE ** m2 > 2 * gamma:
        m2 += 1
    while m2 > 1 and CHAIN_BASE ** (m2 - 1) <= 2 * gamma:
        m2 -= 1
    return m2


def amplification_chain(params: XorParams) -> dict:
    """
    The recorded inequality chain of both stages, with the explicit second-stage numbers evaluated
    """
    chain_value = 0.5 * (1 - float(CHAIN_BASE) ** params.m2)
    bound_value = drucker_bound(params.first_stage_farness, params.alpha, params.m2)
    target = 0.5 - float(params.gamma)
    return {
        "first_stage": {
            "m1": params.m1,
            "c1": params.c1,
            "farness": str(params.first_stage_farness),
            "abort_budget": str(params.first_stage_abort),
            "kind": "recorded",
        },
        "second_stage": {
            "m2": params.m2,
            "c2": params.c2,
            "alpha": params.alpha,
            "bound_value": bound_value,
            "chain_value": chain_value,
            "target": target,
            "holds": chain_value >= target,
            "min_m2": min_m2_for_gamma(params.gamma),
        },
        "m": params.m,
    }


def xor_junta_tree(inst: SetCoverInstance, cover: Iterable[str], m: int, ell: int = 2) -> DecisionTree:
    """
    Yes-side tree for the m-fold XOR of the amplified function: runs the cover's junta tree on every copy in turn
    and carries the parity of the copies' outputs. Its depth is at most |cover| * ell * m.
    """
    if m < 1:
        raise DomainError(f"XOR composition needs at least one copy, got {m}")
    base = junta_tree(inst, cover, ell)
    width = base.num_vars

    def _shift(node: TreeNode, offset: int, carry: int, copy: int) -> TreeNode:
        if isinstance(node, Leaf):
            return _chain(copy + 1, carry ^ node.label)
        return Node(node.var + offset, _shift(node.lo, offset, carry, copy), _shift(node.hi, offset, carry, copy))

    @lru_cache(maxsize=None)
    def _chain(copy: int, carry: int) -> TreeNode:
        if copy == m:
            return Leaf(carry)
        return _shift(base.root, copy * width, carry, copy)

    return DecisionTree(_chain(0, 0), m * width)
