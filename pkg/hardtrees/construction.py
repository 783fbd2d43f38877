import abc
import itertools
import json
from fractions import Fraction
from typing import Dict, Iterable, Iterator, Optional, Sequence, Tuple

from hardtrees.bits import Bits, bits_from_str, bits_to_str
from hardtrees.config import Guards, DEFAULT_GUARDS
from hardtrees.errors import DomainError, GuardExceeded, InstanceError
from hardtrees.setcover import SetCoverInstance

PLAIN = "plain"
NEGATED = "negated"


class PartialFunction(abc.ABC):
    """
    A boolean function defined only on an explicit support. Evaluating it anywhere else is an error.
    """
    arity: int
    label: str

    @abc.abstractmethod
    def defined_at(self, x: Bits) -> bool:
        ...

    @abc.abstractmethod
    def evaluate(self, x: Bits) -> int:
        ...

    @abc.abstractmethod
    def support(self) -> Iterator[Bits]:
        ...

    def __call__(self, x: Bits) -> int:
        return self.evaluate(x)


class Distribution(abc.ABC):
    """
    A distribution over {0,1}^arity with exact rational probabilities
    """
    arity: int

    @abc.abstractmethod
    def pmf(self, x: Bits) -> Fraction:
        ...

    @abc.abstractmethod
    def atoms(self) -> Iterator[Tuple[Bits, Fraction]]:
        """
        Yields every (bitstring, probability) pair with positive probability in a fixed order
        """
        ...


def negated_label(label: str) -> str:
    if label == NEGATED:
        return PLAIN
    if label.startswith(NEGATED + "+"):
        return label[len(NEGATED) + 1:]
    if label == PLAIN:
        return NEGATED
    return f"{NEGATED}+{label}"


class PartialFunctionTable(PartialFunction):
    def __init__(self, arity: int, support: Sequence[Bits], values: Sequence[int], label: str = PLAIN) -> None:
        if len(support) != len(values):
            raise DomainError(f"{len(support)} support points but {len(values)} values")
        table: Dict[Bits, int] = {}
        for point, value in zip(support, values):
            point = tuple(point)
            if len(point) != arity:
                raise DomainError(f"Support point {bits_to_str(point)} does not have arity {arity}")
            if value not in (0, 1):
                raise DomainError(f"Value {value!r} at {bits_to_str(point)} is not a bit")
            if point in table:
                raise DomainError(f"Support point {bits_to_str(point)} listed twice")
            table[point] = value
        self.arity = arity
        self.label = label
        self._table = table

    @property
    def points(self) -> Tuple[Bits, ...]:
        return tuple(self._table)

    @property
    def values(self) -> Tuple[int, ...]:
        return tuple(self._table.values())

    def defined_at(self, x: Bits) -> bool:
        return tuple(x) in self._table

    def evaluate(self, x: Bits) -> int:
        try:
            return self._table[tuple(x)]
        except KeyError:
            raise DomainError(f"{self.label} function is not defined at {bits_to_str(x)}")

    def support(self) -> Iterator[Bits]:
        return iter(self._table)

    def with_flipped(self, point: Bits) -> "PartialFunctionTable":
        """
        Label-flip mutant: the same table with the value at one support point negated
        """
        point = tuple(point)
        if point not in self._table:
            raise DomainError(f"Cannot flip {bits_to_str(point)}: not in the support")
        values = [1 - v if p == point else v for p, v in self._table.items()]
        return PartialFunctionTable(self.arity, self.points, values, f"{self.label}+flipped")

    def to_json(self) -> str:
        return json.dumps([[bits_to_str(p), v] for p, v in self._table.items()])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PartialFunctionTable):
            return NotImplemented
        return self.arity == other.arity and self.label == other.label and self._table == other._table

    def __repr__(self) -> str:
        return f"PartialFunctionTable(arity={self.arity}, label={self.label!r}, support={len(self._table)})"


class ExplicitDistribution(Distribution):
    def __init__(self, arity: int, atoms: Iterable[Tuple[Bits, Fraction]]) -> None:
        pmf: Dict[Bits, Fraction] = {}
        for point, probability in atoms:
            point = tuple(point)
            if len(point) != arity:
                raise DomainError(f"Atom {bits_to_str(point)} does not have arity {arity}")
            if probability <= 0:
                raise DomainError(f"Atom {bits_to_str(point)} has non-positive probability {probability}")
            if point in pmf:
                raise DomainError(f"Atom {bits_to_str(point)} listed twice")
            pmf[point] = Fraction(probability)
        total = sum(pmf.values(), Fraction(0))
        if total != 1:
            raise DomainError(f"Atom probabilities sum to {total}, not 1")
        self.arity = arity
        self._pmf = pmf

    def pmf(self, x: Bits) -> Fraction:
        return self._pmf.get(tuple(x), Fraction(0))

    def atoms(self) -> Iterator[Tuple[Bits, Fraction]]:
        return iter(self._pmf.items())

    def to_json(self) -> str:
        return json.dumps([[bits_to_str(p), str(q)] for p, q in self._pmf.items()])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ExplicitDistribution):
            return NotImplemented
        return self.arity == other.arity and self._pmf == other._pmf

    def __repr__(self) -> str:
        return f"ExplicitDistribution(arity={self.arity}, atoms={len(self._pmf)})"


def _encodings(inst: SetCoverInstance) -> Tuple[Bits, ...]:
    zero = (0,) * inst.n
    for u, bits in zip(inst.universe, inst.neighbourhoods):
        if bits == zero:
            raise InstanceError(f"Element '{u}' encodes to the all-zeros string")
    return inst.neighbourhoods


def build_gamma(inst: SetCoverInstance) -> PartialFunctionTable:
    """
    The base function: 0 at the all-zeros string and 1 at the neighbourhood encoding of every element
    """
    encodings = _encodings(inst)
    support = [(0,) * inst.n] + list(encodings)
    return PartialFunctionTable(inst.n, support, [0] + [1] * len(encodings))


def build_dist(inst: SetCoverInstance) -> ExplicitDistribution:
    """
    Half the mass on the all-zeros string, the other half spread evenly over the element encodings
    """
    encodings = _encodings(inst)
    element_mass = Fraction(1, 2 * len(encodings))
    return ExplicitDistribution(inst.n, [((0,) * inst.n, Fraction(1, 2))] + [(e, element_mass) for e in encodings])


def negate(function: PartialFunction) -> PartialFunction:
    """
    Flips every value while keeping the support. Negating twice gives back an equal function.
    """
    if isinstance(function, PartialFunctionTable):
        return PartialFunctionTable(function.arity, function.points, [1 - v for v in function.values],
                                    negated_label(function.label))
    negator = getattr(function, "negated", None)
    if negator is None:
        raise DomainError(f"Cannot negate a {type(function).__name__}")
    return negator()


def disjunction_consistency(inst: SetCoverInstance, cover: Iterable[str]) -> bool:
    """
    :return: Whether the monotone disjunction of the variables in cover agrees with the base function
    """
    chosen = inst.set_indices(cover)
    gamma = build_gamma(inst)
    return all(int(any(x[i] for i in chosen)) == gamma.evaluate(x) for x in gamma.support())


def conjunction_consistency(inst: SetCoverInstance, cover: Iterable[str]) -> bool:
    """
    :return: Whether the conjunction of the negated variables in cover agrees with the negated base function
    """
    chosen = inst.set_indices(cover)
    gamma_bar = negate(build_gamma(inst))
    return all(int(all(not x[i] for i in chosen)) == gamma_bar.evaluate(x) for x in gamma_bar.support())


def function_from_json(text: str, label: str = PLAIN) -> PartialFunctionTable:
    rows = json.loads(text)
    points = [bits_from_str(p) for p, _ in rows]
    if not points:
        raise DomainError("Function table is empty")
    return PartialFunctionTable(len(points[0]), points, [v for _, v in rows], label)


def distribution_from_json(text: str) -> ExplicitDistribution:
    rows = json.loads(text)
    atoms = [(bits_from_str(p), Fraction(q)) for p, q in rows]
    if not atoms:
        raise DomainError("Distribution is empty")
    return ExplicitDistribution(len(atoms[0][0]), atoms)


def support_mass_check(function: PartialFunction, dist: Distribution) -> Optional[Bits]:
    """
    :return: The first atom of dist outside the function's support, or None when all atoms are covered
    """
    for x, _ in dist.atoms():
        if not function.defined_at(x):
            return x
    return None


class ProductDistribution(Distribution):
    """
    m independent copies of a distribution, concatenated
    """

    def __init__(self, base: Distribution, m: int, guards: Guards = DEFAULT_GUARDS) -> None:
        if m < 1:
            raise DomainError(f"Product needs at least one copy, got {m}")
        self.base = base
        self.m = m
        self.arity = base.arity * m
        self._guards = guards
        self._atoms: Optional[list] = None

    def pmf(self, y: Bits) -> Fraction:
        if len(y) != self.arity:
            raise DomainError(f"Expected {self.arity} bits, got {len(y)}")
        k = self.base.arity
        probability = Fraction(1)
        for c in range(self.m):
            probability *= self.base.pmf(tuple(y[c * k:(c + 1) * k]))
            if probability == 0:
                break
        return probability

    def atoms(self) -> Iterator[Tuple[Bits, Fraction]]:
        if self._atoms is None:
            base_atoms = list(self.base.atoms())
            count = len(base_atoms) ** self.m
            if count > self._guards.product_max_atoms:
                raise GuardExceeded(f"Product support has {count} atoms, guard is {self._guards.product_max_atoms}")
            atoms = []
            for combo in itertools.product(base_atoms, repeat=self.m):
                point: Tuple[int, ...] = ()
                probability = Fraction(1)
                for x, p in combo:
                    point += tuple(x)
                    probability *= p
                atoms.append((point, probability))
            self._atoms = atoms
        return iter(self._atoms)
