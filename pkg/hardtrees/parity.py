import dataclasses
import itertools
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from hardtrees.bits import Bits, all_bitstrings, bits_from_str, bits_to_str, ceil_log2, parity
from hardtrees.config import Guards, DEFAULT_GUARDS
from hardtrees.construction import PartialFunction, Distribution, ExplicitDistribution, ProductDistribution, \
    PLAIN, negate
from hardtrees.errors import DomainError, GuardExceeded
from hardtrees.logging import log
from hardtrees.setcover import SetCoverInstance


def blockwise_par(y: Sequence[int], n: int, ell: int) -> Bits:
    """
    Maps a block-major string of n blocks of ell bits to the parities of its blocks

    :param y: The string, where variable i*ell + (j-1) is bit j of block i
    :param n: Number of blocks
    :param ell: Block length
    :return: The n block parities
    """
    if len(y) != n * ell:
        raise DomainError(f"Expected {n * ell} bits for {n} blocks of {ell}, got {len(y)}")
    return tuple(sum(y[i * ell:(i + 1) * ell]) & 1 for i in range(n))


def par_complete(z: Sequence[int], x: Sequence[int], j: int) -> Bits:
    """
    Inserts one bit at position j of every block so that block i has parity x_i. The other positions of block i
    are copied from z_i in order.

    :param z: n blocks of ell - 1 free bits
    :param x: Target block parities
    :param j: Position of the completing bit, 1 <= j <= ell
    :return: The n*ell bit completion
    """
    n = len(x)
    if n == 0 or len(z) % n:
        raise DomainError(f"{len(z)} free bits cannot be split into {n} blocks")
    free = len(z) // n
    ell = free + 1
    if not 1 <= j <= ell:
        raise DomainError(f"Completion position {j} is outside 1..{ell}")
    y: List[int] = []
    for i in range(n):
        block = list(z[i * free:(i + 1) * free])
        block.insert(j - 1, (x[i] + sum(block)) & 1)
        y.extend(block)
    return tuple(y)


def _check_ell(ell: int, allow_degenerate: bool) -> None:
    if ell < 1 or (ell < 2 and not allow_degenerate):
        raise DomainError(f"Block length must be at least 2, got {ell}")


class AmplifiedFunction(PartialFunction):
    """
    y -> base(BlockwisePar(y)), defined wherever the block parities land in the base support
    """

    def __init__(self, base: PartialFunction, ell: int, allow_degenerate: bool = False) -> None:
        _check_ell(ell, allow_degenerate)
        self.base = base
        self.ell = ell
        self.n = base.arity
        self.arity = base.arity * ell
        self.label = f"amplified({ell})" if base.label == PLAIN else f"{base.label}+amplified({ell})"
        self._allow_degenerate = allow_degenerate

    def defined_at(self, y: Bits) -> bool:
        return len(y) == self.arity and self.base.defined_at(blockwise_par(y, self.n, self.ell))

    def evaluate(self, y: Bits) -> int:
        return self.base.evaluate(blockwise_par(y, self.n, self.ell))

    def support(self) -> Iterator[Bits]:
        for x in self.base.support():
            for z in all_bitstrings(self.n * (self.ell - 1)):
                yield par_complete(z, x, 1)

    def negated(self) -> "AmplifiedFunction":
        return AmplifiedFunction(negate(self.base), self.ell, self._allow_degenerate)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AmplifiedFunction):
            return NotImplemented
        return self.ell == other.ell and self.base == other.base


class AmplifiedDistribution(Distribution):
    """
    pmf(y) = base_pmf(BlockwisePar(y)) * 2^(-n(ell-1)): uniform over each parity class
    """

    def __init__(self, base: Distribution, ell: int, allow_degenerate: bool = False,
                 guards: Guards = DEFAULT_GUARDS) -> None:
        _check_ell(ell, allow_degenerate)
        self.base = base
        self.ell = ell
        self.n = base.arity
        self.arity = base.arity * ell
        self._class_weight = Fraction(1, 2 ** (self.n * (ell - 1)))
        self._guards = guards
        self._atoms: Optional[List[Tuple[Bits, Fraction]]] = None

    def pmf(self, y: Bits) -> Fraction:
        return self.base.pmf(blockwise_par(y, self.n, self.ell)) * self._class_weight

    def atoms(self) -> Iterator[Tuple[Bits, Fraction]]:
        if self._atoms is None:
            base_atoms = list(self.base.atoms())
            count = len(base_atoms) * 2 ** (self.n * (self.ell - 1))
            if count > self._guards.exact_support_max_atoms:
                raise GuardExceeded(f"Amplified support has {count} atoms, guard is "
                                    f"{self._guards.exact_support_max_atoms}")
            self._atoms = [(par_complete(z, x, 1), p * self._class_weight)
                           for x, p in base_atoms for z in all_bitstrings(self.n * (self.ell - 1))]
        return iter(self._atoms)

    def parity_pushforward(self) -> Dict[Bits, Fraction]:
        """
        The distribution of BlockwisePar(y), accumulated from the atoms
        """
        pushforward: Dict[Bits, Fraction] = {}
        for y, p in self.atoms():
            x = blockwise_par(y, self.n, self.ell)
            pushforward[x] = pushforward.get(x, Fraction(0)) + p
        return pushforward


def amplify_function(base: PartialFunction, ell: int, allow_degenerate: bool = False) -> AmplifiedFunction:
    return AmplifiedFunction(base, ell, allow_degenerate)


def amplify_dist(base: Distribution, ell: int, allow_degenerate: bool = False,
                 guards: Guards = DEFAULT_GUARDS) -> AmplifiedDistribution:
    return AmplifiedDistribution(base, ell, allow_degenerate, guards)


def pmf_equivalence_check(amp: AmplifiedDistribution, j: int, guards: Guards = DEFAULT_GUARDS) -> bool:
    """
    Builds the distribution of ParComplete_j(z, x) for uniform z and x from the base distribution, and compares it
    with the closed-form pmf on every string of length n*ell

    :param amp: The amplified distribution
    :param j: Completion position
    :param guards: pmf_check_max_bits bounds n*ell
    :return: Whether both pmfs are identical
    """
    if amp.arity > guards.pmf_check_max_bits:
        raise GuardExceeded(f"pmf check over {amp.arity} bits exceeds guard {guards.pmf_check_max_bits}")
    if not 1 <= j <= amp.ell:
        raise DomainError(f"Completion position {j} is outside 1..{amp.ell}")

    free_bits = amp.n * (amp.ell - 1)
    z_weight = Fraction(1, 2 ** free_bits)
    reparameterized: Dict[Bits, Fraction] = {}
    for x, p in amp.base.atoms():
        for z in all_bitstrings(free_bits):
            y = par_complete(z, x, j)
            reparameterized[y] = reparameterized.get(y, Fraction(0)) + p * z_weight

    for y in all_bitstrings(amp.arity):
        if reparameterized.get(y, Fraction(0)) != amp.pmf(y):
            log.debug(f"pmf mismatch at {bits_to_str(y)} for j={j}")
            return False
    return True


def conditional_pattern_probability(amp: AmplifiedDistribution, block: int, positions: Sequence[int],
                                    pattern: Sequence[int], parity_bit: int) -> Optional[Fraction]:
    """
    Pr[(y_block)_positions = pattern | parity of y_block = parity_bit], computed from the atoms

    :param amp: The amplified distribution
    :param block: Block index, 0-based
    :param positions: In-block positions, 1-based
    :param pattern: Required values at those positions
    :param parity_bit: Conditioned block parity
    :return: The conditional probability, or None when the block never has that parity
    """
    offset = block * amp.ell
    joint, marginal = Fraction(0), Fraction(0)
    for y, p in amp.atoms():
        block_bits = y[offset:offset + amp.ell]
        if parity(block_bits) != parity_bit:
            continue
        marginal += p
        if all(block_bits[r - 1] == v for r, v in zip(positions, pattern)):
            joint += p
    if marginal == 0:
        return None
    return joint / marginal


def uniform_likeness_violations(amp: AmplifiedDistribution, guards: Guards = DEFAULT_GUARDS) \
        -> List[Tuple[int, Tuple[int, ...], Bits, int]]:
    """
    Checks Pr[(y_i)_R = r | parity(y_i) = b] <= 2^(-|R|/2) for every block, position set, pattern and parity

    :return: (block, positions, pattern, parity) for every violation
    """
    if amp.arity > guards.pmf_check_max_bits:
        raise GuardExceeded(f"Uniform-likeness check over {amp.arity} bits exceeds guard "
                            f"{guards.pmf_check_max_bits}")
    violations = []
    for block in range(amp.n):
        for size in range(1, amp.ell + 1):
            for positions in itertools.combinations(range(1, amp.ell + 1), size):
                for pattern in all_bitstrings(size):
                    for parity_bit in (0, 1):
                        p = conditional_pattern_probability(amp, block, positions, pattern, parity_bit)
                        # p <= 2^(-|R|/2)  <=>  p^2 * 2^|R| <= 1
                        if p is not None and p * p * 2 ** size > 1:
                            violations.append((block, positions, pattern, parity_bit))
    return violations


def leaf_reach_probability(path: Sequence[Tuple[int, int]], amp: AmplifiedDistribution) -> Fraction:
    """
    Probability that y agrees with every (variable, value) pair of a root-to-leaf path. Given the block parities
    the blocks are independent and uniform within their parity class, so a partly fixed block contributes
    2^-(fixed bits) and a fully fixed block pins its parity.

    :param path: The queried variables and the values that lead to the leaf
    :param amp: The amplified distribution
    :return: The exact reach probability
    """
    fixed: Dict[int, Dict[int, int]] = {}
    for var, value in path:
        fixed.setdefault(var // amp.ell, {})[var % amp.ell] = value

    probability = Fraction(1)
    pinned: Dict[int, int] = {}
    for block, values in fixed.items():
        if len(values) < amp.ell:
            probability /= 2 ** len(values)
        else:
            probability /= 2 ** (amp.ell - 1)
            pinned[block] = sum(values.values()) & 1

    base_mass = sum((p for x, p in amp.base.atoms() if all(x[i] == b for i, b in pinned.items())), Fraction(0))
    return probability * base_mass


@dataclasses.dataclass(frozen=True)
class GeneratorSpec:
    """
    Seed layout per copy: [n(ell-1) bits of z | 1 selector bit | index_bits bits]. Selector 0 gives x = 0^n,
    selector 1 gives x = encoding of the element in the indexed slot, and the output is ParComplete_1(z, x).
    Slots at or above |U| map to padding[slot - |U|].
    """
    n: int
    ell: int
    encodings: Tuple[Bits, ...]  # Neighbourhood encoding per universe element
    index_bits: int
    padding: Tuple[int, ...]  # Element index used by every slot at or above |U|
    copies: int = 1  # Independent copies concatenated for XOR-composed bundles

    @property
    def block_seed_bits(self) -> int:
        return self.n * (self.ell - 1) + 1 + self.index_bits

    @property
    def seed_bits(self) -> int:
        return self.copies * self.block_seed_bits

    @property
    def output_bits(self) -> int:
        return self.copies * self.n * self.ell

    def slot_elements(self) -> Tuple[int, ...]:
        return tuple(range(len(self.encodings))) + self.padding

    def base_distribution(self) -> ExplicitDistribution:
        """
        The base distribution the seed actually induces: identical to the instance's distribution when |U| is a
        power of two, with padded elements weighted by their number of slots otherwise
        """
        slots = 2 ** self.index_bits
        counts = [0] * len(self.encodings)
        for element in self.slot_elements():
            counts[element] += 1
        atoms = [((0,) * self.n, Fraction(1, 2))]
        atoms += [(e, Fraction(c, 2 * slots)) for e, c in zip(self.encodings, counts)]
        return ExplicitDistribution(self.n, atoms)

    def target_distribution(self, guards: Guards = DEFAULT_GUARDS) -> Distribution:
        amp = AmplifiedDistribution(self.base_distribution(), self.ell, allow_degenerate=True, guards=guards)
        if self.copies == 1:
            return amp
        return ProductDistribution(amp, self.copies, guards)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "ell": self.ell,
            "copies": self.copies,
            "seed_bits": self.seed_bits,
            "output_bits": self.output_bits,
            "layout": {"z_bits": self.n * (self.ell - 1), "selector_bits": 1, "index_bits": self.index_bits,
                       "completion_position": 1},
            "encodings": [bits_to_str(e) for e in self.encodings],
            "padding": list(self.padding),
        }

    @staticmethod
    def from_json(document: dict) -> "GeneratorSpec":
        spec = GeneratorSpec(n=document["n"], ell=document["ell"],
                             encodings=tuple(bits_from_str(e) for e in document["encodings"]),
                             index_bits=document["layout"]["index_bits"], padding=tuple(document["padding"]),
                             copies=document["copies"])
        if spec.seed_bits != document["seed_bits"]:
            raise DomainError(f"Generator declares {document['seed_bits']} seed bits, layout gives {spec.seed_bits}")
        return spec


def build_generator(inst: SetCoverInstance, ell: int, allow_degenerate: bool = False) -> GeneratorSpec:
    """
    Builds the seed-to-sample map for the amplified distribution of a normalized instance. When |U| is not a power
    of two the index slots wrap around the universe, and the wrap is recorded as padding.

    :param inst: A normalized instance
    :param ell: Block length
    :param allow_degenerate: Permit ell = 1
    :return: The generator description
    """
    _check_ell(ell, allow_degenerate)
    size = len(inst.universe)
    index_bits = ceil_log2(size)
    padding = tuple(slot % size for slot in range(size, 2 ** index_bits))
    if padding:
        log.info(f"|U| = {size} is not a power of two: padding {len(padding)} generator slots with elements "
                 f"{[inst.universe[e] for e in padding]}")
    spec = GeneratorSpec(n=inst.n, ell=ell, encodings=inst.neighbourhoods, index_bits=index_bits, padding=padding)
    if spec.block_seed_bits > spec.n * ell:
        log.warning(f"Generator uses {spec.block_seed_bits} seed bits for {spec.n * ell} output bits; "
                    f"the instance is not normalized")
    return spec


def replicate_generator(spec: GeneratorSpec, copies: int) -> GeneratorSpec:
    if copies < 1:
        raise DomainError(f"Need at least one generator copy, got {copies}")
    return dataclasses.replace(spec, copies=copies)


def _slot_table(spec: GeneratorSpec) -> np.ndarray:
    return np.array([spec.encodings[e] for e in spec.slot_elements()], dtype=np.uint8).reshape(-1, spec.n)


def generate_batch(spec: GeneratorSpec, seeds: np.ndarray) -> np.ndarray:
    """
    Vectorized generator: maps a (k, seed_bits) array of seed bits to a (k, output_bits) array of samples
    """
    seeds = np.asarray(seeds, dtype=np.uint8)
    if seeds.ndim != 2 or seeds.shape[1] != spec.seed_bits:
        raise DomainError(f"Expected seeds of shape (k, {spec.seed_bits}), got {seeds.shape}")
    table = _slot_table(spec)
    z_bits = spec.n * (spec.ell - 1)
    weights = (1 << np.arange(spec.index_bits - 1, -1, -1)).astype(np.int64)
    outputs = []
    for copy in range(spec.copies):
        chunk = seeds[:, copy * spec.block_seed_bits:(copy + 1) * spec.block_seed_bits]
        z = chunk[:, :z_bits].reshape(len(chunk), spec.n, spec.ell - 1)
        selector = chunk[:, z_bits]
        slots = chunk[:, z_bits + 1:].astype(np.int64) @ weights
        x = table[slots] * selector[:, None]
        completion = (x + z.sum(axis=2)) & 1
        y = np.concatenate([completion[:, :, None].astype(np.uint8), z], axis=2)
        outputs.append(y.reshape(-1, spec.n * spec.ell))
    return np.concatenate(outputs, axis=1)


def generate(spec: GeneratorSpec, seed: Sequence[int]) -> Bits:
    """
    Maps one seed to its sample
    """
    return tuple(int(b) for b in generate_batch(spec, np.array([seed]))[0])


def all_seeds(width: int) -> np.ndarray:
    """
    Every seed of the given width as rows, in lexicographic order
    """
    shifts = np.arange(width - 1, -1, -1)
    return ((np.arange(2 ** width)[:, None] >> shifts) & 1).astype(np.uint8)


def generator_pushforward(spec: GeneratorSpec, guards: Guards = DEFAULT_GUARDS) -> Dict[Bits, Fraction]:
    """
    The exact output distribution of the generator under uniform seeds

    :param spec: The generator
    :param guards: generator_max_seed_bits bounds the exhaustive enumeration
    :return: Output string mapped to its probability
    """
    if spec.seed_bits > guards.generator_max_seed_bits:
        raise GuardExceeded(f"Generator has {spec.seed_bits} seed bits, guard is {guards.generator_max_seed_bits}")
    outputs = generate_batch(spec, all_seeds(spec.seed_bits))
    rows, counts = np.unique(outputs, axis=0, return_counts=True)
    total = 2 ** spec.seed_bits
    return {tuple(int(b) for b in row): Fraction(int(c), total) for row, c in zip(rows, counts)}


def sample(spec: GeneratorSpec, samples: int, rng: np.random.Generator) -> np.ndarray:
    """
    Draws samples by feeding uniform seed bits from rng through the generator
    """
    seeds = rng.integers(0, 2, size=(samples, spec.seed_bits), dtype=np.uint8)
    return generate_batch(spec, seeds)
