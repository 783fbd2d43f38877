import dataclasses
import hashlib
import itertools
import json
import math
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

from hardtrees.bits import Bits, ceil_log2
from hardtrees.config import Guards, DEFAULT_GUARDS
from hardtrees.errors import InstanceError, GuardExceeded
from hardtrees.logging import log
from hardtrees.types import NormalizationNote


@dataclasses.dataclass(frozen=True)
class SetCoverInstance:
    sets: Tuple[str, ...]  # S in document order, n = |S|
    universe: Tuple[str, ...]  # U in document order
    neighbourhoods: Tuple[Bits, ...]  # N_S(u) per element, indexed in set order

    @property
    def n(self) -> int:
        return len(self.sets)

    @property
    def total_vertices(self) -> int:
        return len(self.sets) + len(self.universe)

    @property
    def masks(self) -> Tuple[int, ...]:
        """
        Neighbourhoods as integer masks where bit i stands for set i
        """
        return tuple(sum(bit << i for i, bit in enumerate(bits)) for bits in self.neighbourhoods)

    def set_indices(self, cover: Iterable[str]) -> List[int]:
        index = {s: i for i, s in enumerate(self.sets)}
        indices = []
        for s in cover:
            if s not in index:
                raise InstanceError(f"Cover member '{s}' is not a set of the instance")
            indices.append(index[s])
        return sorted(set(indices))

    def set_names(self, indices: Iterable[int]) -> List[str]:
        return [self.sets[i] for i in sorted(indices)]


def _instance_from_masks(sets: Sequence[str], universe: Sequence[str], masks: Sequence[int]) -> SetCoverInstance:
    n = len(sets)
    return SetCoverInstance(sets=tuple(sets), universe=tuple(universe),
                            neighbourhoods=tuple(tuple((mask >> i) & 1 for i in range(n)) for mask in masks))


def parse_instance(text: str) -> SetCoverInstance:
    """
    Parses a JSON instance document of the form {"sets": [...], "universe": [...], "edges": [[set, element], ...]}

    :param text: The JSON document
    :return: The instance with vertices in document order, not normalized
    """
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise InstanceError(f"Instance document is not valid JSON: {e}")
    if not isinstance(document, dict) or any(key not in document for key in ("sets", "universe", "edges")):
        raise InstanceError("Instance document must be an object with 'sets', 'universe' and 'edges'")

    sets, universe, edges = document["sets"], document["universe"], document["edges"]
    if not isinstance(sets, list) or not isinstance(universe, list) or not isinstance(edges, list):
        raise InstanceError("'sets', 'universe' and 'edges' must be lists")
    if not sets or not universe:
        raise InstanceError("Instance needs at least one set and one element")

    seen = set()
    for vertex in sets + universe:
        if not isinstance(vertex, str):
            raise InstanceError(f"Vertex identifier {vertex!r} is not a string")
        if vertex in seen:
            raise InstanceError(f"Duplicate vertex identifier '{vertex}'")
        seen.add(vertex)

    set_index = {s: i for i, s in enumerate(sets)}
    element_index = {u: i for i, u in enumerate(universe)}
    masks = [0] * len(universe)
    for edge in edges:
        if not isinstance(edge, list) or len(edge) != 2:
            raise InstanceError(f"Edge {edge!r} is not a [set, element] pair")
        s, u = edge
        if s not in set_index:
            raise InstanceError(f"Edge {edge!r} references unknown set '{s}'")
        if u not in element_index:
            raise InstanceError(f"Edge {edge!r} references unknown element '{u}'")
        masks[element_index[u]] |= 1 << set_index[s]

    for u, mask in zip(universe, masks):
        if mask == 0:
            raise InstanceError(f"Uncoverable element '{u}' has no neighbours")
    return _instance_from_masks(sets, universe, masks)


def serialize_instance(inst: SetCoverInstance) -> str:
    """
    Canonical JSON form: vertices in instance order, edges sorted lexicographically
    """
    edges = sorted([s, u] for u, bits in zip(inst.universe, inst.neighbourhoods)
                   for s, bit in zip(inst.sets, bits) if bit)
    return json.dumps({"sets": list(inst.sets), "universe": list(inst.universe), "edges": edges})


def instance_hash(inst: SetCoverInstance, parameters: Optional[dict] = None) -> str:
    """
    SHA-256 over the canonical instance and any construction parameters
    """
    payload = serialize_instance(inst) + json.dumps(parameters or {}, sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _fresh_set_name(base: str, taken: set) -> str:
    copy = 1
    while f"{base}~{copy}" in taken:
        copy += 1
    return f"{base}~{copy}"


def normalize(inst: SetCoverInstance) -> Tuple[SetCoverInstance, NormalizationNote]:
    """
    Deletes elements with duplicate neighbourhoods (keeping the first occurrence) and replicates sets cyclically
    until 1 + ceil(log2 |U|) <= n. Neither step changes opt(S).

    :param inst: A coverable instance
    :return: The normalized copy and a note of what was deleted and replicated
    """
    masks = inst.masks
    if any(mask == 0 for mask in masks):
        raise InstanceError("Cannot normalize an instance with uncoverable elements")

    first_with_mask = {}
    kept_elements, kept_masks, deleted = [], [], []
    for u, mask in zip(inst.universe, masks):
        if mask in first_with_mask:
            deleted.append((u, first_with_mask[mask]))
            continue
        first_with_mask[mask] = u
        kept_elements.append(u)
        kept_masks.append(mask)

    sets = list(inst.sets)
    taken = set(sets) | set(inst.universe)
    replicated = []
    source = 0
    while 1 + ceil_log2(len(kept_elements)) > len(sets):
        original = source % inst.n
        name = _fresh_set_name(inst.sets[original], taken)
        taken.add(name)
        new_bit = 1 << len(sets)
        kept_masks = [mask | new_bit if mask >> original & 1 else mask for mask in kept_masks]
        sets.append(name)
        replicated.append((name, inst.sets[original]))
        source += 1

    note = NormalizationNote(deleted=deleted, replicated=replicated)
    if note.changed:
        log.info(f"Normalized instance: deleted {len(deleted)} duplicate elements {[u for u, _ in deleted]}, "
                 f"replicated {len(replicated)} sets {[s for s, _ in replicated]}")
    return _instance_from_masks(sets, kept_elements, kept_masks), note


def is_cover(inst: SetCoverInstance, cover: Iterable[str]) -> bool:
    """
    :param inst: The instance
    :param cover: Set identifiers, all of which must belong to the instance
    :return: Whether every element has a neighbour in the cover
    """
    chosen = sum(1 << i for i in inst.set_indices(cover))
    return all(mask & chosen for mask in inst.masks)


def greedy_cover(inst: SetCoverInstance) -> List[str]:
    """
    Repeatedly picks the set covering the most uncovered elements, breaking ties by lowest set index

    :param inst: A coverable instance
    :return: The chosen sets in instance order
    """
    uncovered = list(inst.masks)
    chosen = []
    while uncovered:
        gains = [sum(1 for mask in uncovered if mask >> i & 1) for i in range(inst.n)]
        best = max(range(inst.n), key=lambda i: (gains[i], -i))
        if gains[best] == 0:
            raise InstanceError("Instance has uncoverable elements")
        chosen.append(best)
        uncovered = [mask for mask in uncovered if not mask >> best & 1]
    return inst.set_names(chosen)


class _CoverSearch:
    """
    Branch-and-bound over element branching: the lowest-index uncovered element must be hit by one of its sets
    """

    def __init__(self, inst: SetCoverInstance) -> None:
        self._n = inst.n
        self._masks = inst.masks
        self._elements_of_set = [sum(1 << e for e, mask in enumerate(self._masks) if mask >> i & 1)
                                 for i in range(self._n)]
        self._max_gain = max(bin(m).count("1") for m in self._elements_of_set)

    def _lower_bound(self, uncovered: int) -> int:
        return -(-bin(uncovered).count("1") // self._max_gain)

    def minimum_size(self, upper_bound: int) -> int:
        best = upper_bound

        def _search(uncovered: int, used: int) -> None:
            nonlocal best
            if uncovered == 0:
                best = min(best, used)
                return
            if used + self._lower_bound(uncovered) >= best:
                return
            element = (uncovered & -uncovered).bit_length() - 1
            for i in range(self._n):
                if self._masks[element] >> i & 1:
                    _search(uncovered & ~self._elements_of_set[i], used + 1)

        _search((1 << len(self._masks)) - 1, 0)
        return best

    def least_cover_of_size(self, size: int) -> Optional[List[int]]:
        """
        Include-first search over sets in index order, so the first cover found is the lexicographically least
        """
        # Sets with index >= i that touch each element, for the dead-end check
        suffix_reach = [0] * (self._n + 1)
        for i in range(self._n - 1, -1, -1):
            suffix_reach[i] = suffix_reach[i + 1] | self._elements_of_set[i]

        def _search(i: int, uncovered: int, chosen: List[int]) -> Optional[List[int]]:
            if uncovered == 0:
                return chosen
            budget = size - len(chosen)
            if budget == 0 or i == self._n or uncovered & ~suffix_reach[i]:
                return None
            if self._lower_bound(uncovered) > budget:
                return None
            found = _search(i + 1, uncovered & ~self._elements_of_set[i], chosen + [i])
            if found is not None:
                return found
            return _search(i + 1, uncovered, chosen)

        return _search(0, (1 << len(self._masks)) - 1, [])


def exact_opt(inst: SetCoverInstance, guards: Guards = DEFAULT_GUARDS) -> Tuple[int, List[str]]:
    """
    Computes opt(S) by branch-and-bound seeded with the greedy cover

    :param inst: A coverable instance
    :param guards: exact_opt_max_sets bounds the number of sets
    :return: opt(S) and the lexicographically least minimum cover
    """
    if inst.n > guards.exact_opt_max_sets:
        raise GuardExceeded(f"exact_opt supports at most {guards.exact_opt_max_sets} sets, got {inst.n}")
    if any(mask == 0 for mask in inst.masks):
        raise InstanceError("Instance has uncoverable elements")

    search = _CoverSearch(inst)
    size = search.minimum_size(len(greedy_cover(inst)))
    witness = search.least_cover_of_size(size)
    if witness is None:
        raise RuntimeError(f"No cover of size {size} found although branch-and-bound reported one")
    return size, inst.set_names(witness)


def to_hitting_set(inst: SetCoverInstance) -> SetCoverInstance:
    """
    Transposes the bipartite graph: elements become sets and sets become elements
    """
    return SetCoverInstance(sets=inst.universe, universe=inst.sets,
                            neighbourhoods=tuple(tuple(bits[i] for bits in inst.neighbourhoods)
                                                 for i in range(inst.n)))


def hitting_set_opt(inst: SetCoverInstance, guards: Guards = DEFAULT_GUARDS) -> Tuple[int, List[str]]:
    """
    :return: The size of a minimum hitting set and the lexicographically least one (element identifiers)
    """
    return exact_opt(to_hitting_set(inst), guards)


def greedy_ratio_ceiling(inst: SetCoverInstance, optimum: int) -> float:
    """
    Sanity ceiling opt * (1 + ln N) on the size of the greedy cover
    """
    return optimum * (1 + math.log(inst.total_vertices))


def _canonical_masks(masks: Sequence[int], n: int) -> Tuple[int, ...]:
    best = None
    for perm in itertools.permutations(range(n)):
        relabelled = tuple(sorted(sum(((mask >> i) & 1) << perm[i] for i in range(n)) for mask in masks))
        if best is None or relabelled < best:
            best = relabelled
    return best


def instance_grid(max_sets: int, max_universe: int, min_sets: int = 1) -> Iterator[SetCoverInstance]:
    """
    Enumerates every normalized instance with at most max_sets sets and max_universe elements, once per class of
    set relabellings. Sets are named s1..sn and elements u1..um.

    :param max_sets: Largest n
    :param max_universe: Largest |U|
    :param min_sets: Smallest n
    :return: Iterator over the instances, ordered by (n, |U|) and then by their canonical masks
    """
    for n in range(min_sets, max_sets + 1):
        sets = [f"s{i + 1}" for i in range(n)]
        for size in range(1, max_universe + 1):
            if 1 + ceil_log2(size) > n:
                continue
            universe = [f"u{i + 1}" for i in range(size)]
            seen = set()
            for masks in itertools.combinations(range(1, 1 << n), size):
                canonical = _canonical_masks(masks, n)
                if canonical in seen:
                    continue
                seen.add(canonical)
                yield _instance_from_masks(sets, universe, canonical)
