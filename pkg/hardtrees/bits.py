import itertools
from typing import Iterator, Sequence, Tuple

from hardtrees.errors import DomainError

Bits = Tuple[int, ...]


def bits_from_str(text: str) -> Bits:
    if any(c not in "01" for c in text):
        raise DomainError(f"'{text}' is not a bitstring")
    return tuple(int(c) for c in text)


def bits_to_str(bits: Sequence[int]) -> str:
    return "".join(str(b) for b in bits)


def all_bitstrings(width: int) -> Iterator[Bits]:
    """
    Enumerates {0,1}^width in lexicographic order
    """
    return itertools.product((0, 1), repeat=width)


def int_to_bits(value: int, width: int) -> Bits:
    """
    Most significant bit first
    """
    if value < 0 or value >= 1 << width:
        raise DomainError(f"{value} does not fit in {width} bits")
    return tuple((value >> (width - 1 - i)) & 1 for i in range(width))


def bits_to_int(bits: Sequence[int]) -> int:
    value = 0
    for b in bits:
        value = (value << 1) | b
    return value


def parity(bits: Sequence[int]) -> int:
    return sum(bits) & 1


def ceil_log2(value: int) -> int:
    """
    Returns the smallest b with 2^b >= value

    :param value: A positive integer
    :return: ceil(log2(value))
    """
    if value < 1:
        raise DomainError(f"ceil_log2 needs a positive argument, got {value}")
    return (value - 1).bit_length()


def mask_members(mask: int) -> Iterator[int]:
    """
    Yields the indices of the set bits of an integer mask in increasing order
    """
    index = 0
    while mask:
        if mask & 1:
            yield index
        mask >>= 1
        index += 1
