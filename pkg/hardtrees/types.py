import dataclasses
from fractions import Fraction
from typing import Optional, List, Tuple, Union

from hardtrees.errors import DomainError

Label = Optional[int]  # 0, 1 or None for an abort


@dataclasses.dataclass(frozen=True)
class GapParams:
    k: int  # Yes-threshold: opt(S) <= k
    k_prime: int  # No-threshold: opt(S) > k_prime

    def __post_init__(self) -> None:
        if self.k < 1 or self.k_prime < self.k:
            raise DomainError(f"Gap parameters need 1 <= k <= k', got k={self.k}, k'={self.k_prime}")


@dataclasses.dataclass
class NormalizationNote:
    deleted: List[Tuple[str, str]]  # (deleted element, element it duplicated)
    replicated: List[Tuple[str, str]]  # (new set, set it copies)

    @property
    def changed(self) -> bool:
        return bool(self.deleted or self.replicated)


@dataclasses.dataclass(frozen=True)
class TraceResult:
    label: Label  # Reached leaf label, or the DNF value
    size: int  # Depth of the path, or width of the minimal accepting term
    per_position_counts: Tuple[int, ...]  # q_j for every in-block position j (empty without a block shape)


@dataclasses.dataclass(frozen=True)
class MonteCarloEstimate:
    estimate: float  # Non-abort disagreements divided by the number of samples
    radius: float  # Two-sided Hoeffding radius at confidence 1 - delta
    delta: float
    samples: int
    aborts: int  # Samples on which the hypothesis aborted


@dataclasses.dataclass
class OracleReport:
    claim_id: str
    parameters: dict
    computed: Optional[Fraction]  # None when the oracle hit a guard and gave no number
    threshold: Fraction
    relation: str  # ">=" or "<=": how computed must compare with threshold
    verdict: bool
    witness: Optional[Union[dict, list]] = None  # Serialized hypothesis backing the computed quantity
    details: str = ""


@dataclasses.dataclass(frozen=True)
class JuntaHypothesis:
    variables: Tuple[int, ...]  # Relevant variables in increasing order
    table: Tuple[int, ...]  # Value per projection, indexed by the projection read as a binary number

    def evaluate(self, x: Tuple[int, ...]) -> int:
        index = 0
        for v in self.variables:
            index = (index << 1) | x[v]
        return self.table[index]


@dataclasses.dataclass(frozen=True)
class XorParams:
    eps: Fraction  # Far-ness of the base function
    gamma: Fraction  # Target slack below 1/2
    delta_abort: Fraction  # Abort budget of the first amplification stage
    m1: int
    m2: int
    m: int  # m1 * m2
    alpha: float  # Root of 6*alpha*ln(2/alpha) = 1
    c1: int
    c2: int
    first_stage_farness: Fraction  # Recorded guarantee after the first stage
    first_stage_abort: Fraction


@dataclasses.dataclass
class Verdict:
    problem: str  # "construction" or "estimation"
    mode: str  # "exact" or "monte_carlo"
    hypothesis_size: int
    distance: Union[Fraction, float]
    eps: Fraction
    size_cap: Optional[int]  # Only set in strictly-proper mode
    passed: bool
    reason: str
    radius: Optional[float] = None  # Only set in Monte-Carlo mode
