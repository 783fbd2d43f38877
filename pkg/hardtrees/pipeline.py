import dataclasses
import json
import pathlib
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from typing import Iterable, Iterator, List, Optional, Tuple

from hardtrees.circuit import Circuit, emit_circuit, emit_xor_circuit, format_netlist, parse_netlist
from hardtrees.claims import ClaimId, ClaimParams, parse_claim_id, size_threshold, verify_claim
from hardtrees.config import Guards, DEFAULT_GUARDS
from hardtrees.constants import ABORT_DELTA_LIMIT, ABORT_TREE_SIZE_DIVISOR, DEFAULT_ELL, DEFAULT_SAMPLES, \
    DEFAULT_SEED, DEFAULT_TRIALS, DNF_SIZE_DIVISOR, ESTIMATION_ELL, LAW_TRIALS, TREE_SIZE_DIVISOR
from hardtrees.construction import PartialFunction, build_gamma, negate
from hardtrees.errors import DomainError, InstanceError
from hardtrees.hypotheses import Hypothesis, dist_exact, dist_mc
from hardtrees.logging import log
from hardtrees.parity import AmplifiedFunction, GeneratorSpec, build_generator, generate_batch, \
    generator_pushforward, all_seeds, replicate_generator
from hardtrees.setcover import SetCoverInstance, exact_opt, instance_grid, instance_hash, normalize, \
    parse_instance, serialize_instance
from hardtrees.types import GapParams, OracleReport, Verdict
from hardtrees.xor import XorComposedFunction, amplification_chain, amplification_params

CONSTRUCTION = "construction"
ESTIMATION = "estimation"

CIRCUIT_FILE = "circuit.net"
GENERATOR_FILE = "generator.json"
METADATA_FILE = "metadata.json"
INSTANCE_FILE = "instance.json"


@dataclasses.dataclass
class HardInstanceBundle:
    problem: str  # CONSTRUCTION or ESTIMATION
    instance: SetCoverInstance  # The normalized instance the bundle was built from
    circuit: Circuit
    generator: GeneratorSpec
    metadata: dict


def dump_json(document) -> str:
    return json.dumps(document, sort_keys=True, indent=2) + "\n"


def _normalized(inst: SetCoverInstance) -> SetCoverInstance:
    normalized, note = normalize(inst)
    if note.changed:
        log.info(f"Building the bundle from the normalized instance ({normalized.n} sets, "
                 f"{len(normalized.universe)} elements)")
    return normalized


def _gap(inst: SetCoverInstance, gap: Optional[GapParams], guards: Guards) -> Tuple[int, List[str], GapParams]:
    opt, cover = exact_opt(inst, guards)
    return opt, cover, gap or GapParams(k=opt, k_prime=opt)


def construction_metadata(inst: SetCoverInstance, ell: int, negated: bool, gap: GapParams, opt: int,
                          cover: List[str], eps: Optional[Fraction] = None, strict_size: Optional[int] = None) \
        -> dict:
    """
    Certificate metadata of a construction bundle, computed from the instance and parameters alone

    :param inst: The normalized instance
    :param ell: Block length
    :param negated: Whether the bundle carries the negated amplified function
    :param gap: Yes/no thresholds (k, k')
    :param opt: opt(S)
    :param cover: The lexicographically least optimal cover
    :param eps: Target accuracy, 1/(4N) by default
    :param strict_size: Size cap of the strictly-proper variant
    :return: The metadata document
    """
    total = inst.total_vertices
    eps = Fraction(1, 4 * total) if eps is None else Fraction(eps)
    parameters = {"problem": CONSTRUCTION, "ell": ell, "negated": negated, "k": gap.k, "k_prime": gap.k_prime,
                  "eps": str(eps), "strict_size": strict_size}
    circuit = emit_circuit(inst, ell, negated)
    generator = build_generator(inst, ell, allow_degenerate=True)
    return {
        "problem": CONSTRUCTION,
        "instance_hash": instance_hash(inst, parameters),
        "n": inst.n,
        "N": total,
        "universe_size": len(inst.universe),
        "ell": ell,
        "m": 1,
        "negated": negated,
        "gap": {"k": gap.k, "k_prime": gap.k_prime},
        "opt": opt,
        "cover": cover,
        "yes_certificate": {"kind": "junta", "junta_size": gap.k * ell},
        "no_certificate": {
            "applies_to": "dnf" if negated else "tree",
            "tree_size": size_threshold(gap.k_prime, ell, TREE_SIZE_DIVISOR),
            "abort_tree_size": {**size_threshold(gap.k_prime, ell, ABORT_TREE_SIZE_DIVISOR),
                                "abort_below": str(ABORT_DELTA_LIMIT)},
            "dnf_size": size_threshold(gap.k_prime, ell, DNF_SIZE_DIVISOR),
        },
        "distance_floors": {"tree": str(Fraction(1, 4 * total)), "abort_tree": str(Fraction(1, 20 * total)),
                            "dnf": str(Fraction(1, 4 * total))},
        "eps": str(eps),
        "strict_size": strict_size,
        "circuit": {"inputs": circuit.inputs, "gates": circuit.gate_counts(), "depth": circuit.depth(),
                    "depth_without_not": circuit.depth(count_not=False)},
        "generator": {"seed_bits": generator.seed_bits, "padding": len(generator.padding)},
        "field_kinds": {"no_certificate": "numeric", "yes_certificate": "numeric", "eps": "numeric"},
    }


def estimation_metadata(inst: SetCoverInstance, gap: GapParams, m: int, opt: int, cover: List[str],
                        eps: Optional[Fraction] = None) -> dict:
    """
    Certificate metadata of an estimation bundle. The no-side depth is recorded symbolically together with the
    explicit XOR-stage arithmetic it rests on.
    """
    ell = ESTIMATION_ELL
    total = inst.total_vertices
    eps = Fraction(1, 2) - Fraction(1, 2 ** total) if eps is None else Fraction(eps)
    parameters = {"problem": ESTIMATION, "ell": ell, "m": m, "k": gap.k, "k_prime": gap.k_prime, "eps": str(eps)}
    circuit = emit_xor_circuit(emit_circuit(inst, ell, negated=False), m)
    generator = replicate_generator(build_generator(inst, ell), m)
    xor_params = amplification_params(Fraction(1, 4 * total), Fraction(1, 2 ** total))
    return {
        "problem": ESTIMATION,
        "instance_hash": instance_hash(inst, parameters),
        "n": inst.n,
        "N": total,
        "universe_size": len(inst.universe),
        "ell": ell,
        "m": m,
        "negated": False,
        "gap": {"k": gap.k, "k_prime": gap.k_prime},
        "opt": opt,
        "cover": cover,
        "yes_certificate": {"kind": "depth", "depth": 2 * gap.k * m},
        "no_certificate": {
            "kind": "depth",
            "expression": "Omega(k_prime * m)",
            "parameters": {"k_prime": gap.k_prime, "m": m, "alpha": xor_params.alpha},
            "xor_stage": {"eps": str(xor_params.eps), "gamma": str(xor_params.gamma), "m1": xor_params.m1,
                          "m2": xor_params.m2, "chain": amplification_chain(xor_params)},
        },
        "eps": str(eps),
        "strict_size": None,
        "circuit": {"inputs": circuit.inputs, "gates": circuit.gate_counts(), "depth": circuit.depth()},
        "generator": {"seed_bits": generator.seed_bits, "padding": len(generator.padding)},
        "field_kinds": {"no_certificate": "symbolic", "yes_certificate": "numeric", "eps": "numeric"},
    }


def gen_construction(inst: SetCoverInstance, ell: int = DEFAULT_ELL, negated: bool = False,
                     strict_size: Optional[int] = None, gap: Optional[GapParams] = None,
                     eps: Optional[Fraction] = None, allow_degenerate: bool = False,
                     guards: Guards = DEFAULT_GUARDS) -> HardInstanceBundle:
    """
    Builds the DT-Construction bundle: the circuit of the (negated) amplified function, the generator of its
    distribution and the certificate metadata

    :param inst: A coverable instance; it is normalized first
    :param ell: Block length, at least 2 unless allow_degenerate
    :param negated: Emit the negated function (the DNF variant)
    :param strict_size: Size cap for strictly-proper adjudication
    :param gap: Yes/no thresholds, (opt, opt) by default
    :param eps: Target accuracy, 1/(4N) by default
    :param allow_degenerate: Permit ell = 1
    :param guards: Bounds the exact opt computation
    :return: The bundle
    """
    if ell < 1 or (ell < 2 and not allow_degenerate):
        raise DomainError(f"Block length must be at least 2, got {ell}")
    inst = _normalized(inst)
    opt, cover, gap = _gap(inst, gap, guards)
    metadata = construction_metadata(inst, ell, negated, gap, opt, cover, eps, strict_size)
    bundle = HardInstanceBundle(problem=CONSTRUCTION, instance=inst, circuit=emit_circuit(inst, ell, negated),
                                generator=build_generator(inst, ell, allow_degenerate), metadata=metadata)
    log.info(f"Built construction bundle: {bundle.circuit.inputs} inputs, {bundle.generator.seed_bits} seed bits, "
             f"eps {metadata['eps']}")
    return bundle


def gen_estimation(inst: SetCoverInstance, gap: Optional[GapParams] = None, m: int = 1,
                   eps: Optional[Fraction] = None, guards: Guards = DEFAULT_GUARDS) -> HardInstanceBundle:
    """
    Builds the DT-Estimation bundle: m copies of the ell = 2 construction under a top XOR gate, m concatenated
    generators and the metadata with yes-depth 2km
    """
    if m < 1:
        raise DomainError(f"Need at least one copy, got {m}")
    inst = _normalized(inst)
    opt, cover, gap = _gap(inst, gap, guards)
    circuit = emit_xor_circuit(emit_circuit(inst, ESTIMATION_ELL, negated=False), m)
    generator = replicate_generator(build_generator(inst, ESTIMATION_ELL), m)
    metadata = estimation_metadata(inst, gap, m, opt, cover, eps)
    log.info(f"Built estimation bundle with {m} copies: {circuit.inputs} inputs, {generator.seed_bits} seed bits")
    return HardInstanceBundle(problem=ESTIMATION, instance=inst, circuit=circuit, generator=generator,
                              metadata=metadata)


def write_bundle(bundle: HardInstanceBundle, directory) -> pathlib.Path:
    directory = pathlib.Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / CIRCUIT_FILE).write_text(format_netlist(bundle.circuit))
    (directory / GENERATOR_FILE).write_text(dump_json(bundle.generator.to_json()))
    (directory / METADATA_FILE).write_text(dump_json(bundle.metadata))
    (directory / INSTANCE_FILE).write_text(dump_json(json.loads(serialize_instance(bundle.instance))))
    log.info(f"Wrote {bundle.problem} bundle to {directory}")
    return directory


def read_bundle(directory) -> HardInstanceBundle:
    directory = pathlib.Path(directory)
    try:
        metadata = json.loads((directory / METADATA_FILE).read_text())
        generator = GeneratorSpec.from_json(json.loads((directory / GENERATOR_FILE).read_text()))
        circuit = parse_netlist((directory / CIRCUIT_FILE).read_text())
        instance = parse_instance((directory / INSTANCE_FILE).read_text())
    except FileNotFoundError as e:
        raise InstanceError(f"Bundle directory {directory} is incomplete: {e.filename} is missing")
    except (json.JSONDecodeError, KeyError) as e:
        raise InstanceError(f"Bundle directory {directory} is malformed: {e}")
    if metadata.get("problem") not in (CONSTRUCTION, ESTIMATION):
        raise InstanceError(f"Unknown bundle problem {metadata.get('problem')!r}")
    return HardInstanceBundle(problem=metadata["problem"], instance=instance, circuit=circuit, generator=generator,
                              metadata=metadata)


def rederive_metadata(bundle: HardInstanceBundle, guards: Guards = DEFAULT_GUARDS) -> dict:
    """
    Recomputes the metadata from the bundle's instance and the parameters recorded in its metadata
    """
    metadata = bundle.metadata
    gap = GapParams(k=metadata["gap"]["k"], k_prime=metadata["gap"]["k_prime"])
    opt, cover = exact_opt(bundle.instance, guards)
    eps = Fraction(metadata["eps"])
    if bundle.problem == CONSTRUCTION:
        return construction_metadata(bundle.instance, metadata["ell"], metadata["negated"], gap, opt, cover, eps,
                                     metadata["strict_size"])
    return estimation_metadata(bundle.instance, gap, metadata["m"], opt, cover, eps)


def bundle_function(bundle: HardInstanceBundle) -> PartialFunction:
    """
    The analytic function the bundle's circuit is meant to compute on the generator's support
    """
    gamma = build_gamma(bundle.instance)
    if bundle.problem == CONSTRUCTION:
        base = negate(gamma) if bundle.metadata["negated"] else gamma
        return AmplifiedFunction(base, bundle.metadata["ell"], allow_degenerate=True)
    amplified = AmplifiedFunction(gamma, ESTIMATION_ELL)
    m = bundle.metadata["m"]
    return amplified if m == 1 else XorComposedFunction(amplified, m)


def check_bundle_coherence(bundle: HardInstanceBundle, guards: Guards = DEFAULT_GUARDS) -> List[str]:
    """
    Checks that the seed pushforward equals the analytic pmf, that the circuit reproduces the analytic function
    on every generator output, and that the metadata can be re-derived exactly

    :return: A description of every problem found, empty when the bundle is coherent
    """
    problems = []
    pushforward = generator_pushforward(bundle.generator, guards)
    target = bundle.generator.target_distribution(guards)
    for y, p in target.atoms():
        if pushforward.get(y) != p:
            problems.append(f"pmf mismatch at {''.join(map(str, y))}: generator {pushforward.get(y)}, analytic {p}")
    extra = len(set(pushforward) - {y for y, _ in target.atoms()})
    if extra > 0:
        problems.append(f"generator reaches {extra} strings outside the analytic support")

    f = bundle_function(bundle)
    outputs = generate_batch(bundle.generator, all_seeds(bundle.generator.seed_bits))
    values = bundle.circuit.evaluate_batch(outputs)
    seen = {}
    for row, value in zip(outputs, values):
        y = tuple(int(b) for b in row)
        if y not in seen:
            seen[y] = int(value)
            if seen[y] != f.evaluate(y):
                problems.append(f"circuit outputs {seen[y]} at {''.join(map(str, y))}, function has {f.evaluate(y)}")

    if rederive_metadata(bundle, guards) != bundle.metadata:
        problems.append("metadata differs from the metadata re-derived from the instance")
    for problem in problems:
        log.warning(f"Incoherent bundle: {problem}")
    return problems


def adjudicate(bundle: HardInstanceBundle, hypothesis: Hypothesis, mode: str = "exact",
               samples: int = DEFAULT_SAMPLES, seed: int = DEFAULT_SEED, eps: Optional[Fraction] = None,
               guards: Guards = DEFAULT_GUARDS) -> Verdict:
    """
    Judges a submitted hypothesis against the bundle: it passes iff its distance is at most eps and, when the
    bundle has a strict size cap, its size is at most the cap. Exact mode computes the distance over the
    generator's distribution; Monte-Carlo mode estimates it from seeded generator samples.

    :param bundle: The bundle
    :param hypothesis: A tree or DNF over the circuit's inputs
    :param mode: "exact" or "monte_carlo"
    :param samples: Monte-Carlo sample count
    :param seed: Monte-Carlo seed
    :param eps: Accuracy to judge against, the bundle's eps by default
    :param guards: Bounds the exact support
    :return: The verdict
    """
    if hypothesis.num_vars != bundle.circuit.inputs:
        raise DomainError(f"Hypothesis has {hypothesis.num_vars} variables, bundle has {bundle.circuit.inputs} inputs")
    eps = Fraction(bundle.metadata["eps"]) if eps is None else Fraction(eps)
    size_cap = bundle.metadata.get("strict_size")
    f = bundle_function(bundle)

    radius = None
    if mode == "exact":
        distance = dist_exact(hypothesis, f, bundle.generator.target_distribution(guards))
    elif mode == "monte_carlo":
        estimate = dist_mc(hypothesis, f, bundle.generator, samples, seed)
        distance, radius = estimate.estimate, estimate.radius
    else:
        raise DomainError(f"Unknown adjudication mode '{mode}'")

    if size_cap is not None and hypothesis.size > size_cap:
        passed, reason = False, f"size {hypothesis.size} exceeds the cap {size_cap}"
    elif distance > eps:
        passed, reason = False, f"distance {distance} exceeds eps {eps}"
    else:
        passed, reason = True, f"distance {distance} is within eps {eps}"
    log.info(f"Verdict ({mode}): {'PASS' if passed else 'FAIL'}, {reason}")
    return Verdict(problem=bundle.problem, mode=mode, hypothesis_size=hypothesis.size, distance=distance, eps=eps,
                   size_cap=size_cap, passed=passed, reason=reason, radius=radius)


def verdict_to_json(verdict: Verdict) -> dict:
    document = dataclasses.asdict(verdict)
    document["distance"] = str(verdict.distance)
    document["eps"] = str(verdict.eps)
    return document


@dataclasses.dataclass(frozen=True)
class GridSpec:
    max_sets: int = 4
    max_universe: int = 4
    ells: Tuple[int, ...] = (DEFAULT_ELL,)
    seed: int = DEFAULT_SEED
    trials: int = DEFAULT_TRIALS  # Random candidates per restriction claim and grid point
    law_trials: int = LAW_TRIALS  # Random hypotheses per average-depth and average-width law and grid point
    m: int = 2
    flip_zero: bool = False  # Check the mutant that labels the all-zeros string 1

    def instances(self) -> Iterator[SetCoverInstance]:
        return instance_grid(self.max_sets, self.max_universe)

    def points(self, guards: Guards = DEFAULT_GUARDS) -> Iterator[Tuple[SetCoverInstance, ClaimParams]]:
        for inst in self.instances():
            for ell in self.ells:
                flip = (0,) * inst.n if self.flip_zero else None
                yield inst, ClaimParams(ell=ell, seed=self.seed, trials=self.trials, law_trials=self.law_trials,
                                        m=self.m, flip=flip, guards=guards)


def _verify_task(task: Tuple[ClaimId, SetCoverInstance, ClaimParams]) -> OracleReport:
    return verify_claim(*task)


def run_suite(selection: Iterable[str], grid: GridSpec = GridSpec(), guards: Guards = DEFAULT_GUARDS,
              workers: Optional[int] = None) -> List[OracleReport]:
    """
    Verifies every selected claim on every grid point. Reports come back in grid order, then selection order.

    :param selection: Claim ids; all are validated before anything runs
    :param grid: The instance family
    :param guards: Oracle guards
    :param workers: Worker process count, the executor default when None
    :return: The reports
    """
    claims = [parse_claim_id(c) for c in selection]
    if not claims:
        return []
    tasks = [(claim, inst, params) for inst, params in grid.points(guards) for claim in claims]
    log.info(f"Running {len(claims)} claims on {len(tasks) // len(claims)} grid points")
    with ProcessPoolExecutor(max_workers=workers) as executor:
        reports = list(executor.map(_verify_task, tasks))
    failed = sum(1 for r in reports if not r.verdict)
    log.info(f"Suite finished: {len(reports) - failed} passed, {failed} failed")
    return reports
