import json
import pathlib
from fractions import Fraction

import pytest

from hardtrees.config import DEFAULT_GUARDS
from hardtrees.constants import DEFAULT_TRIALS, LAW_TRIALS
from hardtrees.errors import DomainError, GuardExceeded, InstanceError, UnknownClaim
from hardtrees.hypotheses import cover_dnf, constant_tree, junta_tree
from hardtrees.pipeline import CIRCUIT_FILE, GENERATOR_FILE, INSTANCE_FILE, METADATA_FILE, GridSpec, adjudicate, \
    check_bundle_coherence, gen_construction, gen_estimation, read_bundle, rederive_metadata, run_suite, \
    verdict_to_json, write_bundle
from hardtrees.setcover import SetCoverInstance, parse_instance
from hardtrees.types import GapParams
from hardtrees.xor import xor_junta_tree


def test_construction_metadata(five_sets: SetCoverInstance) -> None:
    bundle = gen_construction(five_sets, ell=2)
    metadata = bundle.metadata
    assert metadata["problem"] == "construction"
    assert metadata["N"] == 9
    assert metadata["opt"] == 2
    assert metadata["cover"] == ["s1", "s2"]
    assert metadata["gap"] == {"k": 2, "k_prime": 2}
    assert metadata["eps"] == "1/36"
    assert metadata["yes_certificate"] == {"kind": "junta", "junta_size": 4}
    assert metadata["no_certificate"]["applies_to"] == "tree"
    assert metadata["no_certificate"]["tree_size"] == {"exponent": "4/8", "max_size_below": 1}
    assert metadata["distance_floors"]["abort_tree"] == "1/180"
    assert metadata["circuit"]["depth"] == 2
    assert metadata["generator"] == {"seed_bits": 8, "padding": 0}
    assert metadata["field_kinds"]["no_certificate"] == "numeric"
    assert bundle.circuit.inputs == 10


def test_negated_construction(five_sets: SetCoverInstance) -> None:
    metadata = gen_construction(five_sets, ell=3, negated=True, gap=GapParams(k=2, k_prime=3)).metadata
    assert metadata["no_certificate"]["applies_to"] == "dnf"
    assert metadata["no_certificate"]["dnf_size"] == {"exponent": "9/16", "max_size_below": 1}
    assert metadata["circuit"]["depth"] == 3
    assert metadata["circuit"]["depth_without_not"] == 2
    assert metadata["yes_certificate"]["junta_size"] == 6


def test_construction_rejects_short_blocks(five_sets: SetCoverInstance) -> None:
    with pytest.raises(DomainError):
        gen_construction(five_sets, ell=1)
    bundle = gen_construction(five_sets, ell=1, allow_degenerate=True)
    assert bundle.circuit.inputs == 5
    assert check_bundle_coherence(bundle) == []


def test_construction_normalizes_first() -> None:
    inst = parse_instance(json.dumps({"sets": ["a", "b"], "universe": ["x", "y", "z", "w"],
                                      "edges": [["a", "x"], ["b", "y"], ["a", "z"], ["b", "z"], ["a", "w"]]}))
    bundle = gen_construction(inst)
    assert bundle.instance.sets == ("a", "b", "a~1")
    assert bundle.metadata["n"] == 3
    assert bundle.metadata["universe_size"] == 3
    assert bundle.metadata["generator"]["padding"] == 1
    assert check_bundle_coherence(bundle) == []


def test_estimation_metadata(two_disjoint: SetCoverInstance) -> None:
    bundle = gen_estimation(two_disjoint, m=2)
    metadata = bundle.metadata
    assert metadata["problem"] == "estimation"
    assert metadata["ell"] == 2
    assert metadata["m"] == 2
    assert metadata["eps"] == "7/16"
    assert metadata["yes_certificate"] == {"kind": "depth", "depth": 8}
    assert metadata["no_certificate"]["expression"] == "Omega(k_prime * m)"
    assert metadata["no_certificate"]["xor_stage"]["eps"] == "1/16"
    assert metadata["no_certificate"]["xor_stage"]["gamma"] == "1/16"
    assert metadata["no_certificate"]["xor_stage"]["m1"] == 16
    assert metadata["no_certificate"]["xor_stage"]["m2"] == 4
    assert metadata["field_kinds"]["no_certificate"] == "symbolic"
    assert bundle.circuit.inputs == 8
    assert bundle.generator.seed_bits == 8
    with pytest.raises(DomainError):
        gen_estimation(two_disjoint, m=0)


def test_bundle_files(tmp_path: pathlib.Path, five_sets: SetCoverInstance) -> None:
    bundle = gen_construction(five_sets, ell=2, strict_size=12)
    directory = write_bundle(bundle, tmp_path / "bundle")
    for name in (CIRCUIT_FILE, GENERATOR_FILE, METADATA_FILE, INSTANCE_FILE):
        assert (directory / name).is_file()
    text = (directory / METADATA_FILE).read_text()
    assert text.endswith("}\n")
    assert json.loads(text) == bundle.metadata
    again = read_bundle(directory)
    assert again.circuit == bundle.circuit
    assert again.generator == bundle.generator
    assert again.instance == bundle.instance
    assert rederive_metadata(again) == again.metadata


def test_bundle_is_deterministic(tmp_path: pathlib.Path, five_sets: SetCoverInstance) -> None:
    first = write_bundle(gen_construction(five_sets, ell=2), tmp_path / "first")
    second = write_bundle(gen_construction(five_sets, ell=2), tmp_path / "second")
    for name in (CIRCUIT_FILE, GENERATOR_FILE, METADATA_FILE, INSTANCE_FILE):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_read_bundle_errors(tmp_path: pathlib.Path, five_sets: SetCoverInstance) -> None:
    with pytest.raises(InstanceError):
        read_bundle(tmp_path / "missing")
    directory = write_bundle(gen_construction(five_sets, ell=2), tmp_path / "bundle")
    (directory / METADATA_FILE).write_text("{not json")
    with pytest.raises(InstanceError):
        read_bundle(directory)
    (directory / METADATA_FILE).write_text(json.dumps({"problem": "other"}))
    with pytest.raises(InstanceError):
        read_bundle(directory)


def test_coherence(tmp_path: pathlib.Path, five_sets: SetCoverInstance, two_disjoint: SetCoverInstance) -> None:
    assert check_bundle_coherence(gen_construction(five_sets, ell=2)) == []
    assert check_bundle_coherence(gen_construction(five_sets, ell=2, negated=True)) == []
    assert check_bundle_coherence(gen_estimation(two_disjoint, m=2)) == []

    directory = write_bundle(gen_construction(five_sets, ell=2), tmp_path / "bundle")
    metadata = json.loads((directory / METADATA_FILE).read_text())
    metadata["opt"] = 1
    (directory / METADATA_FILE).write_text(json.dumps(metadata))
    problems = check_bundle_coherence(read_bundle(directory))
    assert problems == ["metadata differs from the metadata re-derived from the instance"]


def test_coherence_detects_wrong_circuit(five_sets: SetCoverInstance) -> None:
    bundle = gen_construction(five_sets, ell=2)
    bundle.circuit = gen_construction(five_sets, ell=2, negated=True).circuit
    problems = check_bundle_coherence(bundle)
    assert problems
    assert all(p.startswith("circuit outputs") for p in problems)


def test_coherence_guard(two_disjoint: SetCoverInstance) -> None:
    with pytest.raises(GuardExceeded):
        check_bundle_coherence(gen_estimation(two_disjoint, m=2),
                               DEFAULT_GUARDS.with_overrides({"generator_max_seed_bits": 4}))


def test_adjudicate_exact(five_sets: SetCoverInstance) -> None:
    bundle = gen_construction(five_sets, ell=2)
    verdict = adjudicate(bundle, junta_tree(five_sets, ["s1", "s2"], 2))
    assert verdict.passed
    assert verdict.distance == 0
    assert verdict.eps == Fraction(1, 36)
    verdict = adjudicate(bundle, constant_tree(0, 10))
    assert not verdict.passed
    assert verdict.distance == Fraction(1, 2)
    assert adjudicate(bundle, constant_tree(0, 10), eps=Fraction(1, 2)).passed


def test_adjudicate_negated_with_dnf(five_sets: SetCoverInstance) -> None:
    bundle = gen_construction(five_sets, ell=2, negated=True)
    verdict = adjudicate(bundle, cover_dnf(five_sets, ["s1", "s2"], 2))
    assert verdict.passed
    assert verdict.hypothesis_size == 4


def test_adjudicate_strict_size(five_sets: SetCoverInstance) -> None:
    tree = junta_tree(five_sets, ["s1", "s2"], 2)
    assert adjudicate(gen_construction(five_sets, ell=2, strict_size=tree.size), tree).passed
    verdict = adjudicate(gen_construction(five_sets, ell=2, strict_size=tree.size - 1), tree)
    assert not verdict.passed
    assert verdict.size_cap == tree.size - 1
    assert "exceeds the cap" in verdict.reason


def test_adjudicate_monte_carlo(five_sets: SetCoverInstance) -> None:
    bundle = gen_construction(five_sets, ell=2)
    verdict = adjudicate(bundle, junta_tree(five_sets, ["s1", "s2"], 2), mode="monte_carlo", samples=2000, seed=1)
    assert verdict.passed
    assert verdict.distance == 0
    assert verdict.radius is not None
    assert not adjudicate(bundle, constant_tree(1, 10), mode="monte_carlo", samples=2000, seed=1).passed
    with pytest.raises(DomainError):
        adjudicate(bundle, constant_tree(1, 10), mode="guess")
    with pytest.raises(DomainError):
        adjudicate(bundle, constant_tree(1, 4))


def test_adjudicate_estimation(two_disjoint: SetCoverInstance) -> None:
    bundle = gen_estimation(two_disjoint, m=2)
    tree = xor_junta_tree(two_disjoint, ["a", "b"], 2)
    verdict = adjudicate(bundle, tree)
    assert verdict.passed
    assert tree.depth == bundle.metadata["yes_certificate"]["depth"]
    assert not adjudicate(bundle, constant_tree(0, 8)).passed


def test_verdict_to_json(five_sets: SetCoverInstance) -> None:
    verdict = adjudicate(gen_construction(five_sets, ell=2), constant_tree(0, 10))
    document = verdict_to_json(verdict)
    assert document["distance"] == "1/2"
    assert document["eps"] == "1/36"
    assert document["passed"] is False
    json.dumps(document)


def test_grid_points() -> None:
    grid = GridSpec(max_sets=2, max_universe=2, ells=(2, 3), flip_zero=True)
    points = list(grid.points())
    assert len(points) == 10
    inst, params = points[0]
    assert params.ell == 2
    assert params.flip == (0,) * inst.n
    assert points[1][1].ell == 3
    assert params.trials == DEFAULT_TRIALS
    assert params.law_trials == LAW_TRIALS
    assert next(GridSpec(max_sets=1, max_universe=1, law_trials=5).points())[1].law_trials == 5


def test_run_suite() -> None:
    reports = run_suite(["junta-learning", "dist-equivalence"], GridSpec(max_sets=2, max_universe=2), workers=2)
    assert len(reports) == 10
    assert [r.claim_id for r in reports[:2]] == ["junta-learning", "dist-equivalence"]
    assert all(r.verdict for r in reports)
    assert run_suite([]) == []
    with pytest.raises(UnknownClaim):
        run_suite(["junta-learning", "no-such-claim"], GridSpec(max_sets=1, max_universe=1))
