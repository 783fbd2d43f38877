from fractions import Fraction

import numpy as np
import pytest

from hardtrees.config import DEFAULT_GUARDS
from hardtrees.construction import build_dist, build_gamma, negate
from hardtrees.errors import DomainError, GuardExceeded
from hardtrees.hypotheses import ABORT, Leaf, abort_prob, avg_depth, avg_width, constant_tree, cover_dnf, \
    dist_exact, junta_tree, random_tree
from hardtrees.oracles import AtomTable, ExampleOracle, find_dnf_restriction, find_restriction, junta_learner, \
    learn_junta_from_examples, min_dist_dnf, min_error_with_avg_depth, min_error_with_avg_width, opt_tree_dp, \
    opt_tree_size_dp
from hardtrees.parity import amplify_dist, amplify_function, build_generator
from hardtrees.setcover import SetCoverInstance, exact_opt, instance_grid, serialize_instance


def test_atom_table(two_disjoint: SetCoverInstance) -> None:
    table = AtomTable(build_gamma(two_disjoint), build_dist(two_disjoint))
    assert len(table) == 3
    assert table.denominator == 4
    assert table.weights == (2, 1, 1)
    assert table.ones == 0b110
    assert table.error_of(0) == 2
    assert table.error_of(table.full) == 2
    assert table.cap(Fraction(7, 4), strict=True) == 6
    assert table.cap(Fraction(7, 4), strict=False) == 7
    with pytest.raises(DomainError):
        AtomTable(build_gamma(two_disjoint), amplify_dist(build_dist(two_disjoint), 2))


def test_opt_tree_dp_on_base(two_disjoint: SetCoverInstance) -> None:
    gamma, dist = build_gamma(two_disjoint), build_dist(two_disjoint)
    errors = [opt_tree_dp(gamma, dist, d)[1] for d in range(3)]
    assert errors == [Fraction(1, 2), Fraction(1, 4), 0]
    tree, _ = opt_tree_dp(gamma, dist, 0)
    assert tree.root == Leaf(0)
    tree, error = opt_tree_dp(gamma, dist, 2)
    assert tree.depth <= 2
    assert dist_exact(tree, gamma, dist) == error


def test_opt_tree_dp_on_amplified(two_disjoint: SetCoverInstance) -> None:
    f = amplify_function(build_gamma(two_disjoint), 2)
    dist = amplify_dist(build_dist(two_disjoint), 2)
    errors = [opt_tree_dp(f, dist, d)[1] for d in range(5)]
    # A single bit of a block says nothing about its parity
    assert errors == [Fraction(1, 2), Fraction(1, 2), Fraction(1, 4), Fraction(1, 4), 0]


def test_opt_tree_dp_with_aborts(two_disjoint: SetCoverInstance) -> None:
    gamma, dist = build_gamma(two_disjoint), build_dist(two_disjoint)
    tree, error = opt_tree_dp(gamma, dist, 0, allow_abort=Fraction(1))
    assert error == 0
    assert tree.root == Leaf(ABORT)
    assert opt_tree_dp(gamma, dist, 0, allow_abort=Fraction(1), abort_strict=True)[1] == Fraction(1, 2)

    tree, error = opt_tree_dp(gamma, dist, 1, allow_abort=Fraction(3, 4))
    assert error == 0
    assert abort_prob(tree, dist) == Fraction(3, 4)
    assert opt_tree_dp(gamma, dist, 1, allow_abort=Fraction(1, 2))[1] == Fraction(1, 4)
    with pytest.raises(DomainError):
        opt_tree_dp(gamma, dist, 1, allow_abort=Fraction(-1))


def test_opt_tree_size_dp(two_disjoint: SetCoverInstance) -> None:
    gamma, dist = build_gamma(two_disjoint), build_dist(two_disjoint)
    results = [opt_tree_size_dp(gamma, dist, s) for s in (1, 2, 3)]
    assert [error for _, error in results] == [Fraction(1, 2), Fraction(1, 4), 0]
    assert all(tree.size <= s for (tree, _), s in zip(results, (1, 2, 3)))
    with pytest.raises(DomainError):
        opt_tree_size_dp(gamma, dist, 0)


def test_tree_guards(two_disjoint: SetCoverInstance) -> None:
    gamma, dist = build_gamma(two_disjoint), build_dist(two_disjoint)
    with pytest.raises(GuardExceeded):
        opt_tree_dp(gamma, dist, DEFAULT_GUARDS.tree_dp_max_depth + 1)
    with pytest.raises(GuardExceeded):
        opt_tree_size_dp(gamma, dist, DEFAULT_GUARDS.tree_dp_max_size + 1)
    with pytest.raises(GuardExceeded):
        opt_tree_dp(gamma, dist, 1, guards=DEFAULT_GUARDS.with_overrides({"tree_dp_max_vars": 1}))


def test_min_error_with_avg_depth(two_disjoint: SetCoverInstance) -> None:
    gamma, dist = build_gamma(two_disjoint), build_dist(two_disjoint)
    # Separating all three atoms costs 1 + 3/4 queries on average
    tree, error = min_error_with_avg_depth(gamma, dist, Fraction(7, 4), strict=False)
    assert error == 0
    assert avg_depth(tree, dist) == Fraction(7, 4)
    tree, error = min_error_with_avg_depth(gamma, dist, Fraction(7, 4))
    assert error == Fraction(1, 4)
    assert avg_depth(tree, dist) < Fraction(7, 4)
    assert min_error_with_avg_depth(gamma, dist, Fraction(1))[1] == Fraction(1, 2)
    assert min_error_with_avg_depth(gamma, dist, Fraction(0), strict=False)[1] == Fraction(1, 2)
    assert min_error_with_avg_depth(gamma, dist, Fraction(0)) == (None, None)


def test_min_error_with_avg_depth_and_aborts(two_disjoint: SetCoverInstance) -> None:
    gamma, dist = build_gamma(two_disjoint), build_dist(two_disjoint)
    tree, error = min_error_with_avg_depth(gamma, dist, Fraction(1), allow_abort=Fraction(3, 4), strict=False)
    assert error == 0
    assert abort_prob(tree, dist) <= Fraction(3, 4)
    assert avg_depth(tree, dist) <= 1


def test_min_dist_dnf(two_disjoint: SetCoverInstance) -> None:
    gamma_bar, dist = negate(build_gamma(two_disjoint)), build_dist(two_disjoint)
    formula, error = min_dist_dnf(gamma_bar, dist, 0, 2)
    assert formula.size == 0
    assert error == Fraction(1, 2)
    assert min_dist_dnf(gamma_bar, dist, 1, 1)[1] == Fraction(1, 4)
    formula, error = min_dist_dnf(gamma_bar, dist, 1, 2)
    assert error == 0
    assert formula.terms == (((0, 0), (1, 0)),)


def test_min_dist_dnf_on_amplified(two_disjoint: SetCoverInstance) -> None:
    f_bar = negate(amplify_function(build_gamma(two_disjoint), 2))
    dist = amplify_dist(build_dist(two_disjoint), 2)
    # A single literal accepts half of every parity class
    formula, error = min_dist_dnf(f_bar, dist, 1, 1)
    assert error == Fraction(1, 2)
    assert formula.size == 0
    # (y0 = y1 = 0) or (y0 = y1 = 1) reads the parity of the first block
    formula, error = min_dist_dnf(f_bar, dist, 2, 2)
    assert error <= Fraction(1, 4)
    assert dist_exact(formula, f_bar, dist) == error


def test_min_dist_dnf_guards(two_disjoint: SetCoverInstance) -> None:
    gamma_bar, dist = negate(build_gamma(two_disjoint)), build_dist(two_disjoint)
    with pytest.raises(GuardExceeded):
        min_dist_dnf(gamma_bar, dist, DEFAULT_GUARDS.dnf_max_terms + 1, 1)
    with pytest.raises(GuardExceeded):
        min_dist_dnf(gamma_bar, dist, 2, 2, DEFAULT_GUARDS.with_overrides({"dnf_max_combinations": 10}))
    with pytest.raises(DomainError):
        min_dist_dnf(gamma_bar, dist, -1, 1)


def test_min_error_with_avg_width(two_disjoint: SetCoverInstance) -> None:
    gamma_bar, dist = negate(build_gamma(two_disjoint)), build_dist(two_disjoint)
    formula, error = min_error_with_avg_width(gamma_bar, dist, Fraction(1), strict=False)
    assert error == 0
    assert avg_width(formula, dist) <= 1
    formula, error = min_error_with_avg_width(gamma_bar, dist, Fraction(1))
    assert error == Fraction(1, 4)
    assert avg_width(formula, dist) < 1
    assert min_error_with_avg_width(gamma_bar, dist, Fraction(0), strict=False)[1] == Fraction(1, 2)
    assert min_error_with_avg_width(gamma_bar, dist, Fraction(0)) == (None, None)


def test_find_restriction(two_disjoint: SetCoverInstance) -> None:
    gamma, dist = build_gamma(two_disjoint), build_dist(two_disjoint)
    tree = junta_tree(two_disjoint, ["a", "b"], 2)
    result = find_restriction(tree, gamma, dist, 2, Fraction(0), Fraction(7, 2))
    assert result.j == 1
    assert result.z == (0, 0)
    assert result.report.verdict
    assert result.report.claim_id == "tree-restriction"
    assert result.report.computed == 0
    assert dist_exact(result.hypothesis, gamma, dist) == 0
    assert avg_depth(result.hypothesis, dist) == Fraction(7, 4)


def test_find_restriction_with_aborts(two_disjoint: SetCoverInstance) -> None:
    gamma, dist = build_gamma(two_disjoint), build_dist(two_disjoint)
    tree = junta_tree(two_disjoint, ["a", "b"], 2)
    result = find_restriction(tree, gamma, dist, 2, Fraction(0), Fraction(7, 2), abort_delta=Fraction(0))
    assert result.report.claim_id == "tree-restriction-abort"
    assert result.report.verdict
    assert result.report.parameters["abort_bound"] == "0"


def test_find_restriction_exhausted(two_disjoint: SetCoverInstance) -> None:
    gamma, dist = build_gamma(two_disjoint), build_dist(two_disjoint)
    result = find_restriction(constant_tree(0, 4), gamma, dist, 2, Fraction(0), Fraction(0))
    assert not result.report.verdict
    assert result.z is None
    assert result.hypothesis is None
    with pytest.raises(DomainError):
        find_restriction(constant_tree(0, 6), gamma, dist, 2, Fraction(0), Fraction(0))


def test_find_restriction_samples_above_guard(two_disjoint: SetCoverInstance) -> None:
    gamma, dist = build_gamma(two_disjoint), build_dist(two_disjoint)
    tree = junta_tree(two_disjoint, ["a", "b"], 3)
    guards = DEFAULT_GUARDS.with_overrides({"restriction_max_z_bits": 2, "restriction_samples": 64})
    result = find_restriction(tree, gamma, dist, 3, Fraction(0), avg_depth(tree, amplify_dist(dist, 3)),
                              seed=4, guards=guards)
    assert result.report.verdict
    assert len(result.z) == 4


@pytest.mark.parametrize("abort", [False, True])
def test_find_restriction_on_instance_grid(abort: bool) -> None:
    for inst in instance_grid(3, 4):
        gamma, dist = build_gamma(inst), build_dist(inst)
        f, amp = amplify_function(gamma, 2), amplify_dist(dist, 2)
        rng = np.random.default_rng(inst.n)
        for _ in range(16):
            tree = random_tree(f.arity, int(rng.integers(1, 17)), rng, abort_rate=0.25 if abort else 0.0)
            delta = abort_prob(tree, amp) if abort else None
            result = find_restriction(tree, gamma, dist, 2, dist_exact(tree, f, amp), avg_depth(tree, amp),
                                      abort_delta=delta)
            assert result.report.verdict, f"{serialize_instance(inst)} {tree.to_json()}"


def test_find_dnf_restriction(two_disjoint: SetCoverInstance) -> None:
    gamma_bar, dist = negate(build_gamma(two_disjoint)), build_dist(two_disjoint)
    formula = cover_dnf(two_disjoint, ["a", "b"], 2)
    result = find_dnf_restriction(formula, gamma_bar, dist, 2, Fraction(0), Fraction(2))
    assert result.report.claim_id == "dnf-restriction"
    assert result.report.verdict
    assert result.z == (0, 0)
    assert result.hypothesis.terms == (((0, 0), (1, 0)),)
    assert avg_width(result.hypothesis, dist) == 1


def test_junta_learner(two_disjoint: SetCoverInstance) -> None:
    gamma, dist = build_gamma(two_disjoint), build_dist(two_disjoint)
    assert junta_learner(gamma, dist, 1) is None
    junta = junta_learner(gamma, dist, 2)
    assert junta.variables == (0, 1)
    assert junta.table == (0, 1, 1, 0)
    with pytest.raises(GuardExceeded):
        junta_learner(gamma, dist, DEFAULT_GUARDS.junta_max_k + 1)


@pytest.mark.parametrize("max_sets, max_universe", [(6, 2), (4, 4)])
def test_junta_learner_finds_opt_on_instance_grid(max_sets: int, max_universe: int) -> None:
    guards = DEFAULT_GUARDS.with_overrides({"junta_max_k": 6})
    for inst in instance_grid(max_sets, max_universe):
        gamma, dist = build_gamma(inst), build_dist(inst)
        opt = exact_opt(inst)[0]
        for k in range(inst.n + 1):
            assert (junta_learner(gamma, dist, k, guards) is not None) == (opt <= k), serialize_instance(inst)


def test_junta_learner_on_amplified(five_sets: SetCoverInstance) -> None:
    f = amplify_function(build_gamma(five_sets), 2)
    dist = amplify_dist(build_dist(five_sets), 2)
    assert junta_learner(f, dist, 3) is None
    junta = junta_learner(f, dist, 4)
    assert junta.variables == (0, 1, 2, 3)
    assert all(junta.evaluate(y) == f.evaluate(y) for y, _ in dist.atoms())


def test_learn_junta_from_examples(five_sets: SetCoverInstance) -> None:
    f = amplify_function(build_gamma(five_sets), 2)
    oracle = ExampleOracle(f, build_generator(five_sets, 2), seed=1)
    junta = learn_junta_from_examples(oracle, 4, 400)
    assert oracle.drawn == 400
    assert junta.variables == (0, 1, 2, 3)
    assert all(junta.evaluate(y) == f.evaluate(y) for y in f.support())
    assert learn_junta_from_examples(oracle, 0, 50) is None


def test_example_oracle_validation(five_sets: SetCoverInstance) -> None:
    f = amplify_function(build_gamma(five_sets), 2)
    with pytest.raises(DomainError):
        ExampleOracle(f, build_generator(five_sets, 3))
    with pytest.raises(DomainError):
        ExampleOracle(f, build_generator(five_sets, 2)).draw(0)
