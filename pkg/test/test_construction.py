from fractions import Fraction

import pytest

from hardtrees.construction import NEGATED, PLAIN, ExplicitDistribution, PartialFunctionTable, ProductDistribution, \
    build_dist, build_gamma, conjunction_consistency, disjunction_consistency, distribution_from_json, \
    function_from_json, negate, support_mass_check
from hardtrees.config import DEFAULT_GUARDS
from hardtrees.errors import DomainError, GuardExceeded
from hardtrees.setcover import SetCoverInstance, exact_opt, is_cover


def test_gamma_on_five_sets(five_sets: SetCoverInstance) -> None:
    gamma = build_gamma(five_sets)
    assert gamma.arity == 5
    assert gamma.label == PLAIN
    assert gamma.evaluate((0, 0, 0, 0, 0)) == 0
    for encoding in five_sets.neighbourhoods:
        assert gamma.evaluate(encoding) == 1
    assert not gamma.defined_at((1, 1, 1, 1, 1))
    with pytest.raises(DomainError):
        gamma.evaluate((1, 1, 1, 1, 1))


def test_dist_on_five_sets(five_sets: SetCoverInstance) -> None:
    dist = build_dist(five_sets)
    assert dist.pmf((0, 0, 0, 0, 0)) == Fraction(1, 2)
    assert dist.pmf((1, 0, 1, 1, 0)) == Fraction(1, 8)
    assert dist.pmf((1, 1, 1, 1, 1)) == 0
    assert sum(p for _, p in dist.atoms()) == 1
    assert support_mass_check(build_gamma(five_sets), dist) is None


def test_negate_twice_is_identity(five_sets: SetCoverInstance) -> None:
    gamma = build_gamma(five_sets)
    gamma_bar = negate(gamma)
    assert gamma_bar.label == NEGATED
    assert gamma_bar.evaluate((0, 0, 0, 0, 0)) == 1
    assert all(gamma_bar.evaluate(x) == 1 - gamma.evaluate(x) for x in gamma.support())
    assert negate(gamma_bar) == gamma


def test_consistency_matches_covers(five_sets: SetCoverInstance) -> None:
    for cover in (["s1", "s2"], ["s1", "s5"], ["s1", "s2", "s3"], ["s4", "s5"], ["s3", "s2"], ["s1"]):
        expected = is_cover(five_sets, cover)
        assert disjunction_consistency(five_sets, cover) == expected
        assert conjunction_consistency(five_sets, cover) == expected


def test_opt_is_smallest_consistent_disjunction(two_disjoint: SetCoverInstance) -> None:
    opt, cover = exact_opt(two_disjoint)
    assert opt == 2
    assert disjunction_consistency(two_disjoint, cover)
    assert not disjunction_consistency(two_disjoint, ["a"])
    assert not disjunction_consistency(two_disjoint, ["b"])


def test_with_flipped(five_sets: SetCoverInstance) -> None:
    gamma = build_gamma(five_sets)
    mutant = gamma.with_flipped((0, 0, 0, 0, 0))
    assert mutant.evaluate((0, 0, 0, 0, 0)) == 1
    assert mutant != gamma
    with pytest.raises(DomainError):
        gamma.with_flipped((1, 1, 1, 1, 1))


def test_table_validation() -> None:
    with pytest.raises(DomainError):
        PartialFunctionTable(2, [(0, 0)], [0, 1])
    with pytest.raises(DomainError):
        PartialFunctionTable(2, [(0, 0, 0)], [0])
    with pytest.raises(DomainError):
        PartialFunctionTable(2, [(0, 0)], [2])
    with pytest.raises(DomainError):
        PartialFunctionTable(2, [(0, 0), (0, 0)], [0, 1])


def test_distribution_validation() -> None:
    with pytest.raises(DomainError):
        ExplicitDistribution(1, [((0,), Fraction(1, 2))])
    with pytest.raises(DomainError):
        ExplicitDistribution(1, [((0,), Fraction(1)), ((1,), Fraction(0))])
    with pytest.raises(DomainError):
        ExplicitDistribution(1, [((0,), Fraction(1, 2)), ((0,), Fraction(1, 2))])


def test_json_forms(five_sets: SetCoverInstance) -> None:
    gamma = build_gamma(five_sets)
    assert function_from_json(gamma.to_json()) == gamma
    dist = build_dist(five_sets)
    assert distribution_from_json(dist.to_json()) == dist


def test_product_distribution(two_disjoint: SetCoverInstance) -> None:
    dist = build_dist(two_disjoint)
    product = ProductDistribution(dist, 2)
    atoms = dict(product.atoms())
    assert len(atoms) == 9
    assert sum(atoms.values()) == 1
    assert product.pmf((0, 0, 1, 0)) == Fraction(1, 8)
    assert product.pmf((1, 1, 0, 0)) == 0
    with pytest.raises(GuardExceeded):
        list(ProductDistribution(dist, 2, DEFAULT_GUARDS.with_overrides({"product_max_atoms": 8})).atoms())
