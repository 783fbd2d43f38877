import pytest

from hardtrees.config import DEFAULT_GUARDS, env_int, guards_from_env, parse_guard_overrides
from hardtrees.errors import DomainError


def test_parse_guard_overrides() -> None:
    assert parse_guard_overrides("") == {}
    assert parse_guard_overrides("tree_dp_max_depth=4, dnf_max_terms=2") == {"tree_dp_max_depth": 4,
                                                                           "dnf_max_terms": 2}
    assert parse_guard_overrides("product_max_atoms=1_000") == {"product_max_atoms": 1000}


def test_parse_guard_overrides_malformed() -> None:
    with pytest.raises(DomainError):
        parse_guard_overrides("tree_dp_max_depth")
    with pytest.raises(DomainError):
        parse_guard_overrides("tree_dp_max_depth=deep")


def test_with_overrides_keeps_defaults_untouched() -> None:
    guards = DEFAULT_GUARDS.with_overrides({"dnf_max_terms": 1})
    assert guards.dnf_max_terms == 1
    assert DEFAULT_GUARDS.dnf_max_terms == 3
    assert guards.tree_dp_max_depth == DEFAULT_GUARDS.tree_dp_max_depth


def test_with_overrides_rejects_unknown_and_negative() -> None:
    with pytest.raises(DomainError):
        DEFAULT_GUARDS.with_overrides({"no_such_guard": 1})
    with pytest.raises(DomainError):
        DEFAULT_GUARDS.with_overrides({"dnf_max_terms": -1})


def test_guards_from_env() -> None:
    environ = {"HARDTREES_GUARD_TREE_DP_MAX_DEPTH": "3", "UNRELATED": "x"}
    guards = guards_from_env(environ)
    assert guards.tree_dp_max_depth == 3
    assert guards.dnf_max_vars == DEFAULT_GUARDS.dnf_max_vars
    with pytest.raises(DomainError):
        guards_from_env({"HARDTREES_GUARD_DNF_MAX_VARS": "many"})


def test_env_int() -> None:
    assert env_int("ELL", 2, {}) == 2
    assert env_int("ELL", 2, {"HARDTREES_ELL": "5"}) == 5
    with pytest.raises(DomainError):
        env_int("ELL", 2, {"HARDTREES_ELL": "five"})
