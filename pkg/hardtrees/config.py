import dataclasses
import os
from typing import Mapping, Optional

from hardtrees.errors import DomainError

ENV_PREFIX = "HARDTREES_"
GUARD_ENV_PREFIX = ENV_PREFIX + "GUARD_"


@dataclasses.dataclass(frozen=True)
class Guards:
    """
    Upper limits for every exponential routine. Exceeding one raises GuardExceeded instead of running for hours.
    """
    exact_opt_max_sets: int = 30  # Branch-and-bound for opt(S)
    tree_dp_max_vars: int = 16  # Depth- and size-budgeted tree optimizers
    tree_dp_max_depth: int = 6
    tree_dp_max_size: int = 8
    frontier_max_vars: int = 10  # Average-depth Pareto frontier over all trees
    dnf_max_vars: int = 8  # Exhaustive DNF enumeration
    dnf_max_terms: int = 3
    dnf_max_combinations: int = 2_000_000
    pmf_check_max_bits: int = 20  # Exhaustive pmf comparisons over all strings
    generator_max_seed_bits: int = 16  # Exhaustive seed pushforward
    restriction_max_z_bits: int = 16  # Exhaustive restriction search, sampled above
    restriction_samples: int = 4096
    junta_max_vars: int = 20
    junta_max_k: int = 4
    product_max_atoms: int = 10 ** 6  # Support of XOR-composed product distributions
    exact_support_max_atoms: int = 2 ** 20  # Materialized supports of amplified distributions

    def with_overrides(self, overrides: Mapping[str, int]) -> "Guards":
        """
        Returns a copy with some guards replaced

        :param overrides: Field names mapped to their new value
        :return: The updated guards
        """
        names = {field.name for field in dataclasses.fields(self)}
        for name, value in overrides.items():
            if name not in names:
                raise DomainError(f"Unknown guard '{name}'")
            if value < 0:
                raise DomainError(f"Guard '{name}' must be non-negative, got {value}")
        return dataclasses.replace(self, **overrides)


DEFAULT_GUARDS = Guards()


def parse_guard_overrides(text: str) -> dict:
    """
    Parses a "key=value[,key=value...]" guard override string

    :param text: The override string, e.g. "tree_dp_max_depth=4,dnf_max_terms=2"
    :return: Mapping from guard name to integer value
    """
    overrides = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        key, sep, value = item.partition("=")
        if not sep:
            raise DomainError(f"Guard override '{item}' is not of the form key=value")
        try:
            overrides[key.strip()] = int(value.strip().replace("_", ""))
        except ValueError:
            raise DomainError(f"Guard override '{item}' does not have an integer value")
    return overrides


def guards_from_env(environ: Optional[Mapping[str, str]] = None, base: Guards = DEFAULT_GUARDS) -> Guards:
    """
    Applies HARDTREES_GUARD_<FIELD> environment variables on top of the given guards

    :param environ: The environment to read (defaults to os.environ)
    :param base: The guards to start from
    :return: The guards with environment overrides applied
    """
    environ = os.environ if environ is None else environ
    overrides = {}
    for field in dataclasses.fields(Guards):
        value = environ.get(GUARD_ENV_PREFIX + field.name.upper())
        if value is not None:
            overrides.update(parse_guard_overrides(f"{field.name}={value}"))
    return base.with_overrides(overrides)


def env_int(name: str, default: int, environ: Optional[Mapping[str, str]] = None) -> int:
    """
    Reads an integer setting such as HARDTREES_ELL, falling back to a default

    :param name: The setting name without prefix, e.g. "ELL"
    :param default: Value used when the variable is unset
    :param environ: The environment to read (defaults to os.environ)
    :return: The integer value
    """
    environ = os.environ if environ is None else environ
    value = environ.get(ENV_PREFIX + name)
    if value is None:
        return default
    try:
        return int(value)
    except ValueError:
        raise DomainError(f"Environment variable {ENV_PREFIX + name} must be an integer, got '{value}'")
