import json

import pytest

from hardtrees.setcover import SetCoverInstance, parse_instance

FIVE_SETS = {
    "sets": ["s1", "s2", "s3", "s4", "s5"],
    "universe": ["u1", "u2", "u3", "u4"],
    "edges": [["s1", "u1"], ["s1", "u2"], ["s3", "u2"], ["s1", "u3"], ["s3", "u3"], ["s4", "u3"],
              ["s2", "u4"], ["s5", "u4"]],
}


@pytest.fixture()
def five_sets() -> SetCoverInstance:
    """
    u1 = 10000, u2 = 10100, u3 = 10110, u4 = 01001; opt = 2 with cover {s1, s2}
    """
    return parse_instance(json.dumps(FIVE_SETS))


@pytest.fixture()
def two_disjoint() -> SetCoverInstance:
    """
    Two singleton sets over two elements: u1 = 10, u2 = 01, opt = 2
    """
    return parse_instance(json.dumps({"sets": ["a", "b"], "universe": ["x", "y"],
                                      "edges": [["a", "x"], ["b", "y"]]}))


@pytest.fixture()
def one_set() -> SetCoverInstance:
    """
    A single set covering a single element, opt = 1
    """
    return parse_instance(json.dumps({"sets": ["a"], "universe": ["x"], "edges": [["a", "x"]]}))
