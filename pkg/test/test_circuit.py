import numpy as np
import pytest

from hardtrees.circuit import Circuit, Gate, circuit_agrees, emit_circuit, emit_xor_circuit, format_netlist, \
    parse_netlist
from hardtrees.construction import build_gamma, negate
from hardtrees.errors import DomainError
from hardtrees.parity import all_seeds, amplify_function
from hardtrees.setcover import SetCoverInstance
from hardtrees.xor import XorComposedFunction


def test_emit_circuit_shape(five_sets: SetCoverInstance) -> None:
    circuit = emit_circuit(five_sets, 2, negated=False)
    assert circuit.inputs == 10
    assert circuit.gate_counts() == {"AND": 0, "OR": 1, "NOT": 0, "XOR": 5}
    assert circuit.depth() == 2

    negated = emit_circuit(five_sets, 2, negated=True)
    assert negated.gate_counts()["NOT"] == 1
    assert negated.depth() == 3
    assert negated.depth(count_not=False) == 2


@pytest.mark.parametrize("negated", [False, True])
@pytest.mark.parametrize("ell", [2, 3])
def test_circuit_computes_amplified_function(two_disjoint: SetCoverInstance, ell: int, negated: bool) -> None:
    amp = amplify_function(build_gamma(two_disjoint), ell)
    if negated:
        amp = negate(amp)
    circuit = emit_circuit(two_disjoint, ell, negated)
    support = list(amp.support())
    assert circuit_agrees(circuit, support, [amp.evaluate(y) for y in support])


def test_circuit_is_blockwise_parity_or_everywhere(two_disjoint: SetCoverInstance) -> None:
    circuit = emit_circuit(two_disjoint, 2, negated=False)
    inputs = all_seeds(4)
    expected = ((inputs[:, 0] ^ inputs[:, 1]) | (inputs[:, 2] ^ inputs[:, 3])).astype(np.uint8)
    assert np.array_equal(circuit.evaluate_batch(inputs), expected)


def test_xor_circuit(two_disjoint: SetCoverInstance) -> None:
    base = emit_circuit(two_disjoint, 2, negated=False)
    assert emit_xor_circuit(base, 1) is base
    circuit = emit_xor_circuit(base, 2)
    assert circuit.inputs == 8
    assert circuit.depth() == 3
    composed = XorComposedFunction(amplify_function(build_gamma(two_disjoint), 2), 2)
    support = list(composed.support())
    assert circuit_agrees(circuit, support, [composed.evaluate(y) for y in support])


def test_netlist_text_form(five_sets: SetCoverInstance) -> None:
    circuit = emit_circuit(five_sets, 2, negated=True)
    text = format_netlist(circuit)
    assert text.startswith("inputs 10\ng0 = XOR x0 x1\n")
    assert text.endswith("g5 = OR g0 g1 g2 g3 g4\ng6 = NOT g5\noutput g6\n")
    assert parse_netlist(text) == circuit


@pytest.mark.parametrize("text", [
    "",
    "inputs two\ng0 = NOT x0\noutput g0\n",
    "inputs 1\ng0 = NAND x0\noutput g0\n",
    "inputs 1\ng0 = NOT x1\noutput g0\n",
    "inputs 1\ng0 = NOT g1\noutput g0\n",
    "inputs 2\ng0 = NOT x0 x1\noutput g0\n",
    "inputs 1\ng0 = NOT x0\noutput x0\n",
    "inputs 1\ng0 = NOT x0\noutput g3\n",
    "inputs 1\ng0 NOT x0\noutput g0\n",
])
def test_parse_netlist_rejects(text: str) -> None:
    with pytest.raises(DomainError):
        parse_netlist(text)


def test_gate_ids_are_unique() -> None:
    with pytest.raises(DomainError):
        Circuit(inputs=1, gates=(Gate(0, "NOT", ("x0",)), Gate(0, "NOT", ("x0",))), output=0)


def test_evaluate_single_input() -> None:
    circuit = Circuit(inputs=2, gates=(Gate(0, "AND", ("x0", "x1")), Gate(1, "NOT", ("g0",))), output=1)
    assert [circuit.evaluate(x) for x in ((0, 0), (0, 1), (1, 0), (1, 1))] == [1, 1, 1, 0]
    with pytest.raises(DomainError):
        circuit.evaluate((0, 0, 0))
