import dataclasses
from typing import Dict, List, Sequence, Tuple

import numpy as np

from hardtrees.bits import Bits
from hardtrees.errors import DomainError
from hardtrees.setcover import SetCoverInstance

GATE_KINDS = ("AND", "OR", "NOT", "XOR")


@dataclasses.dataclass(frozen=True)
class Gate:
    gate_id: int
    kind: str
    operands: Tuple[str, ...]  # "x<j>" for input j, "g<i>" for gate i


@dataclasses.dataclass(frozen=True)
class Circuit:
    inputs: int
    gates: Tuple[Gate, ...]
    output: int  # Id of the output gate

    def __post_init__(self) -> None:
        defined = set()
        for gate in self.gates:
            if gate.kind not in GATE_KINDS:
                raise DomainError(f"Gate g{gate.gate_id} has unknown kind '{gate.kind}'")
            if gate.gate_id in defined:
                raise DomainError(f"Gate g{gate.gate_id} defined twice")
            if not gate.operands or (gate.kind == "NOT" and len(gate.operands) != 1):
                raise DomainError(f"Gate g{gate.gate_id} has {len(gate.operands)} operands")
            for operand in gate.operands:
                kind, index = _split_operand(operand)
                if kind == "x" and not 0 <= index < self.inputs:
                    raise DomainError(f"Gate g{gate.gate_id} reads missing input {operand}")
                if kind == "g" and index not in defined:
                    raise DomainError(f"Gate g{gate.gate_id} reads {operand} before it is defined")
            defined.add(gate.gate_id)
        if self.output not in defined:
            raise DomainError(f"Output gate g{self.output} is not defined")

    def evaluate(self, x: Sequence[int]) -> int:
        return int(self.evaluate_batch(np.array([x], dtype=np.uint8))[0])

    def evaluate_batch(self, xs: np.ndarray) -> np.ndarray:
        """
        Evaluates the circuit on every row of a (k, inputs) bit array
        """
        xs = np.asarray(xs, dtype=np.uint8)
        if xs.ndim != 2 or xs.shape[1] != self.inputs:
            raise DomainError(f"Expected inputs of shape (k, {self.inputs}), got {xs.shape}")
        wires: Dict[int, np.ndarray] = {}

        def _wire(operand: str) -> np.ndarray:
            kind, index = _split_operand(operand)
            return xs[:, index] if kind == "x" else wires[index]

        for gate in self.gates:
            values = [_wire(o) for o in gate.operands]
            if gate.kind == "NOT":
                wires[gate.gate_id] = 1 - values[0]
            elif gate.kind == "AND":
                wires[gate.gate_id] = np.minimum.reduce(values)
            elif gate.kind == "OR":
                wires[gate.gate_id] = np.maximum.reduce(values)
            else:
                wires[gate.gate_id] = np.bitwise_xor.reduce(values)
        return wires[self.output].astype(np.uint8)

    def depth(self, count_not: bool = True) -> int:
        """
        Gate levels on the longest input-to-output path. The negated construction has depth 3 when NOT gates
        count as a level and depth 2 when only XOR and OR levels are counted.

        :param count_not: Whether NOT gates add a level
        :return: The depth, not counting the inputs themselves
        """
        levels: Dict[int, int] = {}
        for gate in self.gates:
            below = max((levels[i] for k, i in map(_split_operand, gate.operands) if k == "g"), default=0)
            levels[gate.gate_id] = below + (0 if gate.kind == "NOT" and not count_not else 1)
        return levels[self.output]

    def gate_counts(self) -> Dict[str, int]:
        counts = {kind: 0 for kind in GATE_KINDS}
        for gate in self.gates:
            counts[gate.kind] += 1
        return counts


def _split_operand(operand: str) -> Tuple[str, int]:
    if len(operand) < 2 or operand[0] not in "xg" or not operand[1:].isdigit():
        raise DomainError(f"Operand '{operand}' is neither x<j> nor g<i>")
    return operand[0], int(operand[1:])


def format_netlist(circuit: Circuit) -> str:
    lines = [f"inputs {circuit.inputs}"]
    lines += [f"g{gate.gate_id} = {gate.kind} {' '.join(gate.operands)}" for gate in circuit.gates]
    lines.append(f"output g{circuit.output}")
    return "\n".join(lines) + "\n"


def parse_netlist(text: str) -> Circuit:
    """
    Parses the "inputs <k>" / "g<i> = <KIND> <operand>..." / "output g<i>" netlist format
    """
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if len(lines) < 2:
        raise DomainError("Netlist needs an inputs header and an output line")
    header = lines[0].split()
    if len(header) != 2 or header[0] != "inputs" or not header[1].isdigit():
        raise DomainError(f"Bad netlist header '{lines[0]}'")
    footer = lines[-1].split()
    if len(footer) != 2 or footer[0] != "output":
        raise DomainError(f"Bad netlist output line '{lines[-1]}'")

    gates: List[Gate] = []
    for line in lines[1:-1]:
        name, sep, body = line.partition("=")
        parts = body.split()
        kind, index = _split_operand(name.strip())
        if not sep or kind != "g" or not parts:
            raise DomainError(f"Bad gate line '{line}'")
        gates.append(Gate(gate_id=index, kind=parts[0], operands=tuple(parts[1:])))
    output_kind, output = _split_operand(footer[1])
    if output_kind != "g":
        raise DomainError(f"Output must be a gate, got '{footer[1]}'")
    return Circuit(inputs=int(header[1]), gates=tuple(gates), output=output)


def emit_circuit(inst: SetCoverInstance, ell: int, negated: bool) -> Circuit:
    """
    One XOR gate per block of ell inputs, an OR over all of them, and a NOT on top for the negated function

    :param inst: The normalized instance (only its number of sets matters)
    :param ell: Block length
    :param negated: Whether to add the NOT gate
    :return: The circuit over n*ell inputs
    """
    if ell < 1:
        raise DomainError(f"Block length must be positive, got {ell}")
    n = inst.n
    gates = [Gate(i, "XOR", tuple(f"x{i * ell + j}" for j in range(ell))) for i in range(n)]
    gates.append(Gate(n, "OR", tuple(f"g{i}" for i in range(n))))
    if negated:
        gates.append(Gate(n + 1, "NOT", (f"g{n}",)))
    return Circuit(inputs=n * ell, gates=tuple(gates), output=gates[-1].gate_id)


def emit_xor_circuit(base: Circuit, m: int) -> Circuit:
    """
    m copies of base on disjoint input blocks feeding one XOR gate. A single copy is returned unchanged.
    """
    if m < 1:
        raise DomainError(f"Need at least one copy, got {m}")
    if m == 1:
        return base

    gates: List[Gate] = []
    outputs = []
    next_id = 0
    for copy in range(m):
        renamed: Dict[int, int] = {}
        for gate in base.gates:
            operands = []
            for operand in gate.operands:
                kind, index = _split_operand(operand)
                operands.append(f"x{index + copy * base.inputs}" if kind == "x" else f"g{renamed[index]}")
            renamed[gate.gate_id] = next_id
            gates.append(Gate(next_id, gate.kind, tuple(operands)))
            next_id += 1
        outputs.append(f"g{renamed[base.output]}")
    gates.append(Gate(next_id, "XOR", tuple(outputs)))
    return Circuit(inputs=m * base.inputs, gates=tuple(gates), output=next_id)


def circuit_agrees(circuit: Circuit, points: Sequence[Bits], values: Sequence[int]) -> bool:
    """
    :return: Whether the circuit outputs values[i] on points[i] for every i
    """
    if not points:
        return True
    outputs = circuit.evaluate_batch(np.array(points, dtype=np.uint8))
    return bool(np.array_equal(outputs, np.array(values, dtype=np.uint8)))
