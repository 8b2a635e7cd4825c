"""Circuit ingestion: OpenQASM 2 subset / json-gates parsing and ASAP staging."""
from __future__ import annotations

import json
import math
import operator
from collections import defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import pyparsing as pp

from .errors import CircuitError

FORMATS = ("qasm2-subset", "json-gates")


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: Tuple[int, ...]
    params: Tuple[float, ...] = ()
    index: int = 0

    def __post_init__(self) -> None:
        if self.kind == "cz":
            if len(self.qubits) != 2 or self.qubits[0] == self.qubits[1]:
                raise CircuitError(f"cz needs two distinct qubits, got {list(self.qubits)}")
            if self.params:
                raise CircuitError("cz takes no parameters")
        elif self.kind == "u3":
            if len(self.qubits) != 1 or len(self.params) != 3:
                raise CircuitError("u3 needs one qubit and three angles")
        else:
            raise CircuitError(f"unsupported gate kind '{self.kind}'")

    @property
    def is_two_qubit(self) -> bool:
        return self.kind == "cz"

    def other(self, qubit: int) -> int:
        a, b = self.qubits
        return b if qubit == a else a

    def __repr__(self) -> str:
        if self.kind == "cz":
            return f"CZ#{self.index}({self.qubits[0]},{self.qubits[1]})"
        return f"U3#{self.index}(q{self.qubits[0]})"


@dataclass(frozen=True)
class GateStage:
    kind: str  # "rydberg" | "oneq"
    t: int
    gates: Tuple[Gate, ...]

    @property
    def qubits(self) -> List[int]:
        return sorted(q for g in self.gates for q in g.qubits)


@dataclass
class ParsedCircuit:
    num_qubits: int
    gates: List[Gate] = field(default_factory=list)


@dataclass
class StagedCircuit:
    num_qubits: int
    stages: List[GateStage] = field(default_factory=list)

    @property
    def g1(self) -> int:
        return sum(len(s.gates) for s in self.stages if s.kind == "oneq")

    @property
    def g2(self) -> int:
        return sum(len(s.gates) for s in self.stages if s.kind == "rydberg")

    @property
    def rydberg_stages(self) -> List[GateStage]:
        return [s for s in self.stages if s.kind == "rydberg"]

    @property
    def num_rydberg_stages(self) -> int:
        return len(self.rydberg_stages)

    def rydberg_stage(self, t: int) -> GateStage:
        return self.rydberg_stages[t - 1]

    def oneq_after(self, t: int) -> List[GateStage]:
        """1Q stages that execute after Rydberg stage t (t = 0: before the first one)."""
        return [s for s in self.stages if s.kind == "oneq" and s.t == t]

    def gates(self) -> List[Gate]:
        return sorted((g for s in self.stages for g in s.gates), key=lambda g: g.index)

    def stage_index_of(self) -> Dict[Gate, int]:
        return {g: t for t, s in enumerate(self.rydberg_stages, start=1) for g in s.gates}


# -- OpenQASM 2 subset ------------------------------------------------------

_BINARY = {"+": operator.add, "-": operator.sub, "*": operator.mul, "/": operator.truediv}


def _fold_sign(tokens):
    sign, value = tokens[0]
    return -value if sign == "-" else value


def _fold_binary(tokens):
    items = tokens[0]
    value = items[0]
    for op, operand in zip(items[1::2], items[2::2]):
        if op == "/" and operand == 0:
            raise pp.ParseFatalException("", 0, "division by zero in gate parameter")
        value = _BINARY[op](value, operand)
    return value


@lru_cache(maxsize=1)
def _qasm_grammar() -> pp.ParserElement:
    semi = pp.Suppress(";")
    ident = pp.Word(pp.alphas + "_", pp.alphanums + "_")
    integer = pp.Word(pp.nums).set_parse_action(lambda t: int(t[0]))
    number = pp.Regex(r"(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?").set_parse_action(lambda t: float(t[0]))
    pi = pp.CaselessKeyword("pi").set_parse_action(lambda: math.pi)
    expr = pp.infix_notation(
        number | pi,
        [
            (pp.one_of("+ -"), 1, pp.OpAssoc.RIGHT, _fold_sign),
            (pp.one_of("* /"), 2, pp.OpAssoc.LEFT, _fold_binary),
            (pp.one_of("+ -"), 2, pp.OpAssoc.LEFT, _fold_binary),
        ],
    )
    qubit_ref = pp.Group(ident("reg") + pp.Suppress("[") + integer("index") + pp.Suppress("]"))
    header = pp.Keyword("OPENQASM") + pp.Regex(r"[0-9.]+") + semi
    include = pp.Keyword("include") + pp.QuotedString('"') + semi
    qreg = pp.Group(pp.Keyword("qreg")("stmt") + ident("name") + pp.Suppress("[") + integer("size") + pp.Suppress("]") + semi)
    creg = pp.Keyword("creg") + ident + pp.Suppress("[") + integer + pp.Suppress("]") + semi
    barrier = pp.Keyword("barrier") + pp.SkipTo(";") + semi
    measure = pp.Group(pp.Keyword("measure")("stmt") + pp.SkipTo(";") + semi)
    gate = pp.Group(
        ident("name")
        + pp.Optional(pp.Suppress("(") + pp.Group(pp.DelimitedList(expr))("params") + pp.Suppress(")"))
        + pp.Group(pp.DelimitedList(qubit_ref))("args")
        + semi
    )
    statement = header.suppress() | include.suppress() | qreg | creg.suppress() | barrier.suppress() | measure | gate
    program = pp.ZeroOrMore(statement) + pp.StringEnd()
    program.ignore(pp.cpp_style_comment)
    return program


def _parse_qasm(text: str) -> ParsedCircuit:
    try:
        statements = _qasm_grammar().parse_string(text, parse_all=True)
    except pp.ParseBaseException as exc:
        raise CircuitError(f"malformed QASM at line {exc.lineno}, col {exc.col}: {exc.msg}") from None

    registers: Dict[str, Tuple[int, int]] = {}
    total = 0
    raw: List[Tuple[str, List[float], List[int]]] = []
    for stmt in statements:
        if stmt.get("stmt") == "qreg":
            registers[stmt["name"]] = (total, stmt["size"])
            total += stmt["size"]
            continue
        if stmt.get("stmt") == "measure":
            raise CircuitError("measure is not supported; strip measurements before compiling")
        name = stmt["name"].lower()
        params = [float(p) for p in stmt.get("params", [])]
        qubits = []
        for ref in stmt["args"]:
            if ref["reg"] not in registers:
                raise CircuitError(f"unknown register '{ref['reg']}'")
            base, size = registers[ref["reg"]]
            if not 0 <= ref["index"] < size:
                raise CircuitError(f"qubit {ref['reg']}[{ref['index']}] out of range")
            qubits.append(base + ref["index"])
        raw.append((name, params, qubits))

    gates = []
    for index, (name, params, qubits) in enumerate(raw):
        if name == "cz":
            gates.append(Gate("cz", tuple(qubits), (), index))
        elif name in ("u3", "u"):
            gates.append(Gate("u3", tuple(qubits), tuple(params), index))
        else:
            raise CircuitError(f"unsupported gate '{name}'; transpile the circuit to {{cz, u3}} first")
    return ParsedCircuit(total, gates)


def _parse_json_gates(text: Union[str, Mapping[str, Any]]) -> ParsedCircuit:
    try:
        doc = json.loads(text) if isinstance(text, (str, bytes)) else text
    except json.JSONDecodeError as exc:
        raise CircuitError(f"circuit is not valid JSON: {exc}") from None
    if not isinstance(doc, Mapping) or "gates" not in doc:
        raise CircuitError("json-gates document needs a 'gates' list")
    if not isinstance(doc["gates"], list):
        raise CircuitError("field 'gates' must be a list")
    gates = []
    for index, item in enumerate(doc["gates"]):
        try:
            kind = str(item["kind"]).lower()
            qubits = tuple(int(q) for q in item["qubits"])
            params = tuple(float(p) for p in item.get("params", []))
        except (KeyError, TypeError, ValueError):
            raise CircuitError(f"malformed gate entry #{index}") from None
        if kind == "u":
            kind = "u3"
        gates.append(Gate(kind, qubits, params, index))
    used = max((q for g in gates for q in g.qubits), default=-1) + 1
    num_qubits = doc.get("num_qubits", used)
    if isinstance(num_qubits, bool) or not isinstance(num_qubits, int) or num_qubits < 0:
        raise CircuitError(f"field 'num_qubits' must be a non-negative integer, got {num_qubits!r}")
    return ParsedCircuit(num_qubits, gates)


def parse_circuit(doc: Union[str, Mapping[str, Any]], fmt: str = "qasm2-subset") -> ParsedCircuit:
    """Parse a circuit; gates come back in source order with `index` set."""
    if fmt == "qasm2-subset":
        if not isinstance(doc, str):
            raise CircuitError("qasm2-subset input must be text")
        parsed = _parse_qasm(doc)
    elif fmt == "json-gates":
        parsed = _parse_json_gates(doc)
    else:
        raise CircuitError(f"unknown circuit format '{fmt}' (expected one of {', '.join(FORMATS)})")
    for gate in parsed.gates:
        for q in gate.qubits:
            if not 0 <= q < parsed.num_qubits:
                raise CircuitError(f"qubit index {q} out of range for {parsed.num_qubits} qubits")
    return parsed


def guess_format(path: str) -> str:
    return "json-gates" if str(path).endswith(".json") else "qasm2-subset"


# -- staging ---------------------------------------------------------------


def stage_asap(gates: Sequence[Gate], num_qubits: Optional[int] = None) -> StagedCircuit:
    """Layer gates as soon as possible into alternating 1Q / Rydberg stages.

    A CZ lands in Rydberg stage 1 + max(stage of the previous CZ on either qubit).
    A U3 runs in the 1Q slot right after the Rydberg stage of the last CZ on its
    qubit; repeated U3s on one qubit in the same slot take successive sub-layers.
    """
    if num_qubits is None:
        num_qubits = max((q for g in gates for q in g.qubits), default=-1) + 1
    last_cz = defaultdict(int)
    oneq_depth: Dict[Tuple[int, int], int] = defaultdict(int)
    rydberg: Dict[int, List[Gate]] = defaultdict(list)
    oneq: Dict[Tuple[int, int], List[Gate]] = defaultdict(list)
    for gate in sorted(gates, key=lambda g: g.index):
        if gate.kind == "cz":
            t = 1 + max(last_cz[q] for q in gate.qubits)
            for q in gate.qubits:
                last_cz[q] = t
            rydberg[t].append(gate)
        else:
            q = gate.qubits[0]
            slot = last_cz[q]
            depth = oneq_depth[(slot, q)]
            oneq_depth[(slot, q)] = depth + 1
            oneq[(slot, depth)].append(gate)

    stages: List[GateStage] = []
    last_t = max(rydberg, default=0)
    for t in range(0, last_t + 1):
        if t:
            stages.append(GateStage("rydberg", t, tuple(rydberg[t])))
        depth = 0
        while (t, depth) in oneq:
            stages.append(GateStage("oneq", t, tuple(oneq[(t, depth)])))
            depth += 1
    return StagedCircuit(num_qubits, stages)
