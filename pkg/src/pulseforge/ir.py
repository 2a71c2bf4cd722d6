"""Abstract gate layer.

Gates in a :class:`Circuit` are listed in application order: ``gates[0]``
acts on the state first. Rotation conventions:

* ``rzx(theta)  = exp(-i theta/2 Z_c X_t)``
* ``przx(thetas) = exp(-i sum_k thetas[k]/2 Z_{c_k} X_t)``
* ``rz(lam)      = exp(-i lam/2 Z)``
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

SINGLE_QUBIT = ("x", "z", "h", "s", "sdg", "sx", "x32", "rz")
TWO_PLUS = ("rzx", "przx", "cnot", "cz")
KINDS = SINGLE_QUBIT + TWO_PLUS
# Z-diagonal gates are frame changes on hardware and cost no time
VIRTUAL = ("z", "s", "sdg", "rz")

_ARITY = {"rzx": 2, "cnot": 2, "cz": 2}
_NPARAMS = {"rz": 1, "rzx": 1}


class CircuitError(ValueError):
    pass


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.kind not in KINDS:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        if len(set(self.qubits)) != len(self.qubits):
            raise CircuitError(f"{self.kind} acts on repeated qubits {self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise CircuitError("negative qubit index")
        if not all(math.isfinite(p) for p in self.params):
            raise CircuitError("gate angles must be finite")
        if self.kind in SINGLE_QUBIT and len(self.qubits) != 1:
            raise CircuitError(f"{self.kind} is a single-qubit gate")
        if self.kind in _ARITY and len(self.qubits) != _ARITY[self.kind]:
            raise CircuitError(f"{self.kind} needs {_ARITY[self.kind]} qubits")
        if self.kind == "przx":
            if len(self.qubits) < 2 or len(self.params) != len(self.qubits) - 1:
                raise CircuitError("przx needs one angle per control and a target")
        elif len(self.params) != _NPARAMS.get(self.kind, 0):
            raise CircuitError(f"{self.kind} got {len(self.params)} parameters")

    @property
    def is_single(self) -> bool:
        return self.kind in SINGLE_QUBIT

    @property
    def is_virtual(self) -> bool:
        return self.kind in VIRTUAL

    @property
    def controls(self) -> tuple[int, ...]:
        return self.qubits[:-1]

    @property
    def target(self) -> int:
        return self.qubits[-1]

    @property
    def theta(self) -> float:
        return self.params[0]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "qubits": list(self.qubits), "params": list(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "Gate":
        return cls(d["kind"], tuple(d["qubits"]), tuple(d.get("params", ())))

    def __str__(self):
        p = "(" + ",".join(f"{x:.4g}" for x in self.params) + ")" if self.params else ""
        return f"{self.kind}{p}[{','.join(map(str, self.qubits))}]"


# constructors

def rzx(theta: float, control: int, target: int) -> Gate:
    return Gate("rzx", (control, target), (theta,))


def przx(thetas: Sequence[float] | float, controls: Sequence[int], target: int) -> Gate:
    controls = tuple(controls)
    if isinstance(thetas, (int, float)):
        thetas = (float(thetas),) * len(controls)
    if target in controls:
        raise CircuitError("przx target must not be a control")
    return Gate("przx", controls + (target,), tuple(thetas))


def cnot(control: int, target: int) -> Gate:
    return Gate("cnot", (control, target))


def cz(q1: int, q2: int) -> Gate:
    return Gate("cz", (q1, q2))


def rz(angle: float, q: int) -> Gate:
    return Gate("rz", (q,), (angle,))


def single(kind: str, q: int) -> Gate:
    return Gate(kind, (q,))


_INVERSE = {"x": "x", "z": "z", "h": "h", "s": "sdg", "sdg": "s", "sx": "x32", "x32": "sx",
            "cnot": "cnot", "cz": "cz"}


def inverse(g: Gate) -> Gate:
    if g.kind in _INVERSE:
        return Gate(_INVERSE[g.kind], g.qubits)
    return Gate(g.kind, g.qubits, tuple(-p for p in g.params))


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    gates: tuple[Gate, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if max(g.qubits) >= self.num_qubits:
                raise CircuitError(f"{g} exceeds num_qubits={self.num_qubits}")

    def __iter__(self):
        return iter(self.gates)

    def __len__(self):
        return len(self.gates)

    def __add__(self, other: "Circuit") -> "Circuit":
        return Circuit(max(self.num_qubits, other.num_qubits), self.gates + other.gates)

    def extend(self, gates: Iterable[Gate]) -> "Circuit":
        return Circuit(self.num_qubits, self.gates + tuple(gates))

    def inverse(self) -> "Circuit":
        return Circuit(self.num_qubits, tuple(inverse(g) for g in reversed(self.gates)))

    def to_dict(self) -> dict:
        return {"num_qubits": self.num_qubits, "gates": [g.to_dict() for g in self.gates]}

    @classmethod
    def from_dict(cls, d: dict) -> "Circuit":
        return cls(int(d["num_qubits"]), tuple(Gate.from_dict(g) for g in d["gates"]))

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text: str) -> "Circuit":
        return cls.from_dict(json.loads(text))


def two_qubit_layers(c: Circuit) -> list[list[Gate]]:
    """ASAP layering of the multi-qubit gates; single-qubit gates are ignored."""
    free: dict[int, int] = {}
    layers: list[list[Gate]] = []
    for g in c.gates:
        if g.is_single:
            continue
        layer = max((free.get(q, 0) for q in g.qubits), default=0)
        if layer == len(layers):
            layers.append([])
        layers[layer].append(g)
        for q in g.qubits:
            free[q] = layer + 1
    return layers
