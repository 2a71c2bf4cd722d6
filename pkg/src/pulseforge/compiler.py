"""Circuit rewrites targeting RZX/PRZX hardware primitives.

Every function returns a :class:`Circuit` (or a list of gates) whose unitary
matches the intended operation up to a global phase.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

from .ir import Circuit, CircuitError, Gate, cz, inverse, przx, rzx, single

HALF_PI = math.pi / 2


class CnotVariant(str, Enum):
    IBM = "ibm"
    SIMPLE = "simple"


class TermStyle(str, Enum):
    SERIAL = "serial"
    MERGED = "merged"


@dataclass(frozen=True)
class PauliTerm:
    """``h * P_{q1} P_{q2} ...`` with P in {X, Y, Z}."""

    h: float
    paulis: Mapping[int, str] = field(default_factory=dict)

    def __post_init__(self):
        paulis = {int(q): str(p).upper() for q, p in dict(self.paulis).items()}
        if not paulis:
            raise CircuitError("Pauli term needs at least one qubit")
        if any(p not in "XYZ" or len(p) != 1 for p in paulis.values()):
            raise CircuitError(f"bad Pauli labels {paulis}")
        object.__setattr__(self, "paulis", dict(sorted(paulis.items())))
        object.__setattr__(self, "h", float(self.h))

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(self.paulis)

    @classmethod
    def from_string(cls, h: float, label: str, qubits: Sequence[int] | None = None) -> "PauliTerm":
        """``from_string(0.5, "XZ")`` acts on qubits 0 and 1; identity letters are skipped."""
        qubits = range(len(label)) if qubits is None else qubits
        return cls(h, {q: p for q, p in zip(qubits, label) if p.upper() != "I"})


def _wrap(theta: float) -> float:
    """Map into (-pi, pi]."""
    w = math.remainder(theta, 2 * math.pi)
    return math.pi if w == -math.pi else w


def reduce_angle(theta: float) -> tuple[float, int]:
    """Return (theta_bar, delta) with |theta_bar| <= pi/2.

    When delta is 1, ``RZX(theta) = i RZX(theta_bar) (Z (x) X)``, the
    correction being a pair of single-qubit Paulis.
    """
    w = _wrap(theta)
    if abs(w) > HALF_PI:
        return w - math.copysign(math.pi, w), 1
    return w, 0


def reduce_rzx(g: Gate) -> Circuit:
    if g.kind != "rzx":
        raise CircuitError(f"reduce_rzx needs an rzx gate, got {g.kind}")
    c, t = g.qubits
    theta_bar, delta = reduce_angle(g.theta)
    gates = [rzx(theta_bar, c, t)]
    if delta:
        gates += [single("z", c), single("x", t)]
    return Circuit(max(g.qubits) + 1, gates)


def reduce_przx(g: Gate) -> Circuit:
    if g.kind != "przx":
        raise CircuitError(f"reduce_przx needs a przx gate, got {g.kind}")
    reduced = [reduce_angle(th) for th in g.params]
    gates = [przx([r[0] for r in reduced], g.controls, g.target)]
    gates += [single("z", c) for c, (_, d) in zip(g.controls, reduced) if d]
    if sum(d for _, d in reduced) % 2:
        gates.append(single("x", g.target))
    return Circuit(max(g.qubits) + 1, gates)


def reduce_gate(g: Gate) -> list[Gate]:
    if g.kind == "rzx":
        return list(reduce_rzx(g))
    if g.kind == "przx":
        return list(reduce_przx(g))
    return [g]


def reduce_circuit(c: Circuit) -> Circuit:
    return Circuit(c.num_qubits, [h for g in c for h in reduce_gate(g)])


def echo_rzx(theta: float, control: int, target: int) -> Circuit:
    """Half rotation, flip control, negative half rotation, flip back.

    X_c anticommutes with Z_c, so the second half rotates the same way while
    any term that commutes with X_c (IX, IY, ...) cancels.
    """
    n = max(control, target) + 1
    x = single("x", control)
    return Circuit(n, [rzx(theta / 2, control, target), x, rzx(-theta / 2, control, target), x])


def echo_przx(g: Gate) -> Circuit:
    if g.kind != "przx":
        raise CircuitError(f"echo_przx needs a przx gate, got {g.kind}")
    half = [th / 2 for th in g.params]
    flips = [single("x", c) for c in g.controls]
    gates = [przx(half, g.controls, g.target), *flips,
             przx([-h for h in half], g.controls, g.target), *flips]
    return Circuit(max(g.qubits) + 1, gates)


def echo_gate(g: Gate) -> list[Gate]:
    if g.kind == "rzx":
        return list(echo_rzx(g.theta, *g.qubits))
    if g.kind == "przx":
        return list(echo_przx(g))
    return [g]


def echo_circuit(c: Circuit) -> Circuit:
    return Circuit(c.num_qubits, [h for g in c for h in echo_gate(g)])


def decompose_cnot(control: int, target: int, variant: CnotVariant | str = CnotVariant.SIMPLE) -> Circuit:
    if control == target:
        raise CircuitError("cnot control equals target")
    variant = CnotVariant(variant)
    n = max(control, target) + 1
    if variant is CnotVariant.IBM:
        # Z sqrt(X) Z is X^(3/2) up to phase; no trailing X on the control,
        # which would leave X_c CNOT under this module's RZX sign
        gates = [single("z", target), single("sx", target), single("z", target),
                 single("sdg", control), rzx(HALF_PI, control, target)]
        return Circuit(n, gates)
    return parallel_cnot_group([control], target)


def _target_correction(n: int) -> str | None:
    """Single-qubit kind equal to X^(3n/2 mod 2)."""
    return {0: None, 1: "x32", 2: "x", 3: "sx"}[n % 4]


def parallel_cnot_group(controls: Sequence[int], target: int) -> Circuit:
    """Product of CNOTs sharing a target, built from one PRZX(pi/2, ...)."""
    controls = tuple(controls)
    if not controls:
        raise CircuitError("need at least one control")
    if len(set(controls)) != len(controls):
        raise CircuitError("duplicate controls")
    if target in controls:
        raise CircuitError("target listed as a control")
    gates = [single("sdg", c) for c in controls]
    q = _target_correction(len(controls))
    if q:
        gates.append(single(q, target))
    if len(controls) == 1:
        gates.append(rzx(HALF_PI, controls[0], target))
    else:
        gates.append(przx(HALF_PI, controls, target))
    return Circuit(max(controls + (target,)) + 1, gates)


def parallel_cz_group(others: Sequence[int], shared: int) -> Circuit:
    """Product of CZs sharing one qubit: H-conjugated CNOT group on ``shared``."""
    others = tuple(others)
    if shared in others:
        raise CircuitError("shared qubit listed among the others")
    inner = list(parallel_cnot_group(others, shared))
    h = single("h", shared)
    return Circuit(max(others + (shared,)) + 1, [h, *inner, h])


def lower_cnot_cz(c: Circuit, variant: CnotVariant | str = CnotVariant.SIMPLE) -> Circuit:
    """Replace every CNOT/CZ with its RZX-based decomposition."""
    out: list[Gate] = []
    for g in c:
        if g.kind == "cnot":
            out += decompose_cnot(*g.qubits, variant=variant)
        elif g.kind == "cz":
            out += parallel_cz_group([g.qubits[0]], g.qubits[1])
        else:
            out.append(g)
    return Circuit(c.num_qubits, out)


_BASIS = {
    ("Z", "Z"): (),
    ("Y", "Z"): ("sx",),
    ("X", "Z"): ("h",),
    ("X", "X"): (),
    ("Y", "X"): ("sx", "h"),
    ("Z", "X"): ("h",),
}


def basis_change(pauli: str, target: str, qubit: int = 0) -> Circuit:
    """Gates W (application order) with W P W^dag = target."""
    key = (pauli.upper(), target.upper())
    if key not in _BASIS:
        raise CircuitError(f"no basis change {key[0]} -> {key[1]}")
    return Circuit(qubit + 1, [single(k, qubit) for k in _BASIS[key]])


def _conjugated(core: Sequence[Gate], changes: Sequence[Gate]) -> list[Gate]:
    return [*changes, *core, *(inverse(g) for g in reversed(changes))]


def pauli_term_circuit(
    term: PauliTerm,
    angle: float,
    style: TermStyle | str = TermStyle.SERIAL,
    graph=None,
    root: int | None = None,
) -> Circuit:
    """Circuit for exp(-i h angle P_term).

    Parities are collected into ``root`` along a CNOT tree over the term's
    support, rotated by RZ(2 h angle) and uncollected. With no graph, the
    support is taken as all-to-all connected.
    """
    from . import layout

    style = TermStyle(style)
    support = term.support
    if graph is None:
        graph = layout.CouplingGraph.complete(max(support) + 1)
    if root is None:
        root = support[-1]
    if root not in term.paulis:
        raise CircuitError(f"root {root} not in term support")
    sub = graph.subgraph(support)
    if not sub.is_connected():
        raise CircuitError("no parity tree: term support is disconnected on the coupling graph")
    mode = layout.Mode.MERGED if style is TermStyle.MERGED else layout.Mode.SERIAL
    tree = layout.spanning_parity_tree(sub, root, mode)
    core = list(layout.tree_to_circuit(tree, 2 * term.h * angle))
    changes = [g for q, p in term.paulis.items() for g in basis_change(p, "Z", q)]
    n = max(graph.num_qubits, max(support) + 1)
    return Circuit(n, _conjugated(core, changes))


# Heisenberg chain on three qubits: XX, YY and ZZ couplings on (0,1) and (1,2)
# share qubit 1, so each is one PRZX with qubit 1 as target once rotated into
# the Z_c X_t frame.
_HEISENBERG_FRAMES = {
    "XX": {0: ("X", "Z"), 1: ("X", "X"), 2: ("X", "Z")},
    "YY": {0: ("Y", "Z"), 1: ("Y", "X"), 2: ("Y", "Z")},
    "ZZ": {0: ("Z", "Z"), 1: ("Z", "X"), 2: ("Z", "Z")},
}


def trotter_heisenberg(n_steps: int, t: float) -> Circuit:
    """First-order Trotterization of exp(-i t (XX + YY + ZZ)) on a 3-qubit chain.

    Each step applies exp(-i t/n P_0 P_1) exp(-i t/n P_1 P_2) for P = X, Y, Z
    as a single PRZX((2t/n, 2t/n), (0, 2), 1) in a rotated frame.
    """
    if n_steps < 1:
        raise CircuitError("n_steps must be >= 1")
    theta = 2 * t / n_steps
    step: list[Gate] = []
    for frame in _HEISENBERG_FRAMES.values():
        changes = [g for q, (p, tgt) in frame.items() for g in basis_change(p, tgt, q)]
        step += _conjugated([przx((theta, theta), (0, 2), 1)], changes)
    return Circuit(3, step * n_steps)


def heisenberg_generators() -> list[str]:
    """Pauli strings whose sum is the 3-qubit chain Hamiltonian, in Trotter order."""
    return [s for p in "XYZ" for s in (p + p + "I", "I" + p + p)]


def phase_oracle(num_vars: int, pair_terms: Sequence[tuple[int, int]]) -> Circuit:
    """Phase (-1)^f(x) for f = XOR over pairs of x_i x_j, as one CZ per pair."""
    gates = [cz(i, j) for i, j in pair_terms]
    return Circuit(num_vars, gates)


def parallel_cz_groups(c: Circuit) -> list[tuple[int, tuple[int, ...]]]:
    """Maximal runs of consecutive CZs sharing one qubit, as (shared, others).

    Only runs of two or more gates are reported.
    """
    groups: list[tuple[int, list[int]]] = []
    run: list[Gate] = []

    def flush():
        if len(run) >= 2:
            shared = set(run[0].qubits).intersection(*(g.qubits for g in run)).pop()
            groups.append((shared, [q for g in run for q in g.qubits if q != shared]))

    for g in c:
        if g.kind == "cz" and run:
            common = set(run[0].qubits).intersection(*(h.qubits for h in run), g.qubits)
            if common:
                run.append(g)
                continue
        flush()
        run = [g] if g.kind == "cz" else []
    flush()
    return [(s, tuple(o)) for s, o in groups]


def merge_cz_groups(c: Circuit) -> Circuit:
    """Rewrite each run of shared-qubit CZs as one parallel CZ group.

    Runs whose other qubits repeat are left alone: they are not a product of
    distinct commuting CZs on one shared qubit.
    """
    out: list[Gate] = []
    run: list[Gate] = []

    def flush():
        others = []
        if len(run) >= 2:
            shared = set(run[0].qubits).intersection(*(g.qubits for g in run)).pop()
            others = [q for g in run for q in g.qubits if q != shared]
        if others and len(set(others)) == len(others):
            out.extend(parallel_cz_group(others, shared))
        else:
            out.extend(run)

    for g in c:
        if g.kind == "cz" and run:
            common = set(run[0].qubits).intersection(*(h.qubits for h in run), g.qubits)
            if common:
                run.append(g)
                continue
        flush()
        run = []
        if g.kind == "cz":
            run = [g]
        else:
            out.append(g)
    flush()
    return Circuit(c.num_qubits, out)


def common_control_przx(control: int, targets: Sequence[int], thetas: Sequence[float] | float) -> Circuit:
    """prod_i RZX(theta_i) with one control and several targets.

    H on every qubit swaps Z and X, turning the shared control into the
    shared target of a regular PRZX.
    """
    targets = tuple(targets)
    if control in targets or len(set(targets)) != len(targets):
        raise CircuitError("targets must be distinct and exclude the control")
    hs = [single("h", q) for q in (control, *targets)]
    core = przx(thetas, targets, control)
    return Circuit(max((control, *targets)) + 1, [*hs, core, *hs])
