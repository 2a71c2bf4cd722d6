"""Coupling graphs and depth-limited CNOT parity trees.

A parity tree collects the Z-parity of its vertices into the root. Each edge
carries a time slot in 1..d and is a CNOT with the child as control and the
parent as target. A child's own subtree must finish before its edge fires,
so every slot below a vertex is smaller than that vertex's slot.

Two scheduling modes are compared:

* serial: a vertex takes part in at most one CNOT per slot;
* merged: any number of children may target one vertex in the same slot
  (lowered as one multi-control PRZX), but a vertex is never control and
  target in the same slot.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import networkx as nx

from .ir import Circuit, CircuitError, Gate, cnot, rz

# above these sizes the serial search falls back to a greedy heuristic
EXACT_MAX_DEPTH = 4
EXACT_MAX_BALL = 64


class LayoutError(ValueError):
    pass


class Mode(str, Enum):
    SERIAL = "serial"
    MERGED = "merged"


@dataclass(frozen=True)
class CouplingGraph:
    num_qubits: int
    edges: frozenset[tuple[int, int]]
    nodes: frozenset[int] | None = None
    # native cross-resonance orientations (control, target); empty means unknown
    directed: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self):
        edges = set()
        for a, b in self.edges:
            a, b = int(a), int(b)
            if a == b:
                raise LayoutError(f"self-loop on qubit {a}")
            if not (0 <= a < self.num_qubits and 0 <= b < self.num_qubits):
                raise LayoutError(f"edge ({a}, {b}) outside 0..{self.num_qubits - 1}")
            edges.add((min(a, b), max(a, b)))
        object.__setattr__(self, "edges", frozenset(edges))
        nodes = frozenset(range(self.num_qubits)) if self.nodes is None else frozenset(self.nodes)
        if any(a not in nodes or b not in nodes for a, b in edges):
            raise LayoutError("edge endpoint missing from node set")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "directed", frozenset(tuple(e) for e in self.directed))

    @cached_property
    def nx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(sorted(self.nodes))
        g.add_edges_from(sorted(self.edges))
        return g

    @cached_property
    def adjacency(self) -> dict[int, tuple[int, ...]]:
        return {v: tuple(sorted(self.nx.neighbors(v))) for v in self.nx.nodes}

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def has_edge(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.edges

    def subgraph(self, nodes: Iterable[int]) -> "CouplingGraph":
        keep = frozenset(nodes)
        missing = keep - self.nodes
        if missing:
            raise LayoutError(f"qubits {sorted(missing)} not in graph")
        edges = frozenset(e for e in self.edges if e[0] in keep and e[1] in keep)
        return CouplingGraph(self.num_qubits, edges, keep)

    def is_connected(self) -> bool:
        return len(self.nodes) > 0 and nx.is_connected(self.nx)

    def ball(self, v: int, radius: int) -> dict[int, int]:
        """Vertices within ``radius`` hops of v, with their distance."""
        return nx.single_source_shortest_path_length(self.nx, v, cutoff=radius)

    # builders

    @classmethod
    def from_edges(cls, edges: Iterable[Sequence[int]], num_qubits: int | None = None) -> "CouplingGraph":
        edges = [tuple(e) for e in edges]
        if num_qubits is None:
            num_qubits = 1 + max((max(e) for e in edges), default=-1)
        return cls(num_qubits, frozenset(edges))

    @classmethod
    def complete(cls, n: int) -> "CouplingGraph":
        return cls(n, frozenset((a, b) for a in range(n) for b in range(a + 1, n)))

    @classmethod
    def lattice(cls, width: int, height: int) -> "CouplingGraph":
        """Square grid; qubit (x, y) has index y * width + x."""
        edges = set()
        for y in range(height):
            for x in range(width):
                q = y * width + x
                if x + 1 < width:
                    edges.add((q, q + 1))
                if y + 1 < height:
                    edges.add((q, q + width))
        return cls(width * height, frozenset(edges))

    @classmethod
    def hexagonal(cls, rows: int, cols: int) -> "CouplingGraph":
        """Honeycomb of rows x cols hexagons, relabeled 0..n-1 in sorted coordinate order."""
        g = nx.hexagonal_lattice_graph(rows, cols)
        g = nx.convert_node_labels_to_integers(g, ordering="sorted")
        return cls(g.number_of_nodes(), frozenset(g.edges))

    @classmethod
    def heavy_hex(cls, rows: int, cols: int, trim_ends: bool = False) -> "CouplingGraph":
        """Heavy-hex lattice: rows of qubits in a line, joined by single bridge qubits.

        Between row r and r+1 a bridge sits at every column c with
        c = 0 (mod 4) for even r and c = 2 (mod 4) for odd r. Numbering runs
        through a row, then the bridges below it, then the next row.
        ``trim_ends`` drops the last column of the first row and the first
        column of the last row; ``heavy_hex(7, 15, True)`` is the 127-qubit
        layout.
        """
        if rows < 1 or cols < 1:
            raise LayoutError("heavy_hex needs positive rows and cols")
        index: dict[tuple[int, int], int] = {}
        edges: list[tuple[int, int]] = []
        n = 0
        for r in range(rows):
            cols_r = range(cols)
            if trim_ends and r == 0:
                cols_r = range(cols - 1)
            elif trim_ends and r == rows - 1 and rows > 1:
                cols_r = range(1, cols)
            for c in cols_r:
                index[(r, c)] = n
                if (r, c - 1) in index:
                    edges.append((n - 1, n))
                n += 1
            if r > 0:
                for c in _bridge_columns(r - 1, cols):
                    bridge = index.pop(("bridge", r - 1, c))
                    if (r, c) in index:
                        edges.append((bridge, index[(r, c)]))
            if r + 1 < rows:
                for c in _bridge_columns(r, cols):
                    if (r, c) in index:
                        index[("bridge", r, c)] = n
                        edges.append((index[(r, c)], n))
                        n += 1
        return cls(n, frozenset(edges))

    @classmethod
    def eagle(cls) -> "CouplingGraph":
        return cls.heavy_hex(7, 15, trim_ends=True)

    # serialization

    def to_dict(self) -> dict:
        return {"num_qubits": self.num_qubits, "edges": [list(e) for e in sorted(self.edges)]}

    @classmethod
    def from_dict(cls, d: dict) -> "CouplingGraph":
        try:
            return cls(int(d["num_qubits"]), frozenset(tuple(e) for e in d["edges"]))
        except (KeyError, TypeError) as exc:
            raise LayoutError(f"bad layout document: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "CouplingGraph":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _bridge_columns(r: int, cols: int) -> range:
    return range(0 if r % 2 == 0 else 2, cols, 4)


def builtin_layout(kind: str, *args: int) -> CouplingGraph:
    """Named topology: ``lattice``, ``hexagonal``, ``heavy_hex``, ``eagle`` or ``complete``."""
    builders = {
        "lattice": CouplingGraph.lattice,
        "hexagonal": CouplingGraph.hexagonal,
        "heavy_hex": CouplingGraph.heavy_hex,
        "eagle": CouplingGraph.eagle,
        "complete": CouplingGraph.complete,
    }
    if kind not in builders:
        raise LayoutError(f"unknown layout {kind!r}; choose from {sorted(builders)}")
    return builders[kind](*args)


@dataclass(frozen=True)
class ParityTree:
    root: int
    parent: dict[int, int]
    slot: dict[int, int]
    mode: Mode
    depth: int
    exact: bool = True

    @property
    def nodes(self) -> list[int]:
        return [self.root, *sorted(self.parent)]

    @property
    def size(self) -> int:
        return 1 + len(self.parent)

    def children(self, v: int) -> list[int]:
        return sorted((c for c, p in self.parent.items() if p == v), key=lambda c: (self.slot[c], c))

    def edges_at(self, s: int) -> list[tuple[int, int]]:
        """(child, parent) pairs firing in slot s."""
        return sorted((c, self.parent[c]) for c, t in self.slot.items() if t == s)

    def to_dict(self) -> dict:
        return {
            "root": self.root,
            "mode": self.mode.value,
            "depth": self.depth,
            "exact": self.exact,
            "edges": [[c, self.parent[c], self.slot[c]] for c in sorted(self.parent)],
        }


def check_tree(graph: CouplingGraph, tree: ParityTree) -> list[str]:
    """Replay a tree's schedule slot by slot; returns every rule it breaks."""
    problems = []
    if tree.root not in graph.nodes:
        problems.append(f"root {tree.root} not in graph")
    if set(tree.parent) != set(tree.slot):
        problems.append("parent and slot maps cover different vertices")
        return problems
    if tree.root in tree.parent:
        problems.append("root has a parent")
    for c, p in tree.parent.items():
        if not graph.has_edge(c, p):
            problems.append(f"edge {c}-{p} not in coupling graph")
        if not 1 <= tree.slot[c] <= tree.depth:
            problems.append(f"slot {tree.slot[c]} of {c} outside 1..{tree.depth}")
        seen = {c}
        v = c
        while v in tree.parent:
            v = tree.parent[v]
            if v in seen:
                problems.append(f"cycle through {c}")
                break
            seen.add(v)
        else:
            if v != tree.root:
                problems.append(f"{c} does not reach the root")
    for c, p in tree.parent.items():
        if p in tree.slot and tree.slot[c] >= tree.slot[p]:
            problems.append(f"{c} fires at {tree.slot[c]}, not before its parent's edge at {tree.slot[p]}")
    for s in range(1, tree.depth + 1):
        edges = tree.edges_at(s)
        controls = [c for c, _ in edges]
        targets = [p for _, p in edges]
        if tree.mode is Mode.SERIAL:
            touched = controls + targets
            dup = {v for v in touched if touched.count(v) > 1}
            if dup:
                problems.append(f"slot {s}: qubits {sorted(dup)} in more than one CNOT")
        else:
            dup = {v for v in controls if controls.count(v) > 1}
            if dup:
                problems.append(f"slot {s}: qubits {sorted(dup)} control twice")
            both = set(controls) & set(targets)
            if both:
                problems.append(f"slot {s}: qubits {sorted(both)} both control and target")
    return problems


class _SerialSearch:
    """Branch and bound over serial parity trees.

    A pending task ``(v, s)`` says v may still receive a child at slot s or
    any lower slot. Processing it either attaches an unused neighbor u at
    slot s (spawning tasks ``(v, s-1)`` and ``(u, s-1)``) or leaves slot s
    empty. A task with budget s can add at most 2^s - 1 vertices, and only
    ones within distance s, which gives the bound.
    """

    def __init__(self, graph: CouplingGraph, root: int, depth: int, target: int | None):
        self.adj = graph.adjacency
        self.root = root
        self.depth = depth
        self.target = target if target is not None else 2**depth
        self.balls = {}
        self.graph = graph
        self.best_size = 0
        self.best: dict[int, tuple[int, int]] = {}

    def _ball(self, v: int, s: int) -> frozenset[int]:
        key = (v, s)
        if key not in self.balls:
            self.balls[key] = frozenset(self.graph.ball(v, s))
        return self.balls[key]

    def _bound(self, used: set[int], tasks: list[tuple[int, int]]) -> int:
        capacity = sum(2**s - 1 for _, s in tasks)
        if capacity == 0:
            return len(used)
        reach = set().union(*(self._ball(v, s) for v, s in tasks)) - used
        return len(used) + min(capacity, len(reach))

    def run(self) -> tuple[int, dict[int, tuple[int, int]]]:
        used = {self.root}
        assign: dict[int, tuple[int, int]] = {}

        def rec(tasks: list[tuple[int, int]]) -> bool:
            if len(used) > self.best_size:
                self.best_size = len(used)
                self.best = dict(assign)
                if self.best_size >= self.target:
                    return True
            if not tasks or self._bound(used, tasks) <= self.best_size:
                return False
            v, s = tasks[-1]
            rest = tasks[:-1]
            lower = [(v, s - 1)] if s > 1 else []
            for u in self.adj[v]:
                if u in used:
                    continue
                used.add(u)
                assign[u] = (v, s)
                spawned = rest + lower + ([(u, s - 1)] if s > 1 else [])
                done = rec(spawned)
                used.discard(u)
                del assign[u]
                if done:
                    return True
            return rec(rest + lower)

        rec([(self.root, self.depth)] if self.depth > 0 else [])
        return self.best_size, self.best


def _greedy_serial(graph: CouplingGraph, root: int, depth: int) -> dict[int, tuple[int, int]]:
    used = {root}
    assign: dict[int, tuple[int, int]] = {}
    tasks = [(root, depth)] if depth > 0 else []
    while tasks:
        v, s = tasks.pop(0)
        free = [u for u in graph.adjacency[v] if u not in used]
        if s > 1:
            tasks.append((v, s - 1))
        if not free:
            continue
        # prefer the neighbor with the most room to grow
        u = max(free, key=lambda u: (len(set(graph.ball(u, s - 1)) - used), -u))
        used.add(u)
        assign[u] = (v, s)
        if s > 1:
            tasks.append((u, s - 1))
    return assign


def _merged_tree(graph: CouplingGraph, root: int, depth: int) -> ParityTree:
    """Breadth-first tree of the radius-d ball; merging lets every vertex be reached."""
    dist = graph.ball(root, depth)
    parent, slot = {}, {}
    for v, dv in dist.items():
        if v == root:
            continue
        parent[v] = min(u for u in graph.adjacency[v] if dist.get(u) == dv - 1)
        slot[v] = depth - dv + 1
    return ParityTree(root, parent, slot, Mode.MERGED, depth)


def max_pauli_term(
    graph: CouplingGraph,
    root: int,
    depth: int,
    mode: Mode | str,
    target: int | None = None,
) -> tuple[int, ParityTree]:
    """Largest parity tree rooted at ``root`` whose CNOTs fit in ``depth`` slots.

    The serial search is exact for depth <= 4 and neighbourhoods of at most
    64 qubits; otherwise a greedy tree is returned with ``exact=False``.
    ``target`` stops the search as soon as a tree of that size is found.
    """
    mode = Mode(mode)
    if root not in graph.nodes:
        raise LayoutError(f"root {root} not in graph")
    if depth < 0:
        raise LayoutError("depth must be non-negative")
    if mode is Mode.MERGED:
        tree = _merged_tree(graph, root, depth)
        return tree.size, tree
    exact = depth <= EXACT_MAX_DEPTH and len(graph.ball(root, depth)) <= EXACT_MAX_BALL
    if exact:
        _, assign = _SerialSearch(graph, root, depth, target).run()
    else:
        assign = _greedy_serial(graph, root, depth)
    tree = ParityTree(root, {c: p for c, (p, _) in assign.items()},
                      {c: s for c, (_, s) in assign.items()}, Mode.SERIAL, depth, exact)
    return tree.size, tree


def spanning_parity_tree(graph: CouplingGraph, root: int, mode: Mode | str) -> ParityTree:
    """Shallowest parity tree covering every vertex of a connected graph."""
    mode = Mode(mode)
    n = len(graph.nodes)
    if not graph.is_connected():
        raise LayoutError("no parity tree: graph is disconnected")
    if mode is Mode.MERGED:
        ecc = max(graph.ball(root, n).values())
        return _merged_tree(graph, root, ecc)
    for d in range(math.ceil(math.log2(n)) if n > 1 else 0, n):
        size, tree = max_pauli_term(graph, root, d, Mode.SERIAL, target=n)
        if size == n:
            return tree
    # a path covers everything at depth n - 1; reached only via the greedy fallback
    raise LayoutError("no parity tree found")


@dataclass(frozen=True)
class GainPoint:
    depth: int
    serial: int
    parallel: int
    exact: bool

    @property
    def gain(self) -> int:
        return self.parallel - self.serial


def best_serial(graph: CouplingGraph, depth: int) -> tuple[int, ParityTree]:
    """Serial maximum over all roots.

    Roots are tried in order of decreasing upper bound; a root whose bound
    cannot beat the incumbent is skipped.
    """
    cap = 2**depth
    bounds = sorted(((min(cap, len(graph.ball(r, depth))), r) for r in graph.nodes),
                    key=lambda t: (-t[0], t[1]))
    best_size, best_tree = 0, None
    for bound, r in bounds:
        if bound <= best_size:
            break
        size, tree = max_pauli_term(graph, r, depth, Mode.SERIAL, target=bound)
        if size > best_size or best_tree is None:
            best_size, best_tree = size, tree
    return best_size, best_tree


def best_merged(graph: CouplingGraph, depth: int) -> tuple[int, ParityTree]:
    best = max(sorted(graph.nodes), key=lambda r: len(graph.ball(r, depth)))
    return max_pauli_term(graph, best, depth, Mode.MERGED)


def gain_curve(graph: CouplingGraph, depths: Sequence[int]) -> list[GainPoint]:
    """Best serial and merged term sizes per depth, each maximized over roots."""
    out = []
    for d in depths:
        s, st = best_serial(graph, d)
        p, _ = best_merged(graph, d)
        out.append(GainPoint(d, s, p, st.exact))
    return out


def gain_curve_csv(points: Sequence[GainPoint]) -> str:
    lines = ["depth,serial,parallel,gain"]
    lines += [f"{p.depth},{p.serial},{p.parallel},{p.gain}" for p in points]
    return "\n".join(lines) + "\n"


def tree_to_circuit(tree: ParityTree, rz_angle: float, num_qubits: int | None = None) -> Circuit:
    """Collect parities slot by slot, RZ on the root, then uncollect in reverse.

    In merged mode, children sharing a parent in one slot become a single
    parallel CNOT group. Products of commuting CNOTs are self-inverse, so the
    uncollection reuses the same gates.
    """
    from .compiler import parallel_cnot_group

    if num_qubits is None:
        num_qubits = max(tree.nodes) + 1
    layers: list[list[Gate]] = []
    for s in range(1, tree.depth + 1):
        by_parent: dict[int, list[int]] = {}
        for c, p in tree.edges_at(s):
            by_parent.setdefault(p, []).append(c)
        layer: list[Gate] = []
        for p, kids in sorted(by_parent.items()):
            if tree.mode is Mode.MERGED and len(kids) > 1:
                layer += parallel_cnot_group(kids, p)
            else:
                layer += [cnot(c, p) for c in kids]
        layers.append(layer)
    collect = [g for layer in layers for g in layer]
    uncollect = [g for layer in reversed(layers) for g in layer]
    try:
        return Circuit(num_qubits, [*collect, rz(rz_angle, tree.root), *uncollect])
    except CircuitError as exc:
        raise LayoutError(str(exc)) from exc
