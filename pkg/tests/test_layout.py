import itertools
import json

import networkx as nx
import numpy as np
import pytest
from scipy.linalg import expm

from pulseforge.layout import (
    CouplingGraph,
    LayoutError,
    Mode,
    ParityTree,
    best_serial,
    builtin_layout,
    check_tree,
    gain_curve,
    gain_curve_csv,
    max_pauli_term,
    spanning_parity_tree,
    tree_to_circuit,
)
from pulseforge.simulator import compact, pauli_string, phase_fidelity, unitary_of_circuit


def serial_valid(graph, root, depth, assign):
    """Independent check of a serial assignment {child: (parent, slot)}."""
    for c, (p, s) in assign.items():
        if not graph.has_edge(c, p) or not 1 <= s <= depth:
            return False
        if p != root and (p not in assign or assign[p][1] <= s):
            return False
    for s in range(1, depth + 1):
        busy = [q for c, (p, t) in assign.items() if t == s for q in (c, p)]
        if len(busy) != len(set(busy)):
            return False
    return True


def brute_force_serial(graph, root, depth):
    others = sorted(graph.nodes - {root})
    choices = [[None] + [(p, s) for p in graph.adjacency[v] for s in range(1, depth + 1)] for v in others]
    best = 1
    for combo in itertools.product(*choices):
        assign = {v: ch for v, ch in zip(others, combo) if ch is not None}
        if len(assign) + 1 > best and serial_valid(graph, root, depth, assign):
            best = len(assign) + 1
    return best


def small_graphs():
    yield "path5", CouplingGraph.from_edges([(0, 1), (1, 2), (2, 3), (3, 4)])
    yield "star5", CouplingGraph.from_edges([(0, 1), (0, 2), (0, 3), (0, 4)])
    yield "cycle5", CouplingGraph.from_edges([(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)])
    yield "k5", CouplingGraph.complete(5)
    rng = np.random.default_rng(11)
    for k in range(3):
        g = nx.gnp_random_graph(5, 0.5, seed=int(rng.integers(1 << 30)))
        yield f"random{k}", CouplingGraph(5, frozenset(g.edges))


@pytest.mark.parametrize("name,graph", list(small_graphs()))
@pytest.mark.parametrize("depth", [1, 2, 3])
def test_serial_search_matches_brute_force(name, graph, depth):
    for root in (0, 2):
        size, tree = max_pauli_term(graph, root, depth, Mode.SERIAL)
        assert size == brute_force_serial(graph, root, depth)
        assert check_tree(graph, tree) == []
        assert tree.exact


@pytest.mark.parametrize("name,graph", list(small_graphs()))
@pytest.mark.parametrize("depth", [1, 2, 3])
def test_merged_tree_is_whole_ball(name, graph, depth):
    size, tree = max_pauli_term(graph, 0, depth, Mode.MERGED)
    assert size == len(nx.single_source_shortest_path_length(graph.nx, 0, cutoff=depth))
    assert check_tree(graph, tree) == []


@pytest.mark.parametrize("depth", [0, 1, 2, 3, 4])
def test_complete_graph_doubles_per_slot(depth):
    g = CouplingGraph.complete(20)
    assert max_pauli_term(g, 0, depth, Mode.SERIAL)[0] == 2**depth


def test_eagle_counts():
    g = CouplingGraph.eagle()
    assert g.num_qubits == 127 and len(g.edges) == 144
    assert max(g.degree(v) for v in g.nodes) == 3
    points = gain_curve(g, [1, 2, 3, 4])
    assert [p.serial for p in points] == [2, 4, 7, 11]
    assert [p.parallel for p in points] == [4, 7, 13, 19]
    assert all(p.exact for p in points)


def test_square_lattice_gain_grows_linearly():
    g = CouplingGraph.lattice(9, 9)
    points = gain_curve(g, [1, 2, 3, 4])
    assert [p.serial for p in points] == [2, 4, 8, 16]
    assert [p.parallel for p in points] == [5, 13, 25, 41]
    gains = [p.gain for p in points]
    assert gains[2] - gains[1] == gains[3] - gains[2]


def test_hexagonal_lattice_degree():
    g = CouplingGraph.hexagonal(5, 5)
    assert max(g.degree(v) for v in g.nodes) == 3
    assert g.is_connected()


def test_heavy_hex_small():
    g = CouplingGraph.heavy_hex(3, 5)
    # 3 rows of 5, bridges at columns 0, 4 then 2
    assert g.num_qubits == 18 and g.is_connected()
    assert max(g.degree(v) for v in g.nodes) == 3


def test_builtin_layout_and_errors():
    assert builtin_layout("lattice", 3, 2).num_qubits == 6
    with pytest.raises(LayoutError, match="unknown layout"):
        builtin_layout("torus", 3)
    with pytest.raises(LayoutError):
        CouplingGraph(3, frozenset({(0, 3)}))
    with pytest.raises(LayoutError):
        CouplingGraph(3, frozenset({(1, 1)}))


def test_layout_json_round_trip(tmp_path):
    g = CouplingGraph.lattice(3, 3)
    path = tmp_path / "g.json"
    path.write_text(json.dumps(g.to_dict()))
    assert CouplingGraph.load(path) == g
    with pytest.raises(LayoutError):
        CouplingGraph.from_dict({"edges": []})


def test_greedy_fallback_is_valid_but_flagged():
    g = CouplingGraph.lattice(9, 9)
    size, tree = max_pauli_term(g, 40, 5, Mode.SERIAL)
    assert not tree.exact
    assert check_tree(g, tree) == []
    assert size >= 16


def test_check_tree_reports_violations():
    g = CouplingGraph.from_edges([(0, 1), (1, 2), (0, 2)])
    bad_serial = ParityTree(0, {1: 0, 2: 0}, {1: 1, 2: 1}, Mode.SERIAL, 1)
    assert any("more than one CNOT" in p for p in check_tree(g, bad_serial))
    assert check_tree(g, ParityTree(0, {1: 0, 2: 0}, {1: 1, 2: 1}, Mode.MERGED, 1)) == []
    both = ParityTree(0, {1: 0, 2: 1}, {1: 1, 2: 1}, Mode.MERGED, 1)
    assert check_tree(g, both)
    off_graph = ParityTree(0, {1: 0}, {1: 1}, Mode.SERIAL, 1)
    assert check_tree(CouplingGraph.from_edges([(0, 2)], 3), off_graph)


def parity_rotation(nodes, n, angle):
    label = "".join("Z" if q in nodes else "I" for q in range(n))
    return expm(-0.5j * angle * pauli_string(label))


@pytest.mark.parametrize("mode", list(Mode))
@pytest.mark.parametrize("graph", [CouplingGraph.lattice(2, 3), CouplingGraph.from_edges(
    [(0, 1), (0, 2), (0, 3), (3, 4), (1, 5)])])
def test_tree_circuit_rotates_parity(mode, graph):
    angle = 0.81
    for depth in (1, 2, 3):
        _, tree = max_pauli_term(graph, 0, depth, mode)
        c = tree_to_circuit(tree, angle, graph.num_qubits)
        for g in c:
            if g.kind == "cnot":
                assert graph.has_edge(*g.qubits)
        small, used = compact(c)
        got = unitary_of_circuit(small)
        assert used == sorted(tree.nodes) or len(tree.nodes) == 1
        expect = parity_rotation(set(range(len(used))), len(used), angle) if tree.size > 1 else got
        assert phase_fidelity(got, expect) == pytest.approx(1, abs=1e-10)


def test_spanning_tree_depths():
    g = CouplingGraph.complete(6)
    assert spanning_parity_tree(g, 0, Mode.SERIAL).depth == 3
    assert spanning_parity_tree(g, 0, Mode.MERGED).depth == 1
    with pytest.raises(LayoutError, match="disconnected"):
        spanning_parity_tree(CouplingGraph.from_edges([(0, 1), (2, 3)]), 0, Mode.SERIAL)


def test_best_serial_beats_every_root():
    g = CouplingGraph.from_edges([(0, 1), (1, 2), (2, 3), (1, 4), (4, 5), (4, 6)])
    size, _ = best_serial(g, 2)
    assert size == max(brute_force_serial(g, r, 2) for r in g.nodes)


def test_gain_csv():
    text = gain_curve_csv(gain_curve(CouplingGraph.complete(8), [1, 2]))
    assert text == "depth,serial,parallel,gain\n1,2,8,6\n2,4,8,4\n"
