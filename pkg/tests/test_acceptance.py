"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``ACCEPTANCE <n> PASS|FAIL`` line with the measured
quantity before asserting, so the outcome is visible even under ``-q``.
"""
import math
import time

import numpy as np
import pytest
from scipy.linalg import expm

from pulseforge.compiler import (
    CnotVariant,
    common_control_przx,
    decompose_cnot,
    echo_przx,
    echo_rzx,
    parallel_cnot_group,
    parallel_cz_group,
    reduce_przx,
    reduce_rzx,
)
from pulseforge.cycle_bench import fit_decay, synthetic_decay
from pulseforge.ir import Circuit, przx, rzx
from pulseforge.layout import CouplingGraph, Mode as TreeMode, gain_curve, max_pauli_term
from pulseforge.noise import PauliNoiseModel, apply_pauli_noise, predict_parallel_fidelity, spam_alpha
from pulseforge.parallelizer import (
    DeviceConfig,
    Mode,
    compile_schedule,
    cr_segment_duration,
    duration_report,
    lower_rzx,
    prepare_circuit,
    simulate_lowered,
)
from pulseforge.simulator import (
    CRHamiltonianParams,
    QuantumChannel,
    choi_of_unitary,
    pauli_string,
    phase_fidelity,
    process_fidelity,
    ptm_of_channel,
    simulate_schedule,
    truth_table,
    unitary_of_circuit,
)


@pytest.fixture
def report(capsys):
    def _report(number, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {number:2d} {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return _report


# --- independent oracles ---------------------------------------------------------

def bit(i, q, n):
    return (i >> (n - 1 - q)) & 1


def permutation(n, f):
    d = 2**n
    u = np.zeros((d, d), dtype=complex)
    for i in range(d):
        u[f(i), i] = 1
    return u


def cnots(n, controls, target):
    return permutation(n, lambda i: i ^ ((sum(bit(i, c, n) for c in controls) % 2) << (n - 1 - target)))


def czs(n, others, shared):
    return np.diag([(-1.0) ** (bit(i, shared, n) * sum(bit(i, o, n) for o in others))
                    for i in range(2**n)]).astype(complex)


def zx_label(n, c, t):
    return "".join("Z" if q == c else "X" if q == t else "I" for q in range(n))


def rzx_oracle(n, theta, c, t):
    return expm(-0.5j * theta * pauli_string(zx_label(n, c, t)))


def rzx_product(n, thetas, controls, target):
    u = np.eye(2**n, dtype=complex)
    for th, c in zip(thetas, controls):
        u = rzx_oracle(n, th, c, target) @ u
    return u


def circuit_u(c, n):
    return unitary_of_circuit(Circuit(n, c.gates))


# --- criteria ----------------------------------------------------------------------

def test_criterion_01_algebraic_identities(report):
    rng = np.random.default_rng(2024)
    n = 4
    worst = 0.0
    samples = 0
    start = time.perf_counter()

    def check(got, expect):
        nonlocal worst, samples
        worst = max(worst, 1 - phase_fidelity(got, expect))
        samples += 1

    for _ in range(20):
        q = [int(x) for x in rng.permutation(n)]
        k = int(rng.integers(2, 4))
        controls, target = q[:k], q[k]
        thetas = rng.uniform(-2 * math.pi, 2 * math.pi, size=k)
        big = float(rng.uniform(-3 * math.pi, 3 * math.pi))
        # PRZX as a product of RZX gates
        check(circuit_u(Circuit(n, [przx(thetas, controls, target)]), n), rzx_product(n, thetas, controls, target))
        # both single CNOT decompositions
        for variant in CnotVariant:
            check(circuit_u(decompose_cnot(q[0], q[1], variant), n), cnots(n, [q[0]], q[1]))
        # shared-target CNOTs and shared-qubit CZs
        check(circuit_u(parallel_cnot_group(controls, target), n), cnots(n, controls, target))
        check(circuit_u(parallel_cz_group(controls, target), n), czs(n, controls, target))
        # angle reduction
        check(circuit_u(reduce_rzx(rzx(big, q[0], q[1])), n), rzx_oracle(n, big, q[0], q[1]))
        check(circuit_u(reduce_przx(przx(thetas * 2, controls, target)), n),
              rzx_product(n, thetas * 2, controls, target))
        # echo sequences
        check(circuit_u(echo_rzx(big, q[0], q[1]), n), rzx_oracle(n, big, q[0], q[1]))
        check(circuit_u(echo_przx(przx(thetas, controls, target)), n), rzx_product(n, thetas, controls, target))
        # one control, several targets
        expect = np.eye(2**n, dtype=complex)
        for th, t in zip(thetas, controls):
            expect = rzx_oracle(n, th, target, t) @ expect
        check(circuit_u(common_control_przx(target, controls, thetas), n), expect)
    elapsed = time.perf_counter() - start
    ok = samples >= 100 and worst <= 1e-9 and elapsed < 30
    report(1, ok, f"{samples} samples, worst infidelity {worst:.2e}, {elapsed:.2f} s")


def test_criterion_02_przx_factorization(report):
    grid = np.linspace(-math.pi, math.pi, 50)
    worst = 0.0
    for t1 in grid:
        t2 = -0.7 * t1 + 0.3
        got = unitary_of_circuit(Circuit(3, [przx((t1, t2), (0, 2), 1)]))
        expect = rzx_oracle(3, t1, 0, 1) @ rzx_oracle(3, t2, 2, 1)
        worst = max(worst, float(np.max(np.abs(got - expect))))
    report(2, worst <= 1e-12, f"max entrywise deviation {worst:.2e} over 50 angles")


FRAGMENT_EDGES = [(34, 43), (42, 43), (43, 44), (44, 45), (35, 47), (48, 47), (47, 46), (46, 45),
                  (63, 64), (65, 64), (64, 54), (54, 45)]


def test_criterion_03_layout_counts(report):
    start = time.perf_counter()
    eagle = CouplingGraph.eagle()
    assert all(eagle.has_edge(*e) for e in FRAGMENT_EDGES)
    nodes = {q for e in FRAGMENT_EDGES for q in e}
    fragment = eagle.subgraph(nodes)
    (point,) = gain_curve(fragment, [3])
    complete = CouplingGraph.complete(16)
    sizes = [max_pauli_term(complete, 0, d, TreeMode.SERIAL)[0] for d in range(5)]
    elapsed = time.perf_counter() - start
    ok = (point.serial, point.parallel, point.gain) == (7, 13, 6) and sizes == [2**d for d in range(5)] \
        and elapsed < 10
    report(3, ok, f"fragment d=3 serial {point.serial} parallel {point.parallel} gain {point.gain}; "
                  f"complete graph {sizes}; {elapsed:.2f} s")


def test_criterion_04_decoherence_arithmetic(report):
    value = predict_parallel_fidelity(0.9816, 0.514, 1.0)
    worst = 0.0
    for f in (0.5, 0.9, 0.9816, 0.999):
        worst = max(worst, abs(predict_parallel_fidelity(f, 1.0, 2.0) - math.sqrt(f)))
        for n in (2, 3, 5, 8):
            worst = max(worst, abs(predict_parallel_fidelity(f, 1.0 / n, 1.0) - f ** (1 / n)))
    ok = abs(value - 0.9905) <= 5e-4 and worst <= 1e-12
    report(4, ok, f"0.9816^0.514 -> {value:.6f}; sqrt and 1/n laws worst deviation {worst:.1e}")


def test_criterion_05_duration_halving(report):
    pairs = [(0, 1), (2, 1)]
    cfg = DeviceConfig.uniform(pairs)
    c = Circuit(3, [rzx(math.pi / 2, 0, 1), rzx(math.pi / 2, 2, 1)])
    seg = {m: cr_segment_duration(compile_schedule(prepare_circuit(c, m), cfg, m).schedule) for m in Mode}
    plain = duration_report(c, cfg).ratio
    echoed = duration_report(c, cfg, echo=True).ratio
    ok = 2 * seg[Mode.PARALLEL] == seg[Mode.SERIAL] and plain <= 0.52 and echoed <= 0.52
    report(5, ok, f"CR samples serial {seg[Mode.SERIAL]} parallel {seg[Mode.PARALLEL]}; "
                  f"ratio {plain:.6f} plain, {echoed:.6f} echoed")


def test_criterion_06_echo_suppression(report):
    cfg = DeviceConfig.uniform([(0, 1)])
    params = {(0, 1): CRHamiltonianParams(ZX=1.0, ZZ=0.05, IX=0.05)}
    c = Circuit(2, [rzx(math.pi / 2, 0, 1)])
    ideal = rzx_oracle(2, math.pi / 2, 0, 1)
    fids, times = {}, {}
    for echo in (False, True):
        start = time.perf_counter()
        lc = compile_schedule(prepare_circuit(c, Mode.SERIAL, echo=echo), cfg, Mode.SERIAL)
        fids[echo] = phase_fidelity(simulate_lowered(lc, cfg, params), ideal)
        times[echo] = time.perf_counter() - start
    ok = fids[True] > fids[False] and max(times.values()) < 5
    report(6, ok, f"unechoed {fids[False]:.6f}, echoed {fids[True]:.6f}; "
                  f"{times[False]:.2f} s / {times[True]:.2f} s")


def test_criterion_07_cycle_benchmark_fit(report):
    depths = (4, 8, 16, 32)
    exact, _ = synthetic_decay(0.95, 0.99, depths)
    fit = fit_decay(depths, exact)
    zs = []
    for seed in range(10):
        est, var = synthetic_decay(0.95, 0.99, depths, shots=1000, rng=np.random.default_rng(seed))
        f = fit_decay(depths, est, var)
        zs.append((f.p - 0.99) / f.sigma_p)
    ok = abs(fit.p - 0.99) <= 1e-6 and all(abs(z) <= 3 for z in zs)
    report(7, ok, f"exact |dp| {abs(fit.p - 0.99):.1e}; shot-noise max |z| {max(map(abs, zs)):.2f} over 10 seeds")


def test_criterion_08_truth_table(report):
    u = unitary_of_circuit(Circuit(3, [przx(math.pi / 2, (0, 2), 1)]))
    table = truth_table(u)
    # eigen-decomposition oracle for exp(-i pi/4 (ZXI + IXZ))
    h = (pauli_string("ZXI") + pauli_string("IXZ")) * math.pi / 4
    w, v = np.linalg.eigh(h)
    oracle = v @ np.diag(np.exp(-1j * w)) @ v.conj().T
    expected = {i: int(np.argmax(np.abs(oracle[:, i]))) for i in range(8)}
    got = {i: int(np.argmax(table[i])) for i in range(8)}
    peak_dev = max(abs(table[i, got[i]] - 1) for i in range(8))
    named = {0b000: 0b010, 0b001: 0b001, 0b101: 0b111}
    ok = got == expected and peak_dev <= 1e-10 and all(got[k] == v for k, v in named.items())
    mapping = " ".join(f"{i:03b}->{got[i]:03b}" for i in range(8))
    report(8, ok, f"{mapping}; max |P-1| {peak_dev:.1e}")


def test_criterion_09_ptm_properties(report):
    rng = np.random.default_rng(9)

    def haar(d):
        z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        q, r = np.linalg.qr(z)
        return q * (np.diag(r) / abs(np.diag(r)))

    edge_dev, mult_dev = 0.0, 0.0
    shape = None
    for _ in range(5):
        a, b = haar(8), haar(8)
        ra, rb = ptm_of_channel(a).matrix, ptm_of_channel(b).matrix
        shape = ra.shape
        unit = np.zeros(64)
        unit[0] = 1
        edge_dev = max(edge_dev, np.max(np.abs(ra[0] - unit)), np.max(np.abs(ra[:, 0] - unit)))
        mult_dev = max(mult_dev, np.max(np.abs(ptm_of_channel(a @ b).matrix - ra @ rb)))
    ok = edge_dev <= 1e-10 and mult_dev <= 1e-9 and shape == (64, 64)
    report(9, ok, f"shape {shape}; first row/col dev {edge_dev:.1e}; multiplicativity dev {mult_dev:.1e}")


def test_criterion_10_spam_normalization(report):
    f_id, x = 0.882, 0.957
    f_mle = f_id * x
    alpha = spam_alpha(f_mle, f_id)
    analytic = (1 - x) / (1 - f_mle)
    ideal_u = unitary_of_circuit(Circuit(3, [przx(math.pi / 2, (0, 2), 1)]))
    s_ideal = choi_of_unitary(ideal_u).matrix
    s_mle = apply_pauli_noise(ideal_u, PauliNoiseModel.depolarizing(3, 1 - f_mle)).to_choi()
    measured = process_fidelity(QuantumChannel.from_choi(s_mle), ideal_u)
    affine_dev = 0.0
    for a in (0.0, 0.25, alpha, 0.8, 1.0):
        blend = QuantumChannel.from_choi(a * s_mle + (1 - a) * s_ideal)
        affine_dev = max(affine_dev, abs(process_fidelity(blend, ideal_u) - (a * measured + 1 - a)))
    hit = process_fidelity(QuantumChannel.from_choi(alpha * s_mle + (1 - alpha) * s_ideal), ideal_u)
    ok = abs(alpha - analytic) <= 1e-12 and affine_dev <= 1e-12 and abs(hit - x) <= 1e-12 \
        and abs(alpha - 0.2757718) <= 1e-7
    report(10, ok, f"alpha {alpha:.7f} (analytic {analytic:.7f}); blended fidelity {hit:.12f}; "
                   f"affine dev {affine_dev:.1e}")


def test_criterion_11_simulated_rzx(report):
    cfg = DeviceConfig.uniform([(0, 1)])
    frag = lower_rzx(math.pi / 2, 0, 1, cfg)
    u = simulate_schedule(frag.schedule, CRHamiltonianParams(), cfg.edge(0, 1).cal, num_qubits=2)
    fid = phase_fidelity(u, rzx_oracle(2, math.pi / 2, 0, 1))
    report(11, fid >= 1 - 1e-6, f"phase-invariant fidelity {fid:.15f}")

