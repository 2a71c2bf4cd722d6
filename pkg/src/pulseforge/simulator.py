"""Dense-matrix verification engine.

Bit order is fixed globally: qubit 0 is the most significant bit of a
basis-state index. Choi matrices are stored unnormalized (trace ``d``) in
input-then-output order, ``S = sum_ij |i><j| (x) L(|i><j|)``.
"""
from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .ir import Circuit, Gate
from .pulse import AreaCalibration, ChannelKind, Schedule, validate_schedule

MAX_QUBITS = 6

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}

_SQ = {
    "x": X,
    "z": Z,
    "h": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "s": np.diag([1, 1j]),
    "sdg": np.diag([1, -1j]),
    # X**a = P+ + exp(i pi a) P-
    "sx": 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]]),
    "x32": 0.5 * np.array([[1 - 1j, 1 + 1j], [1 + 1j, 1 - 1j]]),
}
_CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
_CZ = np.diag([1, 1, 1, -1]).astype(complex)


class SimulationError(ValueError):
    pass


def kron(*ops: np.ndarray) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def pauli_string(label: str) -> np.ndarray:
    return kron(*(PAULI[c] for c in label))


def expm_hermitian(h: np.ndarray, t: float = 1.0) -> np.ndarray:
    """exp(-i h t) for Hermitian h via eigendecomposition."""
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def rx_matrix(angle: float) -> np.ndarray:
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def rzx_matrix(theta: float) -> np.ndarray:
    return np.cos(theta / 2) * np.eye(4) - 1j * np.sin(theta / 2) * np.kron(Z, X)


def przx_matrix(thetas: Sequence[float]) -> np.ndarray:
    """Closed form on (controls..., target).

    All generator terms share the target's X axis, so each control basis state
    ``z`` sees an X rotation of the target by ``sum_k thetas[k] * (+-1)``.
    """
    n = len(thetas)
    out = np.zeros((2 ** (n + 1),) * 2, dtype=complex)
    for idx, bits in enumerate(itertools.product((0, 1), repeat=n)):
        angle = sum(t * (1 - 2 * b) for t, b in zip(thetas, bits))
        out[2 * idx:2 * idx + 2, 2 * idx:2 * idx + 2] = rx_matrix(angle)
    return out


def gate_matrix(g: Gate) -> np.ndarray:
    """Matrix on ``g.qubits`` in listed order (first listed = most significant)."""
    if g.kind in _SQ:
        return _SQ[g.kind]
    if g.kind == "rz":
        lam = g.params[0]
        return np.diag([np.exp(-0.5j * lam), np.exp(0.5j * lam)])
    if g.kind == "rzx":
        return rzx_matrix(g.params[0])
    if g.kind == "przx":
        # qubits are (controls..., target): matches przx_matrix ordering
        return przx_matrix(g.params)
    if g.kind == "cnot":
        return _CNOT
    if g.kind == "cz":
        return _CZ
    raise SimulationError(f"no matrix for {g.kind}")


def apply_local(u: np.ndarray, m: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Left-multiply ``u`` by ``m`` acting on ``qubits`` of an n-qubit register."""
    k = len(qubits)
    cols = u.shape[1]
    t = u.reshape((2,) * n + (cols,))
    t = np.tensordot(m.reshape((2,) * (2 * k)), t, axes=(list(range(k, 2 * k)), list(qubits)))
    # tensordot puts the gate's output axes first
    t = np.moveaxis(t, list(range(k)), list(qubits))
    return t.reshape(2**n, cols)


def embed(m: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    return apply_local(np.eye(2**n, dtype=complex), m, qubits, n)


def unitary_of_gate(g: Gate, num_qubits: int | None = None) -> np.ndarray:
    if num_qubits is None:
        return gate_matrix(g)
    return embed(gate_matrix(g), g.qubits, num_qubits)


def unitary_of_circuit(c: Circuit) -> np.ndarray:
    if c.num_qubits > MAX_QUBITS:
        raise SimulationError(f"{c.num_qubits} qubits exceeds the dense limit of {MAX_QUBITS}")
    u = np.eye(2**c.num_qubits, dtype=complex)
    for g in c.gates:
        u = apply_local(u, gate_matrix(g), g.qubits, c.num_qubits)
    return u


def compact(c: Circuit) -> tuple[Circuit, list[int]]:
    """Relabel the qubits a circuit touches to 0..k-1 (sorted); returns the old labels."""
    used = sorted({q for g in c.gates for q in g.qubits})
    pos = {q: i for i, q in enumerate(used)}
    gates = tuple(Gate(g.kind, tuple(pos[q] for q in g.qubits), g.params) for g in c.gates)
    return Circuit(max(len(used), 1), gates), used


def phase_fidelity(u: np.ndarray, v: np.ndarray) -> float:
    """|Tr(U^dag V)|^2 / d^2, blind to global phase."""
    d = u.shape[0]
    return float(abs(np.trace(u.conj().T @ v)) ** 2 / d**2)


def phase_distance(u: np.ndarray, v: np.ndarray) -> float:
    """Max-entry distance after removing the best global phase."""
    tr = np.trace(u.conj().T @ v)
    phase = tr / abs(tr) if abs(tr) > 1e-15 else 1.0
    return float(np.max(np.abs(u * phase - v)))


# --- cross-resonance Hamiltonian -------------------------------------------

_CR_TERMS = ("ZI", "ZX", "ZY", "ZZ", "IX", "IY", "IZ")


@dataclass(frozen=True)
class CRHamiltonianParams:
    """Coupling constants (rad/s at unit normalized drive) of a driven control/target pair."""

    ZI: float = 0.0
    ZX: float = 1.0
    ZY: float = 0.0
    ZZ: float = 0.0
    IX: float = 0.0
    IY: float = 0.0
    IZ: float = 0.0

    def __post_init__(self):
        if not all(np.isfinite(getattr(self, k)) for k in _CR_TERMS):
            raise SimulationError("coupling constants must be finite")

    @classmethod
    def from_dict(cls, d: Mapping[str, float]) -> "CRHamiltonianParams":
        bad = set(d) - set(_CR_TERMS)
        if bad:
            raise SimulationError(f"unknown coupling terms {sorted(bad)}")
        return cls(**{k: float(v) for k, v in d.items()})

    def to_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in _CR_TERMS}

    def scaled(self, factor: float) -> "CRHamiltonianParams":
        return CRHamiltonianParams(**{k: getattr(self, k) * factor for k in _CR_TERMS})


def _cr_parts(params: CRHamiltonianParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(longitudinal, transverse, transverse rotated by pi/2 about Z_b) pieces of 2 H_CR."""
    lon = np.kron(Z, params.ZI * I2 + params.ZZ * Z) + np.kron(I2, params.IZ * Z)
    tr = np.kron(Z, params.ZX * X + params.ZY * Y) + np.kron(I2, params.IX * X + params.IY * Y)
    rot = np.kron(Z, params.ZX * Y - params.ZY * X) + np.kron(I2, params.IX * Y - params.IY * X)
    return lon, tr, rot


def cr_hamiltonian(
    params: CRHamiltonianParams,
    drive: float,
    phase: float = 0.0,
    comp_amplitude: float = 0.0,
    comp_phase: float = 0.0,
) -> np.ndarray:
    """(Z_a B_b + I_a C_b)/2 with every coupling scaled by ``drive``.

    The drive phase rotates the target's X/Y terms about Z_b, so phase pi
    flips ZX and IX while ZZ, ZI and IZ keep their sign. The compensation
    tone adds ``comp_amplitude (cos phi X_b + sin phi Y_b) / 2``.
    """
    lon, tr, rot = _cr_parts(params)
    h = drive * (lon + np.cos(phase) * tr + np.sin(phase) * rot) / 2
    if comp_amplitude:
        h = h + comp_amplitude * np.kron(I2, np.cos(comp_phase) * X + np.sin(comp_phase) * Y) / 2
    return h


def _per_edge(value, edge):
    if isinstance(value, Mapping):
        if edge not in value:
            raise SimulationError(f"no Hamiltonian data for edge {edge}")
        return value[edge]
    return value


def simulate_schedule(
    s: Schedule,
    params: Mapping[tuple[int, int], CRHamiltonianParams] | CRHamiltonianParams,
    cal: Mapping[tuple[int, int], AreaCalibration] | AreaCalibration,
    drive_cal: AreaCalibration | None = None,
    num_qubits: int | None = None,
) -> np.ndarray:
    """Propagator of a schedule under the cross-resonance model.

    A control-channel sample with phased value ``e = |e| exp(i phi)``
    contributes ``(k / w_ZX) cr_hamiltonian(params, |e|, phi)`` per sample, so
    that a pure ZX coupling turns the calibrated area into exactly ``theta``. Drive-channel samples rotate their
    qubit by ``k_drive |e|`` about the axis set by the pulse phase. The
    Hamiltonian is held constant within each sample; consecutive samples with
    identical coefficients are exponentiated in one step.
    """
    if validate_schedule(s):
        raise SimulationError("invalid schedule")
    n = num_qubits if num_qubits is not None else (max(s.qubits) + 1 if s.qubits else 1)
    if n > MAX_QUBITS:
        raise SimulationError(f"{n} qubits exceeds the dense limit of {MAX_QUBITS}")
    dim = 2**n
    total = s.duration
    if total == 0:
        return np.eye(dim, dtype=complex)

    terms: list[np.ndarray] = []
    coefs: list[np.ndarray] = []
    for ins in s.instructions:
        if ins.envelope.duration == 0:
            continue
        samples = np.zeros(total, dtype=complex)
        samples[ins.start:ins.stop] = ins.envelope.samples()
        if ins.channel.kind is ChannelKind.CONTROL:
            edge = ins.channel.qubits
            p = _per_edge(params, edge)
            k = _per_edge(cal, edge).k
            if p.ZX == 0:
                raise SimulationError(f"edge {edge} has no ZX coupling")
            scale = k / p.ZX / 2
            for part, coef in zip(_cr_parts(p), (np.abs(samples), samples.real, samples.imag)):
                terms.append(embed(part, edge, n) * scale)
                coefs.append(coef)
        else:
            if drive_cal is None:
                raise SimulationError("drive-channel pulse but no drive calibration")
            (q,) = ins.channel.qubits
            terms.append(embed(X, (q,), n) * drive_cal.k / 2)
            coefs.append(samples.real)
            terms.append(embed(Y, (q,), n) * drive_cal.k / 2)
            coefs.append(samples.imag)

    u = np.eye(dim, dtype=complex)
    if not terms:
        return u
    c = np.vstack(coefs)
    change = np.flatnonzero(np.any(np.diff(c, axis=1) != 0, axis=0)) + 1
    bounds = np.concatenate([[0], change, [total]])
    stack = np.stack(terms)
    for a, b in zip(bounds[:-1], bounds[1:]):
        h = np.tensordot(c[:, a], stack, axes=1)
        u = expm_hermitian(h, float(b - a)) @ u
    return u


# --- channels ----------------------------------------------------------------

@lru_cache(maxsize=None)
def pauli_labels(n: int) -> tuple[str, ...]:
    return tuple("".join(p) for p in itertools.product("IXYZ", repeat=n))


@lru_cache(maxsize=None)
def pauli_basis(n: int) -> np.ndarray:
    """Stack of all n-qubit Pauli strings, lexicographic in I<X<Y<Z."""
    return np.stack([pauli_string(lbl) for lbl in pauli_labels(n)])


def _nqubits(dim: int) -> int:
    n = int(round(np.log2(dim)))
    if 2**n != dim:
        raise SimulationError(f"dimension {dim} is not a power of two")
    return n


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    """A process on n qubits held as a unitary, a Choi matrix or a PTM."""

    kind: str
    matrix: np.ndarray

    def __post_init__(self):
        if self.kind not in ("unitary", "choi", "ptm"):
            raise SimulationError(f"unknown channel representation {self.kind!r}")

    @classmethod
    def from_unitary(cls, u: np.ndarray) -> "QuantumChannel":
        return cls("unitary", np.asarray(u, dtype=complex))

    @classmethod
    def from_choi(cls, s: np.ndarray) -> "QuantumChannel":
        return cls("choi", np.asarray(s, dtype=complex))

    @property
    def num_qubits(self) -> int:
        dim = self.matrix.shape[0]
        if self.kind == "unitary":
            return _nqubits(dim)
        if self.kind == "choi":
            return _nqubits(dim) // 2
        return _nqubits(dim) // 2

    @property
    def dim(self) -> int:
        return 2**self.num_qubits

    def to_choi(self) -> np.ndarray:
        if self.kind == "choi":
            return self.matrix
        if self.kind == "unitary":
            return choi_of_unitary(self.matrix).matrix
        return choi_of_ptm(self.matrix)

    def to_ptm(self) -> np.ndarray:
        return ptm_of_channel(self).matrix

    def apply(self, rho: np.ndarray) -> np.ndarray:
        if self.kind == "unitary":
            return self.matrix @ rho @ self.matrix.conj().T
        d = self.dim
        s = self.to_choi().reshape(d, d, d, d)
        # L(rho)[a,b] = sum_ij rho_ij S[i,a,j,b]
        return np.einsum("ij,iajb->ab", rho, s)


def choi_of_unitary(u: np.ndarray) -> QuantumChannel:
    d = u.shape[0]
    # vec(U) with input index first: |U>> = sum_i |i> (x) U|i>
    v = u.T.reshape(d * d)
    return QuantumChannel.from_choi(np.outer(v, v.conj()))


def choi_of_ptm(r: np.ndarray) -> np.ndarray:
    n = _nqubits(r.shape[0]) // 2
    d = 2**n
    basis = pauli_basis(n)
    # L(P_j) = sum_i R_ij P_i ; S = (1/d) sum_j P_j^T (x) L(P_j)
    images = np.einsum("ij,iab->jab", r, basis)
    return sum(np.kron(basis[j].T, images[j]) for j in range(d * d)) / d


def ptm_of_channel(ch: QuantumChannel | np.ndarray) -> QuantumChannel:
    """R_ij = Tr(P_i L(P_j)) / d, real with entries in [-1, 1].

    Column j is the image of P_j, so composition multiplies:
    R(A o B) = R(A) R(B).
    """
    if isinstance(ch, np.ndarray):
        ch = QuantumChannel.from_unitary(ch)
    if ch.kind == "ptm":
        return ch
    n = ch.num_qubits
    d = 2**n
    basis = pauli_basis(n)
    if ch.kind == "unitary":
        u = ch.matrix
        images = np.einsum("ab,jbc,dc->jad", u, basis, u.conj())
    else:
        s = ch.matrix.reshape(d, d, d, d)
        images = np.einsum("jik,iakb->jab", basis, s)
    r = np.einsum("iba,jab->ij", basis, images).real / d
    return QuantumChannel("ptm", r)


def ptm_diff(a: QuantumChannel | np.ndarray, b: QuantumChannel | np.ndarray) -> np.ndarray:
    ra = a if isinstance(a, np.ndarray) and a.ndim == 2 and np.isrealobj(a) else ptm_of_channel(a).matrix
    rb = b if isinstance(b, np.ndarray) and b.ndim == 2 and np.isrealobj(b) else ptm_of_channel(b).matrix
    return ra - rb


def _as_channel(x) -> QuantumChannel:
    return x if isinstance(x, QuantumChannel) else QuantumChannel.from_unitary(x)


def process_fidelity(a, b) -> float:
    """Tr(S_a S_b)/d^2 on trace-d Choi matrices; |Tr U^dag V|^2/d^2 for unitaries."""
    a, b = _as_channel(a), _as_channel(b)
    if a.kind == "unitary" and b.kind == "unitary":
        return phase_fidelity(a.matrix, b.matrix)
    d = a.dim
    return float(np.trace(a.to_choi() @ b.to_choi()).real / d**2)


def truth_table(ch) -> np.ndarray:
    """T[i, j] = probability of reading |j> after preparing |i>."""
    ch = _as_channel(ch)
    if ch.kind == "unitary":
        return np.abs(ch.matrix.T) ** 2
    d = ch.dim
    s = ch.to_choi().reshape(d, d, d, d)
    # Tr[S (|i><i|^T (x) |j><j|)] = S[i,j,i,j]
    return np.einsum("ijij->ij", s).real


def basis_labels(n: int) -> list[str]:
    return ["".join(b) for b in itertools.product("01", repeat=n)]


# --- export --------------------------------------------------------------------

def matrix_to_csv(m: np.ndarray) -> str:
    """Row-major, each entry written as a (real, imag) pair of columns."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in np.asarray(m, dtype=complex):
        w.writerow([repr(float(v)) for z in row for v in (z.real, z.imag)])
    return buf.getvalue()


def matrix_from_csv(text: str) -> np.ndarray:
    rows = [list(map(float, r)) for r in csv.reader(io.StringIO(text)) if r]
    a = np.array(rows)
    return a[:, 0::2] + 1j * a[:, 1::2]


def ptm_to_csv(r: np.ndarray) -> str:
    n = _nqubits(r.shape[0]) // 2
    labels = pauli_labels(n)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row"] + list(labels))
    for lbl, row in zip(labels, np.asarray(r, dtype=float)):
        w.writerow([lbl] + [repr(float(v)) for v in row])
    return buf.getvalue()
