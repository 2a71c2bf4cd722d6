"""Decoherence arithmetic, SPAM normalization, Pauli noise and tomography."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping

import numpy as np

from .simulator import (
    QuantumChannel,
    _SQ,
    basis_labels,
    choi_of_ptm,
    choi_of_unitary,
    kron,
    pauli_basis,
    pauli_labels,
    pauli_string,
    process_fidelity,
    truth_table,
)


class NoiseError(ValueError):
    pass


@dataclass(frozen=True)
class DecoherenceParams:
    """Exponential approach of process fidelity to the fully mixed value 2^-n."""

    beta: float
    n_qubits: int

    def __post_init__(self):
        if self.beta < 0:
            raise NoiseError("beta must be non-negative")
        if self.n_qubits < 1:
            raise NoiseError("n_qubits must be positive")

    @property
    def f0(self) -> float:
        return 2.0 ** -self.n_qubits

    @classmethod
    def from_times(cls, t1: Mapping[int, float], t2: Mapping[int, float], qubits) -> "DecoherenceParams":
        """Rate summed over qubits, each contributing (1/T1 + 1/T2) / 2."""
        qubits = list(qubits)
        beta = sum(0.5 * (1 / t1[q] + 1 / t2[q]) for q in qubits)
        return cls(beta, len(qubits))


def fidelity_decay(t: float, params: DecoherenceParams) -> float:
    f0 = params.f0
    return (1 - f0) * math.exp(-params.beta * t) + f0


def predict_parallel_fidelity(f_serial: float, t_parallel: float, t_serial: float, f0: float = 0.0) -> float:
    """Fidelity after the same decoherence acting for t_parallel instead of t_serial.

    With f0 = 0 this is ``f_serial ** (t_parallel / t_serial)``.
    """
    if f_serial < f0:
        raise NoiseError(f"below mixed-state floor: F_S={f_serial} < F0={f0}")
    if t_serial <= 0 or t_parallel < 0:
        raise NoiseError("durations must be positive")
    return (1 - f0) * ((f_serial - f0) / (1 - f0)) ** (t_parallel / t_serial) + f0


def _choi(x) -> np.ndarray:
    if isinstance(x, QuantumChannel):
        return x.to_choi()
    return np.asarray(x, dtype=complex)


def spam_alpha(f_mle: float, f_id: float) -> float:
    """Weight on the measured process so the blend's fidelity is f_mle / f_id."""
    target = f_mle / f_id
    if target > 1 + 1e-12:
        raise NoiseError(f"negative weight: F_mle={f_mle} exceeds F_id={f_id}")
    if f_mle >= 1:
        return 0.0
    return max(0.0, (1 - target) / (1 - f_mle))


def spam_normalize(s_mle, s_ideal, f_id: float) -> tuple[np.ndarray, float]:
    """Blend ``alpha S_mle + (1 - alpha) S_ideal`` whose fidelity to the ideal is F_mle / F_id.

    Choi matrices are trace-d; fidelity is Tr(S_a S_b) / d^2, which is affine
    in alpha because the ideal process has unit fidelity with itself.
    """
    a, b = _choi(s_mle), _choi(s_ideal)
    f_mle = process_fidelity(QuantumChannel.from_choi(a), QuantumChannel.from_choi(b))
    alpha = spam_alpha(f_mle, f_id)
    return alpha * a + (1 - alpha) * b, alpha


def normalized_truth_table(s_norm) -> tuple[np.ndarray, list[str]]:
    """Truth table of a (blended) Choi matrix with its basis-state labels."""
    s = _choi(s_norm)
    ch = QuantumChannel.from_choi(s)
    return truth_table(ch), basis_labels(ch.num_qubits)


@lru_cache(maxsize=None)
def _anticommute(n: int) -> np.ndarray:
    """A[i, j] = 1 when Pauli strings i and j anticommute."""
    single = np.array([[0, 0, 0, 0], [0, 0, 1, 1], [0, 1, 0, 1], [0, 1, 1, 0]])
    idx = np.array(list(itertools.product(range(4), repeat=n))).reshape(-1, n)
    out = np.zeros((4**n, 4**n), dtype=int)
    for q in range(n):
        out += single[np.ix_(idx[:, q], idx[:, q])]
    return out % 2


@dataclass(frozen=True)
class PauliNoiseModel:
    """Random Pauli error: string P occurs with probability probs[P], identity otherwise."""

    n: int
    probs: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        probs = {k.upper(): float(v) for k, v in dict(self.probs).items() if v}
        for k, v in probs.items():
            if len(k) != self.n or set(k) - set("IXYZ"):
                raise NoiseError(f"bad Pauli label {k!r} for {self.n} qubits")
            if v < 0:
                raise NoiseError("probabilities must be non-negative")
        if "I" * self.n in probs:
            raise NoiseError("give only non-identity probabilities")
        if sum(probs.values()) > 1 + 1e-12:
            raise NoiseError("probabilities sum above 1")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def depolarizing(cls, n: int, q: float) -> "PauliNoiseModel":
        """Total error probability q spread evenly over the 4^n - 1 non-identity strings."""
        labels = pauli_labels(n)[1:]
        return cls(n, {lbl: q / len(labels) for lbl in labels})

    def vector(self) -> np.ndarray:
        """Probabilities over all strings in lexicographic order, identity first."""
        labels = pauli_labels(self.n)
        v = np.array([self.probs.get(lbl, 0.0) for lbl in labels])
        v[0] = 1 - v[1:].sum()
        return v

    def eigenvalues(self) -> np.ndarray:
        """Diagonal of the channel's PTM: f_P = sum_Q p_Q (-1)^[P anticommutes with Q]."""
        return (1 - 2 * _anticommute(self.n)) @ self.vector()

    def ptm(self) -> np.ndarray:
        return np.diag(self.eigenvalues())


def apply_pauli_noise(u: np.ndarray, noise: PauliNoiseModel) -> QuantumChannel:
    """Choi matrix of U followed by the Pauli error."""
    s = choi_of_unitary(u).matrix
    d = u.shape[0]
    out = np.zeros_like(s)
    for lbl, p in zip(pauli_labels(noise.n), noise.vector()):
        if p:
            k = np.kron(np.eye(d), pauli_string(lbl))
            out += p * k @ s @ k.conj().T
    return QuantumChannel.from_choi(out)


# --- linear-inversion process tomography --------------------------------------

_PREP = {
    "0": np.array([1, 0, 0, 1.0]),
    "1": np.array([1, 0, 0, -1.0]),
    "+": np.array([1, 1, 0, 0.0]),
    "+i": np.array([1, 0, 1, 0.0]),
}
# rotate the measured axis onto Z before reading out
_MEASURE = {"X": _SQ["h"], "Y": _SQ["sx"], "Z": np.eye(2, dtype=complex)}


def _pauli_vector_to_rho(v: np.ndarray, n: int) -> np.ndarray:
    return np.tensordot(v, pauli_basis(n), axes=1) / 2**n


def shot_tomography(ch, shots: int = 0, seed: int | None = None) -> np.ndarray:
    """Reconstruct a Choi matrix from simulated measurements.

    Inputs are all products of |0>, |1>, |+>, |+i>; each output is read in
    all 3^n Pauli bases. ``shots=0`` uses exact outcome probabilities.
    Pauli expectations are averaged over every setting that measures them,
    and the transfer matrix follows by inverting the input frame.
    """
    ch = ch if isinstance(ch, QuantumChannel) else QuantumChannel.from_unitary(ch)
    if shots < 0:
        raise NoiseError("shots must be non-negative")
    n = ch.num_qubits
    d = 2**n
    rng = np.random.default_rng(seed)
    labels = pauli_labels(n)
    settings = list(itertools.product("XYZ", repeat=n))
    rotations = [kron(*(_MEASURE[b] for b in s)) for s in settings]
    bits = np.array(list(itertools.product((0, 1), repeat=n)))
    inputs = list(itertools.product(_PREP, repeat=n))

    m_in = np.stack([kron(*(_PREP[k][None, :] for k in inp)).ravel().real for inp in inputs], axis=1)
    m_out = np.zeros((d * d, len(inputs)))
    for col, inp in enumerate(inputs):
        rho = _pauli_vector_to_rho(m_in[:, col], n)
        out = ch.apply(rho)
        sums = np.zeros(d * d)
        counts = np.zeros(d * d)
        for setting, w in zip(settings, rotations):
            probs = np.clip(np.real(np.diag(w @ out @ w.conj().T)), 0, None)
            probs = probs / probs.sum()
            if shots:
                probs = rng.multinomial(shots, probs) / shots
            for li, lbl in enumerate(labels):
                if all(p == "I" or p == b for p, b in zip(lbl, setting)):
                    mask = np.array([p != "I" for p in lbl])
                    sign = (-1.0) ** bits[:, mask].sum(axis=1)
                    sums[li] += sign @ probs
                    counts[li] += 1
        m_out[:, col] = sums / counts
    r = m_out @ np.linalg.inv(m_in)
    return choi_of_ptm(r)
