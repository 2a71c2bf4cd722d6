"""Pulse envelopes, channels and timed schedules.

Envelopes live on an integer sample grid. A pulse's rotation angle is taken
to be proportional to the sum of its samples, so every downstream transform
(stretching, merging, angle scaling) is expressed in terms of that area.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

DEFAULT_DT = 2.0 / 9.0 * 1e-9


class PulseError(ValueError):
    pass


class EnvelopeKind(str, Enum):
    GAUSSIAN_SQUARE = "gaussian_square"
    CONSTANT = "constant"


def _ramp(risefall: int, sigma: float) -> np.ndarray:
    """Lifted Gaussian rising edge, exactly 0 at sample 0."""
    if risefall == 0:
        return np.zeros(0)
    t = np.arange(risefall, dtype=float)
    g = np.exp(-((t - risefall) ** 2) / (2 * sigma**2))
    edge = math.exp(-(risefall**2) / (2 * sigma**2))
    return (g - edge) / (1 - edge)


@dataclass(frozen=True)
class PulseEnvelope:
    amplitude: float
    phase: float
    duration: int
    sigma: float = 1.0
    risefall: int = 0
    kind: EnvelopeKind = EnvelopeKind.CONSTANT

    def __post_init__(self):
        object.__setattr__(self, "kind", EnvelopeKind(self.kind))
        if not (isinstance(self.duration, (int, np.integer)) and self.duration >= 0):
            raise PulseError(f"duration must be a non-negative integer, got {self.duration!r}")
        if self.amplitude < 0:
            raise PulseError("amplitude must be non-negative")
        if self.sigma <= 0:
            raise PulseError("sigma must be positive")
        if self.kind is EnvelopeKind.GAUSSIAN_SQUARE:
            if self.risefall < 1:
                raise PulseError("gaussian_square needs risefall >= 1")
            if self.duration < 2 * self.risefall:
                raise PulseError(
                    f"duration {self.duration} shorter than 2*risefall={2 * self.risefall}"
                )

    @classmethod
    def constant(cls, amplitude: float, duration: int, phase: float = 0.0) -> "PulseEnvelope":
        return cls(amplitude, phase, int(duration))

    @classmethod
    def gaussian_square(
        cls,
        amplitude: float,
        duration: int,
        sigma: float | None = None,
        risefall: int | None = None,
        phase: float = 0.0,
    ) -> "PulseEnvelope":
        """Flat-top pulse with lifted Gaussian edges.

        Missing shape parameters default to ``sigma = duration / 8`` and
        ``risefall = 2 * sigma``.
        """
        if sigma is None:
            sigma = duration / 8
        if risefall is None:
            risefall = int(round(2 * sigma))
        return cls(amplitude, phase, int(duration), float(sigma), int(risefall),
                   EnvelopeKind.GAUSSIAN_SQUARE)

    def shape(self) -> np.ndarray:
        """Unit-amplitude real samples."""
        if self.kind is EnvelopeKind.CONSTANT:
            return np.ones(self.duration)
        ramp = _ramp(self.risefall, self.sigma)
        flat = np.ones(self.duration - 2 * self.risefall)
        return np.concatenate([ramp, flat, ramp[::-1]])

    def samples(self) -> np.ndarray:
        """Complex samples ``A * shape(t) * exp(i phase)``."""
        return self.amplitude * np.exp(1j * self.phase) * self.shape()

    def with_duration(self, duration: int) -> "PulseEnvelope":
        return replace(self, duration=int(duration))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "amplitude": float(self.amplitude),
            "phase": float(self.phase),
            "duration": int(self.duration),
            "sigma": float(self.sigma),
            "risefall": int(self.risefall),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PulseEnvelope":
        return cls(
            amplitude=float(d["amplitude"]),
            phase=float(d.get("phase", 0.0)),
            duration=int(d["duration"]),
            sigma=float(d.get("sigma", 1.0)),
            risefall=int(d.get("risefall", 0)),
            kind=EnvelopeKind(d.get("kind", "constant")),
        )


def unit_area(kind: EnvelopeKind, duration: int, sigma: float, risefall: int) -> float:
    """Area of the unit-amplitude envelope with the given shape."""
    if kind is EnvelopeKind.CONSTANT:
        return float(duration)
    return float(duration - 2 * risefall) + 2.0 * float(_ramp(risefall, sigma).sum())


def pulse_area(p: PulseEnvelope) -> complex:
    """Phased sum of envelope samples, in amplitude * samples."""
    a = p.amplitude * unit_area(p.kind, p.duration, p.sigma, p.risefall)
    return complex(a * np.exp(1j * p.phase))


@dataclass(frozen=True)
class AreaCalibration:
    """Radians of rotation per unit of (amplitude * sample)."""

    k: float

    def __post_init__(self):
        if not self.k > 0:
            raise PulseError("calibration constant must be positive")


def calibrate_area(reference: PulseEnvelope, theta_ref: float) -> AreaCalibration:
    area = abs(pulse_area(reference))
    if area == 0:
        raise PulseError("degenerate calibration pulse")
    return AreaCalibration(theta_ref / area)


def theta_of_pulse(p: PulseEnvelope, cal: AreaCalibration) -> float:
    """Rotation angle; a pulse whose phased area has negative real part rotates backwards."""
    area = pulse_area(p)
    sign = -1.0 if area.real < 0 else 1.0
    return sign * cal.k * abs(area)


def stretch_to(p: PulseEnvelope, duration: int) -> PulseEnvelope:
    """Change duration keeping ramps fixed and rescaling amplitude to conserve area."""
    duration = int(duration)
    if p.kind is EnvelopeKind.GAUSSIAN_SQUARE and duration < 2 * p.risefall:
        raise PulseError(f"stretched duration {duration} shorter than 2*risefall")
    if duration <= 0:
        raise PulseError("stretched duration must be positive")
    old = unit_area(p.kind, p.duration, p.sigma, p.risefall)
    new = unit_area(p.kind, duration, p.sigma, p.risefall)
    amp = p.amplitude * old / new
    if amp > 1.0 + 1e-12:
        raise PulseError(f"amplitude saturation: {amp:.4g} > 1")
    return replace(p, amplitude=amp, duration=duration)


def stretch_pulse(p: PulseEnvelope, factor: float) -> PulseEnvelope:
    if factor <= 0:
        raise PulseError("stretch factor must be positive")
    return stretch_to(p, int(round(p.duration * factor)))


class ChannelKind(str, Enum):
    DRIVE = "drive"
    CONTROL = "control"


@dataclass(frozen=True, order=True)
class Channel:
    kind: ChannelKind
    qubits: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "kind", ChannelKind(self.kind))
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        want = 1 if self.kind is ChannelKind.DRIVE else 2
        if len(self.qubits) != want:
            raise PulseError(f"{self.kind.value} channel needs {want} qubit(s)")
        if self.kind is ChannelKind.CONTROL and self.qubits[0] == self.qubits[1]:
            raise PulseError("control channel endpoints must differ")

    @classmethod
    def drive(cls, q: int) -> "Channel":
        return cls(ChannelKind.DRIVE, (q,))

    @classmethod
    def control(cls, control: int, target: int) -> "Channel":
        return cls(ChannelKind.CONTROL, (control, target))

    def __str__(self):
        if self.kind is ChannelKind.DRIVE:
            return f"d{self.qubits[0]}"
        return f"u{self.qubits[0]}_{self.qubits[1]}"


@dataclass(frozen=True)
class Instruction:
    start: int
    channel: Channel
    envelope: PulseEnvelope

    @property
    def stop(self) -> int:
        return self.start + self.envelope.duration


@dataclass(frozen=True)
class Schedule:
    dt: float = DEFAULT_DT
    instructions: tuple[Instruction, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "instructions", tuple(self.instructions))

    @property
    def duration(self) -> int:
        return max((i.stop for i in self.instructions), default=0)

    @property
    def qubits(self) -> set[int]:
        return {q for i in self.instructions for q in i.channel.qubits}

    def shifted(self, offset: int) -> "Schedule":
        return Schedule(self.dt, tuple(replace(i, start=i.start + offset) for i in self.instructions))

    def __add__(self, other: "Schedule") -> "Schedule":
        return Schedule(self.dt, self.instructions + other.instructions)

    def on(self, channel: Channel) -> list[Instruction]:
        return sorted((i for i in self.instructions if i.channel == channel), key=lambda i: i.start)

    def to_dict(self) -> dict:
        return {
            "dt": float(self.dt),
            "instructions": [
                {
                    "start": int(i.start),
                    "channel": {"kind": i.channel.kind.value, "qubits": list(i.channel.qubits)},
                    "envelope": i.envelope.to_dict(),
                }
                for i in self.instructions
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Schedule":
        ins = []
        for raw in d.get("instructions", []):
            ch = Channel(ChannelKind(raw["channel"]["kind"]), tuple(raw["channel"]["qubits"]))
            ins.append(Instruction(int(raw["start"]), ch, PulseEnvelope.from_dict(raw["envelope"])))
        return cls(float(d.get("dt", DEFAULT_DT)), tuple(ins))

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text: str) -> "Schedule":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, order=True)
class Violation:
    sample: int
    channel: str
    message: str


def validate_schedule(s: Schedule) -> list[Violation]:
    """Every negative start and every same-channel overlap. Empty list means valid."""
    out: list[Violation] = []
    by_channel: dict[Channel, list[Instruction]] = {}
    for ins in s.instructions:
        if ins.start < 0:
            out.append(Violation(ins.start, str(ins.channel), "negative start"))
        by_channel.setdefault(ins.channel, []).append(ins)
    for ch, items in by_channel.items():
        items = sorted(items, key=lambda i: (i.start, i.stop))
        for a, b in zip(items, items[1:]):
            # zero-length pulses occupy nothing
            if a.envelope.duration and b.envelope.duration and b.start < a.stop:
                out.append(Violation(b.start, str(ch), f"overlap [{a.start},{a.stop}) / [{b.start},{b.stop})"))
    return sorted(out)


def sequence(schedules: Iterable[Schedule], dt: float = DEFAULT_DT) -> Schedule:
    """Concatenate back to back."""
    t = 0
    acc = Schedule(dt)
    for s in schedules:
        acc = acc + s.shifted(t)
        t += s.duration
    return acc


def envelope_on_grid(ins: Sequence[Instruction], duration: int) -> np.ndarray:
    """Sum of complex samples of the given instructions on [0, duration)."""
    out = np.zeros(duration, dtype=complex)
    for i in ins:
        out[i.start:i.stop] += i.envelope.samples()
    return out
