"""Lowering circuits to pulse schedules, with merged PRZX pulses.

Each RZX(theta) becomes a cross-resonance (CR) pulse on ``Control(c, t)``
plus a compensation tone on ``Drive(t)``, both cut from per-edge references
that implement RZX(pi/2). A PRZX lowers to its RZX pulses played at the same
time: the CR pulses are stretched to a common length, and the compensation
tones (all on the shared target's drive line) are summed into one tone.

Z-type gates are virtual: they shift the phase of later pulses on the same
qubit's frame and never occupy time. The residual frame per qubit is
returned with the schedule so simulations can close it with an explicit RZ.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .compiler import echo_circuit, lower_cnot_cz, parallel_cnot_group, reduce_circuit
from .ir import Circuit, Gate, przx
from .pulse import (
    DEFAULT_DT,
    AreaCalibration,
    Channel,
    ChannelKind,
    EnvelopeKind,
    Instruction,
    PulseEnvelope,
    PulseError,
    Schedule,
    calibrate_area,
    pulse_area,
    stretch_to,
    unit_area,
    validate_schedule,
)

HALF_PI = math.pi / 2
_ANGLE_SLACK = 1e-12


class LoweringError(ValueError):
    pass


class Mode(str, Enum):
    SERIAL = "serial"
    PARALLEL = "parallel"


class ThetaPolicy(str, Enum):
    DURATION = "duration"
    AMPLITUDE = "amplitude"


class PhaseRule(str, Enum):
    COMPLEX = "complex"
    # phase = sum(phi_i A_i t_i) / A, kept for side-by-side comparison
    WEIGHTED = "weighted"


@dataclass(frozen=True)
class EdgeCalibration:
    """Reference pulses implementing RZX(pi/2) on one directed edge."""

    cr: PulseEnvelope
    comp: PulseEnvelope | None = None

    @property
    def cal(self) -> AreaCalibration:
        return calibrate_area(self.cr, HALF_PI)


@dataclass(frozen=True)
class DeviceConfig:
    edges: Mapping[tuple[int, int], EdgeCalibration]
    dt: float = DEFAULT_DT
    a_max: float = 1.0
    sq_duration: int = 160
    sq_amplitude: float = 0.2
    t1: Mapping[int, float] = field(default_factory=dict)
    t2: Mapping[int, float] = field(default_factory=dict)
    theta_policy: ThetaPolicy = ThetaPolicy.DURATION
    phase_rule: PhaseRule = PhaseRule.COMPLEX

    def __post_init__(self):
        object.__setattr__(self, "edges", {tuple(map(int, k)): v for k, v in dict(self.edges).items()})
        object.__setattr__(self, "theta_policy", ThetaPolicy(self.theta_policy))
        object.__setattr__(self, "phase_rule", PhaseRule(self.phase_rule))
        if not 0 < self.a_max <= 1:
            raise LoweringError("a_max must lie in (0, 1]")
        if self.sq_duration < 1 or not 0 < self.sq_amplitude <= self.a_max:
            raise LoweringError("single-qubit pulses need positive duration and amplitude <= a_max")
        for edge, ec in self.edges.items():
            for p in (ec.cr, ec.comp):
                if p is not None and p.amplitude > self.a_max + 1e-12:
                    raise LoweringError(f"edge {edge} reference amplitude exceeds a_max")

    def edge(self, control: int, target: int) -> EdgeCalibration:
        try:
            return self.edges[(control, target)]
        except KeyError:
            raise LoweringError(f"no calibration for edge ({control}, {target})") from None

    @property
    def drive_cal(self) -> AreaCalibration:
        """Calibration of single-qubit drive pulses: sq_amplitude over sq_duration is a pi rotation."""
        return AreaCalibration(math.pi / (self.sq_amplitude * self.sq_duration))

    @classmethod
    def uniform(
        cls,
        pairs: Iterable[tuple[int, int]],
        cr: PulseEnvelope | None = None,
        comp: PulseEnvelope | None = None,
        **kw,
    ) -> "DeviceConfig":
        """Same reference pulses on every listed directed edge."""
        cr = cr if cr is not None else default_cr_reference()
        return cls({tuple(p): EdgeCalibration(cr, comp) for p in pairs}, **kw)

    # serialization

    def to_dict(self) -> dict:
        return {
            "dt": self.dt,
            "a_max": self.a_max,
            "sq_gate_duration": self.sq_duration,
            "sq_amplitude": self.sq_amplitude,
            "theta_policy": self.theta_policy.value,
            "phase_rule": self.phase_rule.value,
            "t1": {str(q): v for q, v in self.t1.items()},
            "t2": {str(q): v for q, v in self.t2.items()},
            "edges": [
                {
                    "control": c,
                    "target": t,
                    "cr": ec.cr.to_dict(),
                    "comp": ec.comp.to_dict() if ec.comp is not None else None,
                }
                for (c, t), ec in sorted(self.edges.items())
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DeviceConfig":
        try:
            edges = {
                (int(e["control"]), int(e["target"])): EdgeCalibration(
                    PulseEnvelope.from_dict(e["cr"]),
                    PulseEnvelope.from_dict(e["comp"]) if e.get("comp") else None,
                )
                for e in d["edges"]
            }
            return cls(
                edges,
                dt=float(d.get("dt", DEFAULT_DT)),
                a_max=float(d.get("a_max", 1.0)),
                sq_duration=int(d.get("sq_gate_duration", 160)),
                sq_amplitude=float(d.get("sq_amplitude", 0.2)),
                t1={int(q): float(v) for q, v in d.get("t1", {}).items()},
                t2={int(q): float(v) for q, v in d.get("t2", {}).items()},
                theta_policy=d.get("theta_policy", "duration"),
                phase_rule=d.get("phase_rule", "complex"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise LoweringError(f"bad device config: {exc}") from exc

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def load(cls, path: str | Path) -> "DeviceConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def default_cr_reference() -> PulseEnvelope:
    """RZX(pi/2) CR pulse used when no device file is given (about 427 ns at dt = 2/9 ns)."""
    return PulseEnvelope.gaussian_square(0.3, 1920, sigma=64, risefall=128)


def belem_like_config() -> DeviceConfig:
    """Three-qubit device shaped after a small heavy-hex processor.

    Qubit 1 is the common target of edges (0, 1) and (2, 1). The CR
    references are sized so each echoed CNOT-class gate lasts roughly 400 ns,
    and T1/T2 are taken from that device's published calibration.
    """
    # echo halves of 768 and 736 samples implement RZX(pi/4) each
    crs = {(0, 1): 768, (2, 1): 736}
    edges = {}
    for edge, half in crs.items():
        ref = PulseEnvelope.gaussian_square(0.3, 2 * half, sigma=64, risefall=128)
        quarter = _scaled(ref, 0.5, ThetaPolicy.DURATION)
        # tune the full-angle reference so its half-area pulse lands on `half` samples
        extra = half - quarter.duration
        edges[edge] = EdgeCalibration(ref.with_duration(ref.duration + 2 * extra))
    return DeviceConfig(
        edges,
        t1={0: 69.3e-6, 1: 78.0e-6, 2: 53.6e-6},
        t2={0: 38.6e-6, 1: 63.8e-6, 2: 56.5e-6},
    )


@dataclass(frozen=True)
class LoweredGate:
    source: Gate
    schedule: Schedule

    @property
    def duration(self) -> int:
        return self.schedule.duration

    @property
    def target(self) -> int:
        return self.source.target


def _scaled(ref: PulseEnvelope, fraction: float, policy: ThetaPolicy) -> PulseEnvelope:
    """Copy of ``ref`` carrying ``fraction`` of its area.

    Duration policy: keep the ramps and amplitude, shorten the plateau to the
    nearest sample, then trim the amplitude so the area is exact. If even a
    zero-length plateau carries too much area the amplitude is lowered.
    """
    area = fraction * abs(pulse_area(ref))
    if policy is ThetaPolicy.AMPLITUDE or ref.amplitude == 0:
        return replace(ref, amplitude=ref.amplitude * fraction)
    need = area / ref.amplitude
    if ref.kind is EnvelopeKind.CONSTANT:
        duration = max(1, int(round(need)))
    else:
        ramps = unit_area(ref.kind, 2 * ref.risefall, ref.sigma, ref.risefall)
        duration = 2 * ref.risefall + max(0, int(round(need - ramps)))
    amp = area / unit_area(ref.kind, duration, ref.sigma, ref.risefall)
    if amp > 1 + 1e-12:
        raise PulseError(f"amplitude saturation: {amp:.4g} > 1")
    return replace(ref, amplitude=amp, duration=duration)


def _signed(p: PulseEnvelope, negative: bool) -> PulseEnvelope:
    return replace(p, phase=p.phase + math.pi) if negative else p


def lower_rzx(theta: float, control: int, target: int, cfg: DeviceConfig) -> LoweredGate:
    """CR pulse plus compensation tone implementing RZX(theta), |theta| <= pi/2."""
    if abs(theta) > HALF_PI + _ANGLE_SLACK:
        raise LoweringError(f"angle not reduced: |{theta}| > pi/2")
    ec = cfg.edge(control, target)
    source = Gate("rzx", (control, target), (theta,))
    if theta == 0:
        return LoweredGate(source, Schedule(cfg.dt))
    fraction = min(abs(theta) / HALF_PI, 1.0)
    ins = [Instruction(0, Channel.control(control, target),
                       _signed(_scaled(ec.cr, fraction, cfg.theta_policy), theta < 0))]
    if ec.comp is not None and ec.comp.amplitude > 0:
        comp = _signed(_scaled(ec.comp, fraction, cfg.theta_policy), theta < 0)
        ins.append(Instruction(0, Channel.drive(target), comp))
    return LoweredGate(source, Schedule(cfg.dt, tuple(ins)))


def _split(frag: LoweredGate) -> tuple[list[Instruction], Instruction | None]:
    cr, comp = [], None
    for ins in frag.schedule.instructions:
        if ins.channel.kind is ChannelKind.CONTROL:
            cr.append(ins)
        elif comp is None:
            comp = ins
        else:
            raise LoweringError("fragment has more than one compensation tone")
    return cr, comp


def _min_duration(p: PulseEnvelope, area: float, a_max: float) -> int:
    """Shortest duration at which ``area`` fits under ``a_max`` with p's shape."""
    if p.kind is EnvelopeKind.CONSTANT:
        return max(1, math.ceil(area / a_max - 1e-12))
    ramps = unit_area(p.kind, 2 * p.risefall, p.sigma, p.risefall)
    return 2 * p.risefall + max(0, math.ceil(area / a_max - ramps - 1e-12))


def merge_compensation(tones: Sequence[PulseEnvelope], a_max: float,
                       rule: PhaseRule = PhaseRule.COMPLEX) -> PulseEnvelope:
    """One tone carrying the summed area of several tones on the same drive line.

    The duration is the longest input, lengthened if needed so the amplitude
    stays within ``a_max``; the shape is taken from the longest input.
    """
    if not tones:
        raise LoweringError("nothing to merge")
    shape = max(tones, key=lambda p: p.duration)
    if rule is PhaseRule.COMPLEX:
        z = sum(pulse_area(p) for p in tones)
        size, phase = abs(z), float(np.angle(z)) if abs(z) > 0 else 0.0
    else:
        size = sum(abs(pulse_area(p)) for p in tones)
        amp_guess = size / unit_area(shape.kind, shape.duration, shape.sigma, shape.risefall)
        phase = sum(p.phase * abs(pulse_area(p)) for p in tones) / amp_guess if amp_guess else 0.0
    duration = max(shape.duration, _min_duration(shape, size, a_max))
    amp = size / unit_area(shape.kind, duration, shape.sigma, shape.risefall)
    return replace(shape, amplitude=amp, phase=phase, duration=duration)


def merge_n(fragments: Sequence[LoweredGate], cfg: DeviceConfig) -> LoweredGate:
    """Play RZX fragments sharing a target at once as a single PRZX fragment."""
    fragments = [f for f in fragments]
    if not fragments:
        raise LoweringError("merge of zero fragments")
    if len(fragments) == 1:
        return fragments[0]
    targets = {f.target for f in fragments}
    if len(targets) != 1:
        raise LoweringError("no shared qubit: fragments target different qubits")
    (target,) = targets
    controls = [c for f in fragments for c in f.source.controls]
    if len(set(controls)) != len(controls):
        raise LoweringError("fragments share a control qubit")

    crs, comps = [], []
    for f in fragments:
        cr, comp = _split(f)
        crs += cr
        if comp is not None:
            comps.append(comp.envelope)
    merged_comp = merge_compensation(comps, cfg.a_max, cfg.phase_rule) if comps else None
    t_cr = max((i.envelope.duration for i in crs), default=0)
    if merged_comp is not None:
        t_cr = max(t_cr, merged_comp.duration)
    ins = [Instruction(0, i.channel, stretch_to(i.envelope, t_cr) if i.envelope.duration else i.envelope)
           for i in crs]
    if merged_comp is not None and merged_comp.amplitude > 0:
        ins.append(Instruction(0, Channel.drive(target), merged_comp))
    thetas = [th for f in fragments for th in f.source.params]
    source = przx(thetas, controls, target)
    return LoweredGate(source, Schedule(cfg.dt, tuple(ins)))


def merge_two(a: LoweredGate, b: LoweredGate, cfg: DeviceConfig) -> LoweredGate:
    return merge_n([a, b], cfg)


def lower_przx(g: Gate, cfg: DeviceConfig) -> LoweredGate:
    return merge_n([lower_rzx(th, c, g.target, cfg) for th, c in zip(g.params, g.controls)], cfg)


# single-qubit pulses: (rotation angle in units of pi, drive phase, frame shift before the pulse)
_SQ_PULSES = {
    "x": (1.0, 0.0, 0.0),
    "sx": (0.5, 0.0, 0.0),
    "x32": (0.5, math.pi, 0.0),
    # H = RY(pi/2) Z up to phase: virtual Z, then a quarter-turn about Y
    "h": (0.5, HALF_PI, math.pi),
}
_FRAME_SHIFT = {"z": math.pi, "s": HALF_PI, "sdg": -HALF_PI}


def fuse_rzx(c: Circuit) -> Circuit:
    """Join runs of consecutive RZX gates on one target with distinct controls into PRZX."""
    out: list[Gate] = []
    run: list[Gate] = []

    def flush():
        if len(run) > 1:
            out.append(przx([g.theta for g in run], [g.qubits[0] for g in run], run[0].target))
        else:
            out.extend(run)

    for g in c:
        if g.kind == "rzx" and run and g.target == run[0].target \
                and g.qubits[0] not in {r.qubits[0] for r in run}:
            run.append(g)
            continue
        flush()
        run = [g] if g.kind == "rzx" else []
        if g.kind != "rzx":
            out.append(g)
    flush()
    return Circuit(c.num_qubits, out)


def fuse_cnots(c: Circuit) -> Circuit:
    """Replace runs of consecutive CNOTs on one target with distinct controls by a parallel group."""
    out: list[Gate] = []
    run: list[Gate] = []

    def flush():
        if len(run) > 1:
            out.extend(parallel_cnot_group([g.qubits[0] for g in run], run[0].qubits[1]))
        else:
            out.extend(run)

    for g in c:
        if g.kind == "cnot" and run and g.qubits[1] == run[0].qubits[1] \
                and g.qubits[0] not in {r.qubits[0] for r in run}:
            run.append(g)
            continue
        flush()
        run = [g] if g.kind == "cnot" else []
        if g.kind != "cnot":
            out.append(g)
    flush()
    return Circuit(c.num_qubits, out)


def split_przx(c: Circuit) -> Circuit:
    """Replace each PRZX by its RZX gates played one after another."""
    out: list[Gate] = []
    for g in c:
        if g.kind == "przx":
            out += [Gate("rzx", (ctl, g.target), (th,)) for th, ctl in zip(g.params, g.controls)]
        else:
            out.append(g)
    return Circuit(c.num_qubits, out)


def prepare_circuit(c: Circuit, mode: Mode | str = Mode.PARALLEL, echo: bool = False,
                    angle_reduce: bool = True) -> Circuit:
    """Decompose CNOT/CZ, then reduce angles and echo.

    Parallel mode first fuses shared-target CNOT and RZX runs into PRZX;
    serial mode splits every PRZX so each RZX is reduced and echoed on its own.
    """
    mode = Mode(mode)
    if mode is Mode.PARALLEL:
        c = fuse_cnots(c)
    c = lower_cnot_cz(c)
    c = fuse_rzx(c) if mode is Mode.PARALLEL else split_przx(c)
    if angle_reduce:
        c = reduce_circuit(c)
    if echo:
        c = echo_circuit(c)
    return c


@dataclass(frozen=True)
class LoweredCircuit:
    schedule: Schedule
    # accumulated virtual-Z angle per qubit, RZ convention
    frames: dict[int, float]
    num_qubits: int

    @property
    def duration(self) -> int:
        return self.schedule.duration


def _reframe(ins: Instruction, start: int, frames: Mapping[int, float]) -> Instruction:
    q = ins.channel.qubits[-1]
    env = ins.envelope
    shift = frames.get(q, 0.0)
    if shift:
        env = replace(env, phase=env.phase - shift)
    return Instruction(start + ins.start, ins.channel, env)


def compile_schedule(c: Circuit, cfg: DeviceConfig, mode: Mode | str = Mode.PARALLEL) -> LoweredCircuit:
    """Lower a prepared circuit gate by gate, each starting as soon as its qubits are free."""
    mode = Mode(mode)
    c = lower_cnot_cz(c)
    frames: dict[int, float] = {}
    free: dict[int, int] = {}
    out: list[Instruction] = []

    def place(frag: Schedule, qubits: Sequence[int]):
        if frag.duration == 0:
            return
        start = max((free.get(q, 0) for q in qubits), default=0)
        out.extend(_reframe(i, start, frames) for i in frag.instructions)
        for q in qubits:
            free[q] = start + frag.duration

    for g in c:
        if g.kind in _FRAME_SHIFT or g.kind == "rz":
            (q,) = g.qubits
            frames[q] = frames.get(q, 0.0) + (g.params[0] if g.kind == "rz" else _FRAME_SHIFT[g.kind])
        elif g.kind in _SQ_PULSES:
            (q,) = g.qubits
            turns, phase, pre = _SQ_PULSES[g.kind]
            frames[q] = frames.get(q, 0.0) + pre
            env = PulseEnvelope.constant(cfg.sq_amplitude * turns, cfg.sq_duration, phase)
            place(Schedule(cfg.dt, (Instruction(0, Channel.drive(q), env),)), (q,))
        elif g.kind == "rzx":
            place(lower_rzx(g.theta, *g.qubits, cfg).schedule, g.qubits)
        elif g.kind == "przx":
            if mode is Mode.PARALLEL:
                place(lower_przx(g, cfg).schedule, g.qubits)
            else:
                for th, ctl in zip(g.params, g.controls):
                    place(lower_rzx(th, ctl, g.target, cfg).schedule, (ctl, g.target))
        else:
            raise LoweringError(f"cannot lower {g.kind}")
    s = Schedule(cfg.dt, tuple(out))
    bad = validate_schedule(s)
    if bad:
        raise LoweringError(f"lowering produced an invalid schedule: {bad[0]}")
    return LoweredCircuit(s, frames, c.num_qubits)


def lower_circuit(c: Circuit, cfg: DeviceConfig, mode: Mode | str = Mode.PARALLEL) -> Schedule:
    return compile_schedule(c, cfg, mode).schedule


@dataclass(frozen=True)
class DurationReport:
    t_serial: float
    t_parallel: float

    @property
    def ratio(self) -> float:
        return self.t_parallel / self.t_serial if self.t_serial else 1.0


def duration_report(c: Circuit, cfg: DeviceConfig, echo: bool = False,
                    angle_reduce: bool = True) -> DurationReport:
    """Wall-clock durations (seconds) of the serial and parallel lowerings."""
    out = {}
    for mode in Mode:
        prepared = prepare_circuit(c, mode, echo=echo, angle_reduce=angle_reduce)
        out[mode] = lower_circuit(prepared, cfg, mode).duration * cfg.dt
    return DurationReport(out[Mode.SERIAL], out[Mode.PARALLEL])


def cr_segment_duration(s: Schedule) -> int:
    """Samples during which at least one control channel is active."""
    busy = np.zeros(s.duration, dtype=bool)
    for ins in s.instructions:
        if ins.channel.kind is ChannelKind.CONTROL:
            busy[ins.start:ins.stop] = True
    return int(busy.sum())


def simulate_lowered(lc: LoweredCircuit, cfg: DeviceConfig, params=None) -> np.ndarray:
    """Propagator of a lowered circuit, with residual virtual-Z frames applied at the end.

    ``params`` maps edges to coupling constants; the default is a pure ZX
    coupling on every calibrated edge.
    """
    from .ir import rz
    from .simulator import CRHamiltonianParams, apply_local, gate_matrix, simulate_schedule

    if params is None:
        params = {e: CRHamiltonianParams() for e in cfg.edges}
    cals = {e: ec.cal for e, ec in cfg.edges.items()}
    u = simulate_schedule(lc.schedule, params, cals, cfg.drive_cal, lc.num_qubits)
    for q, lam in sorted(lc.frames.items()):
        u = apply_local(u, gate_matrix(rz(lam, q)), (q,), lc.num_qubits)
    return u
