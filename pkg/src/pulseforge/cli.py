"""Command-line front end.

Exit codes: 0 success, 1 domain error (the request is well formed but cannot
be carried out), 2 input or schema error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .cycle_bench import BenchmarkError, CBConfig, cycle_benchmark
from .ir import Circuit, CircuitError, przx
from .layout import CouplingGraph, LayoutError, builtin_layout, gain_curve, gain_curve_csv
from .noise import (
    DecoherenceParams,
    NoiseError,
    PauliNoiseModel,
    apply_pauli_noise,
    normalized_truth_table,
    predict_parallel_fidelity,
    spam_normalize,
)
from .parallelizer import (
    DeviceConfig,
    LoweringError,
    Mode,
    belem_like_config,
    compile_schedule,
    cr_segment_duration,
    duration_report,
    prepare_circuit,
    simulate_lowered,
)
from .pulse import PulseError
from .simulator import (
    CRHamiltonianParams,
    SimulationError,
    choi_of_unitary,
    phase_fidelity,
    ptm_of_channel,
    ptm_to_csv,
    unitary_of_circuit,
)

CONFIG_ENV = "PULSEFORGE_CONFIG"
DOMAIN_ERRORS = (CircuitError, LoweringError, LayoutError, NoiseError, BenchmarkError,
                 PulseError, SimulationError)


class InputError(Exception):
    pass


def _read_json(path: str | Path) -> object:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def _parse(path: str | Path, parser: Callable):
    doc = _read_json(path)
    try:
        return parser(doc)
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise InputError(f"{path}: schema error: {exc}") from exc


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass
class RunManifest:
    command: list[str]
    inputs: dict[str, str] = field(default_factory=dict)
    seed: int | None = None
    config_hash: str | None = None
    outputs: list[str] = field(default_factory=list)
    version: str = __version__

    def write(self, out_dir: Path, name: str) -> Path:
        path = out_dir / f"{name}.manifest.json"
        path.write_text(json.dumps(self.__dict__, indent=2, sort_keys=True) + "\n")
        return path


class Run:
    """Collects inputs and outputs of one command for its manifest."""

    def __init__(self, args: argparse.Namespace, argv: list[str]):
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.manifest = RunManifest(command=list(argv), seed=getattr(args, "seed", None))

    def input(self, path: str | Path | None):
        if path is not None:
            self.manifest.inputs[str(path)] = _sha256(Path(path).read_bytes())

    def config(self, cfg: DeviceConfig):
        self.manifest.config_hash = _sha256(json.dumps(cfg.to_dict(), sort_keys=True).encode())

    def write(self, name: str, text: str) -> Path:
        path = self.out / name
        path.write_text(text)
        self.manifest.outputs.append(str(path))
        return path

    def finish(self, name: str):
        self.manifest.write(self.out, name)


def _device(args, circuit: Circuit | None = None) -> tuple[DeviceConfig, str | None]:
    """Device from --device, then $PULSEFORGE_CONFIG, else default references on every pair."""
    path = args.device or os.environ.get(CONFIG_ENV)
    if path:
        return _parse(path, DeviceConfig.from_dict), path
    n = circuit.num_qubits if circuit is not None else 3
    pairs = [(a, b) for a in range(n) for b in range(n) if a != b]
    return DeviceConfig.uniform(pairs), None


def cmd_compile(args, run: Run) -> int:
    circuit = _parse(args.circuit, Circuit.from_dict)
    run.input(args.circuit)
    cfg, cfg_path = _device(args, circuit)
    run.input(cfg_path)
    run.config(cfg)
    mode = Mode(args.mode)
    prepared = prepare_circuit(circuit, mode, echo=args.echo, angle_reduce=args.angle_reduce)
    lowered = compile_schedule(prepared, cfg, mode)
    report = duration_report(circuit, cfg, echo=args.echo, angle_reduce=args.angle_reduce)
    run.write("schedule.json", lowered.schedule.to_json(indent=1) + "\n")
    summary = {"mode": mode.value, "t_serial": report.t_serial, "t_parallel": report.t_parallel,
               "ratio": report.ratio, "frames": {str(q): v for q, v in sorted(lowered.frames.items())}}
    run.write("report.json", json.dumps(summary, indent=2) + "\n")
    print(f"t_serial={report.t_serial:.6e} s  t_parallel={report.t_parallel:.6e} s  ratio={report.ratio:.6f}")
    run.finish("compile")
    return 0


def _couplings(path: str | None, cfg: DeviceConfig) -> dict:
    if path is None:
        return {e: CRHamiltonianParams() for e in cfg.edges}

    def parse(doc):
        out = {}
        for key, terms in doc.items():
            c, t = (int(x) for x in key.split(","))
            out[(c, t)] = CRHamiltonianParams.from_dict(terms)
        return out

    got = _parse(path, parse)
    return {e: got.get(e, CRHamiltonianParams()) for e in cfg.edges}


def verify_circuit(circuit: Circuit, cfg: DeviceConfig, couplings: dict, beta: float,
                   echo: bool = False) -> dict:
    """Coherent fidelity from pulse simulation, damped by exponential decoherence."""
    ideal = unitary_of_circuit(circuit)
    f0 = 2.0 ** -circuit.num_qubits
    row = {}
    for mode in Mode:
        lowered = compile_schedule(prepare_circuit(circuit, mode, echo=echo), cfg, mode)
        u = simulate_lowered(lowered, cfg, couplings)
        t = lowered.duration * cfg.dt
        f_coh = phase_fidelity(u, ideal)
        row[mode.value] = {"duration": t, "f_coherent": f_coh,
                           "fidelity": float(f0 + (f_coh - f0) * np.exp(-beta * t))}
    s, p = row["serial"], row["parallel"]
    return {
        "beta": beta,
        "t_serial": s["duration"],
        "t_parallel": p["duration"],
        "f_serial": s["fidelity"],
        "f_parallel": p["fidelity"],
        "f_parallel_predicted": predict_parallel_fidelity(s["fidelity"], p["duration"], s["duration"], f0),
        "f_serial_coherent": s["f_coherent"],
        "f_parallel_coherent": p["f_coherent"],
    }


def cmd_verify(args, run: Run) -> int:
    circuit = _parse(args.circuit, Circuit.from_dict)
    run.input(args.circuit)
    cfg, cfg_path = _device(args, circuit)
    run.input(cfg_path)
    run.input(args.couplings)
    run.config(cfg)
    couplings = _couplings(args.couplings, cfg)
    if args.beta is not None:
        beta = args.beta
    elif cfg.t1 and cfg.t2:
        qubits = sorted({q for g in circuit for q in g.qubits})
        beta = DecoherenceParams.from_times(cfg.t1, cfg.t2, qubits).beta
    else:
        beta = 0.0
    result = verify_circuit(circuit, cfg, couplings, beta, echo=args.echo)
    lines = ["quantity,value"] + [f"{k},{float(v)!r}" for k, v in result.items()]
    run.write("verify.csv", "\n".join(lines) + "\n")
    print(f"F_S={result['f_serial']:.6f}  F_P={result['f_parallel']:.6f}  "
          f"F_P(predicted)={result['f_parallel_predicted']:.6f}")
    run.finish("verify")
    return 0


def _noise_spec(path: str | None, n: int):
    if path is None:
        return None, None, 1.0

    def parse(doc):
        noise = PauliNoiseModel(n, doc.get("probs", {})) if doc.get("probs") else None
        if "depolarizing" in doc:
            noise = PauliNoiseModel.depolarizing(n, float(doc["depolarizing"]))
        twirl = PauliNoiseModel(n, doc["twirl"]) if doc.get("twirl") else None
        return noise, twirl, float(doc.get("spam", 1.0))

    return _parse(path, parse)


def cmd_bench(args, run: Run) -> int:
    circuit = _parse(args.circuit, Circuit.from_dict)
    run.input(args.circuit)
    run.input(args.noise)
    run.input(args.cb)
    doc = _read_json(args.cb) if args.cb else {}
    try:
        cfg = CBConfig(
            depths=tuple(args.depths or doc.get("depths", (4, 8, 16, 32))),
            samples=int(doc.get("samples", 28)),
            shots=args.shots if args.shots is not None else int(doc.get("shots", 0)),
            seed=args.seed if args.seed is not None else int(doc.get("seed", 0)),
        )
    except (TypeError, ValueError) as exc:
        raise InputError(f"{args.cb}: schema error: {exc}") from exc
    run.manifest.seed = cfg.seed
    noise, twirl, spam = _noise_spec(args.noise, circuit.num_qubits)
    result = cycle_benchmark(unitary_of_circuit(circuit), cfg, noise, twirl, spam)
    run.write("cb.csv", result.to_csv())
    print(f"mean p/p_ref = {result.mean_fidelity:.6f} over {len(result.labels)} channels")
    run.finish("bench")
    return 0


def _layout(spec: str) -> CouplingGraph:
    """``eagle``, ``lattice:WxH``, ``hexagonal:RxC``, ``heavy_hex:RxC``, ``complete:N`` or a JSON file."""
    if Path(spec).suffix == ".json":
        return _parse(spec, CouplingGraph.from_dict)
    kind, _, dims = spec.partition(":")
    try:
        nums = [int(x) for x in dims.split("x")] if dims else []
    except ValueError as exc:
        raise InputError(f"bad layout spec {spec!r}") from exc
    return builtin_layout(kind, *nums)


def layout_csv(spec: str, depths) -> str:
    return gain_curve_csv(gain_curve(_layout(spec), depths))


def cmd_layout(args, run: Run) -> int:
    if Path(args.layout).suffix == ".json":
        run.input(args.layout)
    text = layout_csv(args.layout, args.depths or [1, 2, 3, 4])
    run.write("gain.csv", text)
    sys.stdout.write(text)
    run.finish("layout")
    return 0


def _two_rzx() -> Circuit:
    return Circuit(3, [przx(np.pi / 2, (0, 2), 1)])


def fig1_csv(cfg: DeviceConfig) -> str:
    """Durations of PRZX(pi/2) on two controls, plain and echoed."""
    lines = ["echo,t_serial_s,t_parallel_s,ratio,cr_serial_samples,cr_parallel_samples"]
    for echo in (False, True):
        rep = duration_report(_two_rzx(), cfg, echo=echo)
        cr = {m: cr_segment_duration(compile_schedule(prepare_circuit(_two_rzx(), m, echo=echo), cfg, m).schedule)
              for m in Mode}
        lines.append(f"{int(echo)},{rep.t_serial!r},{rep.t_parallel!r},{rep.ratio!r},"
                     f"{cr[Mode.SERIAL]},{cr[Mode.PARALLEL]}")
    return "\n".join(lines) + "\n"


def fig2_csv(f_mle: float, f_id: float) -> str:
    """SPAM-normalized truth table of PRZX(pi/2) from a depolarized stand-in for measured data."""
    u = unitary_of_circuit(_two_rzx())
    # uniform Pauli noise with total probability q gives fidelity 1 - q
    measured = apply_pauli_noise(u, PauliNoiseModel.depolarizing(3, 1 - f_mle))
    s_norm, alpha = spam_normalize(measured, choi_of_unitary(u), f_id)
    table, labels = normalized_truth_table(s_norm)
    lines = ["input,output,probability"]
    for i, a in enumerate(labels):
        for j, b in enumerate(labels):
            lines.append(f"{a},{b},{float(table[i, j])!r}")
    return "\n".join(lines) + "\n"


def fig7_csv(f_serial: float) -> str:
    cfg = belem_like_config()
    rep = duration_report(_two_rzx(), cfg, echo=True)
    lines = [
        "quantity,value",
        f"t_serial_s,{rep.t_serial!r}",
        f"t_parallel_s,{rep.t_parallel!r}",
        f"ratio,{rep.ratio!r}",
        f"f_serial,{f_serial!r}",
        f"f_parallel_predicted,{predict_parallel_fidelity(f_serial, rep.t_parallel, rep.t_serial)!r}",
    ]
    return "\n".join(lines) + "\n"


def cmd_export(args, run: Run) -> int:
    which = args.which
    if which == "fig1":
        cfg, path = _device(args)
        run.input(path)
        run.config(cfg)
        run.write("fig1_durations.csv", fig1_csv(cfg))
    elif which == "fig2":
        run.write("fig2_truth_table.csv", fig2_csv(args.f_mle, args.f_id))
    elif which == "fig5":
        if Path(args.layout).suffix == ".json":
            run.input(args.layout)
        run.write("fig5_gain.csv", layout_csv(args.layout, args.depths or [1, 2, 3, 4]))
    elif which == "fig7":
        run.write("fig7_durations.csv", fig7_csv(args.f_serial))
    else:
        r = ptm_of_channel(unitary_of_circuit(_two_rzx())).matrix
        run.write("ptm.csv", ptm_to_csv(r))
    run.finish(f"export-{which}")
    return 0


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pulseforge", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, device=True):
        sp.add_argument("--out", default=".", help="output directory")
        if device:
            sp.add_argument("--device", help=f"device JSON (default: ${CONFIG_ENV} or built-in)")

    c = sub.add_parser("compile", help="lower a circuit to a pulse schedule")
    c.add_argument("circuit")
    c.add_argument("--mode", choices=[m.value for m in Mode], default="parallel")
    c.add_argument("--echo", action="store_true")
    c.add_argument("--angle-reduce", action=argparse.BooleanOptionalAction, default=True)
    common(c)
    c.set_defaults(func=cmd_compile)

    v = sub.add_parser("verify", help="simulate serial and parallel schedules")
    v.add_argument("circuit")
    v.add_argument("--couplings", help="JSON mapping 'c,t' to coupling constants")
    v.add_argument("--beta", type=float, help="decoherence rate 1/s (default from device T1/T2)")
    v.add_argument("--echo", action="store_true")
    common(v)
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="cycle-benchmark a Clifford circuit")
    b.add_argument("circuit")
    b.add_argument("--noise", help="noise JSON: probs, depolarizing, twirl, spam")
    b.add_argument("--cb", help="benchmark JSON: depths, samples, shots, seed")
    b.add_argument("--depths", type=_int_list)
    b.add_argument("--shots", type=int)
    b.add_argument("--seed", type=int)
    common(b, device=False)
    b.set_defaults(func=cmd_bench)

    lay = sub.add_parser("layout", help="serial vs merged parity-tree sizes")
    lay.add_argument("layout", help="eagle | lattice:WxH | hexagonal:RxC | heavy_hex:RxC | complete:N | file.json")
    lay.add_argument("--depths", type=_int_list)
    common(lay, device=False)
    lay.set_defaults(func=cmd_layout)

    e = sub.add_parser("export-figdata", help="CSV data behind the standard plots")
    e.add_argument("which", choices=["fig1", "fig2", "fig5", "fig7", "ptm"])
    e.add_argument("--layout", default="eagle")
    e.add_argument("--depths", type=_int_list)
    e.add_argument("--f-mle", type=float, default=0.957 * 0.882)
    e.add_argument("--f-id", type=float, default=0.882)
    e.add_argument("--f-serial", type=float, default=0.9816)
    common(e)
    e.set_defaults(func=cmd_export)
    return p


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        run = Run(args, argv)
        return args.func(args, run)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DOMAIN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
