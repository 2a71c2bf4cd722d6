import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pulseforge.pulse import (
    AreaCalibration,
    Channel,
    EnvelopeKind,
    Instruction,
    PulseEnvelope,
    PulseError,
    Schedule,
    calibrate_area,
    pulse_area,
    sequence,
    stretch_pulse,
    stretch_to,
    theta_of_pulse,
    validate_schedule,
)


def lifted_gaussian_sum(amp, duration, sigma, risefall):
    """Sample-by-sample sum of a flat-top pulse with lifted Gaussian edges."""
    edge = math.exp(-(risefall**2) / (2 * sigma**2))
    total = 0.0
    for t in range(duration):
        if t < risefall:
            x = t - risefall
        elif t >= duration - risefall:
            x = (duration - 1 - t) - risefall
        else:
            total += amp
            continue
        total += amp * (math.exp(-(x**2) / (2 * sigma**2)) - edge) / (1 - edge)
    return total


def test_constant_area():
    assert pulse_area(PulseEnvelope.constant(0.5, 100)) == pytest.approx(50 + 0j)


def test_constant_area_with_phase_pi():
    a = pulse_area(PulseEnvelope.constant(0.5, 100, phase=math.pi))
    assert a.real == pytest.approx(-50)
    assert abs(a.imag) < 1e-12


@pytest.mark.parametrize("amp,duration,sigma,risefall", [
    (0.2, 160, 16, 32),
    (0.3, 1920, 64, 128),
    (1.0, 10, 1.5, 5),
])
def test_gaussian_square_area_matches_summation(amp, duration, sigma, risefall):
    p = PulseEnvelope.gaussian_square(amp, duration, sigma=sigma, risefall=risefall)
    assert pulse_area(p).real == pytest.approx(lifted_gaussian_sum(amp, duration, sigma, risefall), rel=1e-12)
    assert pulse_area(p).real == pytest.approx(p.samples().sum().real, rel=1e-12)


def test_gaussian_square_endpoints_and_plateau():
    p = PulseEnvelope.gaussian_square(0.4, 200, sigma=10, risefall=20)
    s = p.samples().real
    assert s[0] == 0 and s[-1] == 0
    assert np.allclose(s[20:180], 0.4)
    assert np.allclose(s, s[::-1])


def test_gaussian_square_defaults():
    p = PulseEnvelope.gaussian_square(0.1, 800)
    assert p.sigma == 100 and p.risefall == 200


@pytest.mark.parametrize("kwargs", [
    dict(amplitude=-0.1, phase=0, duration=10),
    dict(amplitude=0.1, phase=0, duration=10, sigma=0),
    dict(amplitude=0.1, phase=0, duration=10, sigma=2, risefall=6, kind="gaussian_square"),
    dict(amplitude=0.1, phase=0, duration=-1),
])
def test_invalid_envelopes(kwargs):
    with pytest.raises(PulseError):
        PulseEnvelope(**kwargs)


def test_calibration_round_trip():
    ref = PulseEnvelope.constant(0.5, 100)
    cal = calibrate_area(ref, math.pi / 2)
    assert cal.k == pytest.approx(math.pi / 100)
    assert theta_of_pulse(ref, cal) == pytest.approx(math.pi / 2, abs=1e-15)


def test_degenerate_calibration():
    with pytest.raises(PulseError, match="degenerate"):
        calibrate_area(PulseEnvelope.constant(0.0, 100), 1.0)
    with pytest.raises(PulseError):
        calibrate_area(PulseEnvelope.constant(0.5, 100), 0.0)


def test_zero_amplitude_has_zero_angle():
    assert theta_of_pulse(PulseEnvelope.constant(0.0, 50), AreaCalibration(1.0)) == 0


def test_area_invariance_double_duration_half_amplitude():
    ref = PulseEnvelope.constant(0.4, 120)
    cal = calibrate_area(ref, math.pi / 2)
    assert theta_of_pulse(PulseEnvelope.constant(0.2, 240), cal) == pytest.approx(math.pi / 2, abs=1e-9)


def test_phase_pi_gives_negative_angle():
    cal = AreaCalibration(0.01)
    p = PulseEnvelope.constant(0.5, 100, phase=math.pi)
    assert theta_of_pulse(p, cal) == pytest.approx(-0.5)


def test_stretch_flat_top_exact():
    p = stretch_pulse(PulseEnvelope.constant(0.2, 100), 2)
    assert p.duration == 200 and p.amplitude == pytest.approx(0.1)


def test_stretch_saturation():
    with pytest.raises(PulseError, match="saturation"):
        stretch_pulse(PulseEnvelope.constant(0.2, 100), 0.1)


def test_stretch_below_ramps():
    p = PulseEnvelope.gaussian_square(0.1, 100, sigma=5, risefall=20)
    with pytest.raises(PulseError):
        stretch_to(p, 30)


def test_stretch_gaussian_square_against_summation():
    p = PulseEnvelope.gaussian_square(0.2, 400, sigma=16, risefall=32)
    q = stretch_pulse(p, 1.5)
    assert q.duration == 600 and q.risefall == 32
    before = lifted_gaussian_sum(p.amplitude, p.duration, p.sigma, p.risefall)
    after = lifted_gaussian_sum(q.amplitude, q.duration, q.sigma, q.risefall)
    assert abs(after - before) <= p.amplitude


@settings(max_examples=60, deadline=None)
@given(amp=st.floats(0.01, 0.5), duration=st.integers(64, 600), factor=st.floats(0.6, 3.0),
       gaussian=st.booleans())
def test_stretch_conserves_area(amp, duration, factor, gaussian):
    if gaussian:
        p = PulseEnvelope.gaussian_square(amp, duration, sigma=4, risefall=16)
    else:
        p = PulseEnvelope.constant(amp, duration)
    try:
        q = stretch_pulse(p, factor)
    except PulseError:
        return
    assert abs(abs(pulse_area(q)) - abs(pulse_area(p))) <= p.amplitude


@settings(max_examples=40, deadline=None)
@given(amp=st.floats(0.01, 0.5), scale=st.floats(0.0, 2.0))
def test_angle_linear_in_amplitude(amp, scale):
    cal = AreaCalibration(0.003)
    p = PulseEnvelope.gaussian_square(amp, 320, sigma=20, risefall=40)
    q = PulseEnvelope.gaussian_square(amp * scale, 320, sigma=20, risefall=40)
    assert theta_of_pulse(q, cal) == pytest.approx(scale * theta_of_pulse(p, cal), abs=1e-12)


def _ins(start, ch, dur):
    return Instruction(start, ch, PulseEnvelope.constant(0.1, dur))


def test_validate_empty_schedule():
    assert validate_schedule(Schedule()) == []


def test_validate_overlap_on_control_channel():
    u = Channel.control(0, 1)
    v = validate_schedule(Schedule(instructions=(_ins(0, u, 100), _ins(50, u, 100))))
    assert len(v) == 1 and v[0].sample == 50 and v[0].channel == "u0_1"


def test_validate_same_interval_on_different_channels():
    s = Schedule(instructions=(_ins(0, Channel.control(0, 1), 100), _ins(50, Channel.drive(1), 100)))
    assert validate_schedule(s) == []


def test_validate_negative_start():
    v = validate_schedule(Schedule(instructions=(_ins(-5, Channel.drive(0), 10),)))
    assert [x.message for x in v] == ["negative start"]


def test_validation_is_order_independent():
    rng = random.Random(3)
    chans = [Channel.drive(0), Channel.drive(1), Channel.control(0, 1)]
    ins = [_ins(rng.randrange(-3, 200), rng.choice(chans), rng.randrange(1, 60)) for _ in range(25)]
    reference = validate_schedule(Schedule(instructions=tuple(ins)))
    assert reference
    for _ in range(5):
        rng.shuffle(ins)
        assert validate_schedule(Schedule(instructions=tuple(ins))) == reference


def test_control_channel_needs_distinct_qubits():
    with pytest.raises(PulseError):
        Channel.control(2, 2)


def test_schedule_json_round_trip():
    s = Schedule(instructions=(
        Instruction(0, Channel.control(0, 1), PulseEnvelope.gaussian_square(0.3, 400, phase=1.25)),
        Instruction(400, Channel.drive(1), PulseEnvelope.constant(0.1, 160)),
    ))
    text = s.to_json()
    assert Schedule.from_json(text) == s
    doc = s.to_dict()
    assert list(doc) == ["dt", "instructions"]
    assert list(doc["instructions"][0]["envelope"]) == ["kind", "amplitude", "phase", "duration",
                                                         "sigma", "risefall"]
    assert doc["instructions"][0]["channel"] == {"kind": "control", "qubits": [0, 1]}


def test_sequence_places_back_to_back():
    a = Schedule(instructions=(_ins(0, Channel.drive(0), 10),))
    b = Schedule(instructions=(_ins(0, Channel.drive(0), 5),))
    s = sequence([a, b])
    assert s.duration == 15 and validate_schedule(s) == []


def test_envelope_kind_values():
    assert EnvelopeKind("constant") is EnvelopeKind.CONSTANT
