import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rstqubit.pulse import (
    DriveTone,
    EnvelopeSpec,
    PulseError,
    PulseSchedule,
    Segment,
    VirtualZ,
    commensurate_width,
    dc_schedule,
    drive_schedule,
    drive_waveform,
    exchange_from_voltage,
    exchange_sensitivity,
    idle_schedule,
    voltage_from_exchange,
)
from rstqubit.spin_model import TWO_PI, table1


def test_exchange_voltage_round_trip():
    # J = e J^r is reached at V_B = 1 / (2 alpha) = 45.4545 mV for alpha = 11 / V.
    v = voltage_from_exchange(1e6, 11.0, np.e * 1e6)
    assert v == pytest.approx(1.0 / 22.0, rel=1e-14)
    assert v == pytest.approx(45.4545e-3, rel=1e-5)
    assert exchange_from_voltage(2e6, 11.0, 0.1) == pytest.approx(18.0500269988682e6, rel=1e-13)
    assert exchange_sensitivity(1e6, 11.0, 0.0) == pytest.approx(22e6)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e3, 1e8), st.floats(1.0, 30.0), st.floats(-0.5, 0.5))
def test_property_voltage_inverse(j_r, alpha, v):
    j = exchange_from_voltage(j_r, alpha, v)
    assert voltage_from_exchange(j_r, alpha, j) == pytest.approx(v, abs=1e-12)


def test_voltage_guards():
    with pytest.raises(PulseError):
        voltage_from_exchange(1e6, 11.0, 0.0)
    with pytest.raises(PulseError):
        voltage_from_exchange(0.0, 11.0, 1e6)
    with pytest.raises(PulseError):
        exchange_from_voltage(1e6, 11.0, 10.0)
    with pytest.raises(PulseError):
        exchange_from_voltage(-1.0, 11.0, 0.0)


def test_envelope_shape_and_support():
    env = EnvelopeSpec(10e-9)
    t = np.array([-1e-9, 0.0, 2.5e-9, 5e-9, 10e-9, 11e-9])
    assert np.allclose(env(t), [0.0, 0.0, 0.5, 1.0, 0.0, 0.0], atol=1e-15)
    with pytest.raises(PulseError):
        EnvelopeSpec(0.0)
    with pytest.raises(ValueError):
        EnvelopeSpec(1e-9, "square")


def test_drive_waveform_is_nonnegative_and_peaks_at_two_jd():
    tone = DriveTone(3e6, TWO_PI * 150e6, 0.3)
    env = EnvelopeSpec(40e-9)
    t = np.linspace(0, 40e-9, 20001)
    j = drive_waveform(1e6, tone, env, t)
    assert np.min(j) >= 1e6 - 1e-6
    assert np.max(j) <= 1e6 + 6e6 + 1e-6
    assert np.max(j) > 1e6 + 5.9e6


def test_commensurate_width():
    w = TWO_PI * 150e6
    assert commensurate_width(4, w) == pytest.approx(4 / 150e6)
    for bad in (0, 2.5, -1):
        with pytest.raises(PulseError):
            commensurate_width(bad, w)


def test_schedule_validation():
    env = EnvelopeSpec(5e-9)
    a = Segment("12", 0.0, env, level=1e6)
    b = Segment("12", 3e-9, env, level=1e6)
    with pytest.raises(PulseError):
        PulseSchedule((a, b))
    with pytest.raises(PulseError):
        PulseSchedule((Segment("12", -1e-9, env, level=1e6),))
    with pytest.raises(PulseError):
        PulseSchedule((a,), total_duration=1e-9)
    with pytest.raises(PulseError):
        PulseSchedule((Segment("12", 0.0, env, level=-1e6),))
    ok = PulseSchedule((a, Segment("23", 1e-9, env, level=1e6)))
    assert ok.total_duration == pytest.approx(6e-9)
    assert ok.driven_bonds == ("12", "23")


def test_schedule_exchange_and_peak():
    spec = table1("direct4")
    s = dc_schedule(["23"], 10e-9, 5e6)
    assert s.exchange(spec, "23", 5e-9) == pytest.approx(7e6)
    assert s.peak_exchange(spec) == {"23": 7e6}
    d = drive_schedule("12", 20e-9, 1e6, TWO_PI * 150e6)
    assert d.peak_exchange(spec)["12"] == pytest.approx(4e6)
    assert d.max_carrier() == pytest.approx(TWO_PI * 150e6)
    assert idle_schedule(3e-9).total_duration == 3e-9


def test_with_phase_and_virtual_z():
    d = drive_schedule("12", 20e-9, 1e6, TWO_PI * 150e6, virtual_z=[VirtualZ(1, 0.3, 0.0)])
    p = d.with_phase(1.1)
    assert p.segments[0].tone.phase == 1.1
    assert p.virtual_z == d.virtual_z
    z = d.with_virtual_z([VirtualZ(1, 0.1, 0.0), VirtualZ(1, 0.2, 20e-9)])
    assert [v.angle for v in z.z_before()] == [0.1]
    assert [v.angle for v in z.z_after()] == [0.2]


def test_json_round_trip():
    d = drive_schedule("12", 20e-9, 1e6, TWO_PI * 150e6, phase=0.4,
                       virtual_z=[VirtualZ(1, 0.3, 0.0)], note="x")
    again = PulseSchedule.from_json(d.to_json())
    assert again == d
    c = dc_schedule(["2c", "3c"], 16e-9, 30e6)
    assert PulseSchedule.from_dict(c.to_dict()) == c


def test_csv_dump():
    spec = table1("direct4")
    s = dc_schedule(["23"], 1e-9, 1e6)
    text = s.to_csv(spec, rate=10e9)
    lines = text.strip().splitlines()
    assert lines[0] == "t_s,bond,J_hz,V_B_V"
    assert len(lines) == 1 + 11
    t, bond, j, v = lines[6].split(",")
    assert bond == "23"
    assert float(j) == pytest.approx(3e6)
    assert float(v) == pytest.approx(np.log(1.5) / 22.0)
