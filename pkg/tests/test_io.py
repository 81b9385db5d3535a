import numpy as np
import pytest
from numpy.testing import assert_allclose

from ocms import io
from ocms.errors import IoFailure
from ocms.field_synth import add_noise
from ocms.waveguide import FluidHalfspace, PressureRelease, isovelocity, perturb_ssp, thermocline

ENV_TEXT = """\
# test profile
frequency_hz = 500
depth_step_h = 0.1
water_depth_m = 50
bottom.kind = pressure_release
bottom.xi_min_fraction = 0.93
ssp.table = depth_m, sound_speed_mps
0, 1530
15 1530
25, 1500   # trailing comment
50, 1500
"""


def test_parse_environment(tmp_path):
    path = tmp_path / "t.env"
    path.write_text(ENV_TEXT)
    env = io.read_environment(str(path))
    ref = thermocline(bottom=PressureRelease(0.93))
    assert env.fingerprint() == ref.fingerprint()


def test_environment_round_trip_is_exact(tmp_path):
    for env in (perturb_ssp(thermocline(), 1.0, 3), isovelocity(bottom=FluidHalfspace(1600.0, 1500.0))):
        path = tmp_path / "e.env"
        io.write_environment(env, str(path))
        back = io.read_environment(str(path))
        assert back.ssp.tobytes() == env.ssp.tobytes()
        assert back.bottom == env.bottom


@pytest.mark.parametrize("text, fragment", [
    ("frequency_hz = 500\n", "missing key 'depth_step_h'"),
    (ENV_TEXT.replace("bottom.kind = pressure_release", "bottom.kind = rock"), "unknown bottom.kind"),
    (ENV_TEXT + "colour = blue\n", "unknown keys"),
    (ENV_TEXT.replace("frequency_hz = 500", "frequency_hz = fast"), "not a number"),
    (ENV_TEXT.replace("15 1530", "15"), "two numbers"),
])
def test_environment_errors_name_the_file(tmp_path, text, fragment):
    path = tmp_path / "bad.env"
    path.write_text(text)
    with pytest.raises(IoFailure) as info:
        io.read_environment(str(path))
    assert str(path) in str(info.value)
    assert fragment in str(info.value)


def test_missing_file():
    with pytest.raises(IoFailure, match="nope.env"):
        io.read_environment("nope.env")


def test_snapshot_round_trip(clean_snapshot, tmp_path):
    snap = add_noise(clean_snapshot, 20.0, 4)
    path = tmp_path / "s.csv"
    io.write_snapshot(snap, str(path), range_m=5000.0)
    back = io.read_snapshot(str(path))
    assert back.pressures.tobytes() == snap.pressures.tobytes()
    assert back.noise_epsilon == snap.noise_epsilon
    assert (back.seed, back.snr_db, back.frequency_hz) == (4, 20.0, 500.0)
    assert_allclose(back.nominal_depths, snap.nominal_depths)
    text = path.read_text().splitlines()
    assert text[0].startswith("# frequency_hz")
    assert "element_index,depth_m,pressure_re,pressure_im" in text


def test_external_snapshot_without_metadata_noise(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("# frequency_hz = 500\nelement_index,depth_m,pressure_re,pressure_im\n"
                    "2,2.0,0.5,0.0\n1,1.0,1.0,-1.0\n")
    snap = io.read_snapshot(str(path))
    assert_allclose(snap.pressures, [1 - 1j, 0.5])
    assert snap.noise_epsilon == 0.0 and snap.seed is None


def test_mode_set_csv(thermo_modes, tmp_path):
    path = tmp_path / "m.csv"
    io.write_mode_set(thermo_modes, str(path), 0.1)
    numbers, xis, psi = io.read_mode_set_csv(str(path))
    assert list(numbers) == list(range(1, 12))
    assert xis.tobytes() == thermo_modes.xis.tobytes()
    assert psi.shape == (500, 11)
    assert_allclose(psi, thermo_modes.matrix, rtol=0, atol=0)


def test_number_lists():
    assert_allclose(io.parse_number_list("1:50:50"), np.arange(1.0, 51.0))
    assert_allclose(io.parse_number_list("30, 10, 0, -10"), [30, 10, 0, -10])


def test_experiment_config(tmp_path):
    (tmp_path / "t.env").write_text(ENV_TEXT)
    (tmp_path / "c.cfg").write_text("suite = TiltSweep\nsweep_values = 0, 3\ntrials_per_point = 4\n"
                                    "env_file = t.env\nsnr_db = 25\nocms.delta_xi = 2e-4\n")
    cfg = io.read_experiment_config(str(tmp_path / "c.cfg"), seed_base=9)
    assert cfg.suite == "TiltSweep" and cfg.sweep_values == (0.0, 3.0)
    assert cfg.trials_per_point == 4 and cfg.seed_base == 9 and cfg.snr_db == 25.0
    assert cfg.ocms == {"delta_xi": 2e-4}
    assert cfg.geometry.N == 50 and cfg.source.depth_z_s == 8.0
    # inline environment
    (tmp_path / "d.cfg").write_text("suite = SnrSweep\nsweep_values = 30\n" + ENV_TEXT)
    assert io.read_experiment_config(str(tmp_path / "d.cfg")).env.L == 500
    (tmp_path / "e.cfg").write_text("suite = SnrSweep\nsweep_values = 30\nenv_file = t.env\nspeed = 3\n")
    with pytest.raises(IoFailure, match="unknown keys"):
        io.read_experiment_config(str(tmp_path / "e.cfg"))
