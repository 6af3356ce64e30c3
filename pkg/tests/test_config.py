import math

import pytest

from wvasim.config import ConfigError, OpticalSetup, load_config, setup_from_mapping
from wvasim.constants import DEG


def write(tmp_path, text):
    path = tmp_path / "run.toml"
    path.write_text(text)
    return path


def test_empty_file_gives_experimental_defaults(tmp_path):
    s = load_config(write(tmp_path, ""))
    assert s == OpticalSetup()
    assert s.wavelength == 632.992e-9
    assert s.slit_gap == 5e-3 and s.beam_diameter == 0.65e-3
    assert (s.f1, s.f2, s.f3, s.f4) == (25.5e-3, 300e-3, 300e-3, 25.5e-3)
    assert s.detector_focal == 1.0 and s.n0 == 1.54
    assert (s.ccd_rows, s.ccd_cols) == (2000, 405)


def test_negative_wavelength_names_the_field(tmp_path):
    with pytest.raises(ConfigError) as err:
        load_config(write(tmp_path, "wavelength_nm = -1\n"))
    assert "wavelength_nm" in str(err.value)


def test_degrees_stored_as_radians_and_echoed(tmp_path):
    s = load_config(write(tmp_path, "beta_u_deg = 1.6\nbeta_d_deg = -1.6\n"))
    assert s.beta_u == pytest.approx(1.6 * DEG)
    assert s.beta_d == pytest.approx(-1.6 * DEG)
    echoed = s.to_config_dict()
    assert echoed["beta_u_deg"] == 1.6 and echoed["beta_d_deg"] == -1.6


def test_unknown_keys_and_types_rejected():
    with pytest.raises(ConfigError) as err:
        setup_from_mapping({"wavelenght_nm": 600, "ccd_rows": 2.5, "theta_list_deg": "x"})
    msg = str(err.value)
    assert "wavelenght_nm: unknown key" in msg
    assert "ccd_rows" in msg and "theta_list_deg" in msg
    assert len(err.value.problems) == 3


def test_parse_error_reports_line(tmp_path):
    with pytest.raises(ConfigError) as err:
        load_config(write(tmp_path, "eta = 0.5\nseed = = 3\n"))
    assert "line 2" in str(err.value)


def test_tables_are_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "[optics]\nn0 = 1.5\n"))


def test_invariant_violations_listed_exhaustively():
    with pytest.raises(ConfigError) as err:
        setup_from_mapping({"eta": 1.5, "visibility": -0.1, "theta_list_deg": [0, 3, 2],
                            "f2_mm": 0, "pointing_jitter_rms_um": -1})
    keys = " ".join(err.value.problems)
    for key in ("eta", "visibility", "theta_list_deg", "f2_mm"):
        assert key in keys


def test_noise_and_unit_conversion():
    s = setup_from_mapping({"pointing_jitter_rms_um": 1.0, "dark_rate_per_s": 20.0,
                            "t0_as": 900, "power_uw": 7.3, "exposure_us": 60,
                            "theta_list_deg": [0, 5, 10]})
    assert s.noise.pointing_jitter_rms == pytest.approx(1e-6)
    assert s.noise.dark_rate == 20.0
    assert s.t0 == pytest.approx(9e-16)
    assert s.resolved_power() == pytest.approx(7.3e-6)
    assert s.resolved_exposure() == pytest.approx(60e-6)
    assert s.theta_list[-1] == pytest.approx(10 * DEG)


def test_default_budget_per_beta():
    base = OpticalSetup()
    s45 = base.with_betas(45.0)
    assert s45.resolved_power() == 7.3e-6 and s45.resolved_exposure() == 60e-6
    s16 = base.with_betas(1.6)
    assert s16.resolved_exposure() == 650e-6
    assert s16.resolved_power() == pytest.approx(2.0e-3 * math.sin(1.6 * DEG) ** 2, rel=1e-12)
    assert base.with_betas(3.3).resolved_exposure() == 300e-6
    assert base.with_betas(6.6).resolved_exposure() == 100e-6
    with pytest.raises(ConfigError):
        base.with_betas(10.0).resolved_exposure()


def test_digest_tracks_setup():
    a = OpticalSetup()
    assert a.digest() == OpticalSetup().digest()
    assert a.digest() != a.with_betas(3.3).digest()
    back = setup_from_mapping(a.to_config_dict())
    assert back.digest() == a.digest()
