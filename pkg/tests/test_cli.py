import json

import pytest

from wvasim import __version__
from wvasim.cli import COMMANDS, RunManifest, build_parser, main
from wvasim.config import OpticalSetup

SMALL = "theta_list_deg = [0.0, 2.0, 4.0, 6.0, 8.0]\n"


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(SMALL)
    return path


def run(args):
    return main([str(a) for a in args])


def test_parser_knows_all_commands():
    parser = build_parser()
    for cmd in COMMANDS:
        ns = parser.parse_args([cmd, "--trials", "3", "--seed", "4"])
        assert ns.command == cmd and ns.trials == 3 and ns.seed == 4


def test_manifest_validation():
    with pytest.raises(ValueError):
        RunManifest(OpticalSetup(), "plot", "out")
    with pytest.raises(ValueError):
        RunManifest(OpticalSetup(), "estimate", "out", trials=0)


def test_estimate_is_byte_identical_and_traceable(tmp_path, config):
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert run(["estimate", "--config", config, "--out", out, "--trials", 1, "--seed", 7]) == 0
    first = (outs[0] / "estimates.csv").read_bytes()
    assert first == (outs[1] / "estimates.csv").read_bytes()
    manifest = json.loads((outs[0] / "manifest.json").read_text())
    assert manifest["command"] == "estimate" and manifest["seed"] == 7
    assert manifest["version"] == __version__
    assert manifest["setup"]["beta_u_deg"] == 1.6
    assert len(manifest["setup_hash"]) == 16
    lines = first.decode().splitlines()
    assert lines[0] == "beta_deg,theta_deg,tau_as,shift_um,tau_hat_as,seed"
    assert len(lines) == 6
    assert lines[1].endswith(",7:0:0:0")


def test_worker_count_does_not_change_outputs(tmp_path, config, monkeypatch):
    monkeypatch.setenv("WVASIM_WORKERS", "1")
    run(["calibrate", "--config", config, "--out", tmp_path / "one", "--trials", 2])
    monkeypatch.setenv("WVASIM_WORKERS", "3")
    run(["calibrate", "--config", config, "--out", tmp_path / "three", "--trials", 2])
    for name in ("calibration.csv", "calibration_points.csv"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "three" / name).read_bytes()


def test_simulate_dumps_frames(tmp_path, config):
    out = tmp_path / "sim"
    assert run(["simulate", "--config", config, "--out", out, "--trials", 1, "--dump-frames"]) == 0
    frames = sorted((out / "frames").glob("*.pgm"))
    assert len(frames) == 5
    assert frames[0].with_suffix(".json").exists()
    header = (out / "profiles.csv").read_text().splitlines()[0]
    assert header.startswith("row,beta1.6_theta0.0000")


def test_fisher_and_snr_commands(tmp_path, config):
    assert run(["fisher", "--config", config, "--out", tmp_path / "f", "--trials", 2]) == 0
    rows = (tmp_path / "f" / "metrology.csv").read_text().splitlines()
    assert rows[0] == "beta_deg,tau_as,per_photon_F,total_F,crb_std_as,snr_limit,snr_mean,snr_std"
    assert len(rows) == 5
    assert (tmp_path / "f" / "fisher_empirical.csv").exists()
    assert run(["snr", "--config", config, "--out", tmp_path / "s", "--trials", 2]) == 0
    rows = (tmp_path / "s" / "metrology.csv").read_text().splitlines()
    assert rows[1].endswith("nan,nan")


def test_bad_config_exits_nonzero(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("eta = 3\n")
    assert run(["estimate", "--config", bad, "--out", tmp_path / "x"]) == 2
    assert "eta" in capsys.readouterr().err


def test_theta_list_must_start_at_zero(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("theta_list_deg = [1.0, 2.0, 3.0, 4.0]\n")
    assert run(["estimate", "--config", cfg, "--out", tmp_path / "x", "--trials", 1]) == 2


def test_reproduce_fig3_covers_figure_betas(tmp_path, config):
    out = tmp_path / "fig3"
    assert run(["reproduce-fig3", "--config", config, "--out", out, "--trials", 1]) == 0
    theory = (out / "fig3_theory.csv").read_text().splitlines()[1:]
    assert {line.split(",")[0] for line in theory} == {"1.6", "3.3", "6.6", "45.0"}
    assert len(theory) == 4 * 50
    assert (out / "fig3_points.csv").exists() and (out / "fisher_empirical.csv").exists()
