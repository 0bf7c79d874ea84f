import json

import pytest

from uwofdm import cli


def run_cli(args):
    return cli.main(args)


def test_mse_sweep_writes_outputs(tmp_path):
    out = tmp_path / "o"
    code = run_cli(["mse-sweep", "--systems", "uw_systematic", "--epsilons", "0.1",
                    "--trials", "3", "--seed", "2", "--out", str(out)])
    assert code == 0
    assert (out / "mse_sweep.csv").exists()
    assert (out / "mse_sweep.pdf").exists()


def test_ber_sweep_and_plot(tmp_path):
    out = tmp_path / "o"
    code = run_cli(["ber-sweep", "--systems", "uw_systematic", "--tiers", "cpe",
                    "--epsilons", "0", "--ebn0", "40", "--rate", "1/2",
                    "--constellation", "qpsk", "--trials", "2", "--out", str(out)])
    assert code == 0
    csv_path = out / "ber_sweep.csv"
    assert csv_path.exists()
    code = run_cli(["plot", "--csv", str(csv_path), "--kind", "ber_sweep",
                    "--out", str(out / "replot.pdf")])
    assert code == 0
    assert (out / "replot.pdf").exists()


def test_calibrate_writes_json(tmp_path):
    out = tmp_path / "o"
    code = run_cli(["calibrate", "--systems", "uw_systematic,cp_ofdm",
                    "--out", str(out), "--tau-rms", "0"])
    assert code == 0
    payload = json.loads((out / "calibration_uw_systematic.json").read_text())
    assert payload["m_d"] == pytest.approx(-0.785, abs=0.01)
    cp = json.loads((out / "calibration_cp_ofdm.json").read_text())
    assert cp["m_d"] == pytest.approx(0.0, abs=1e-9)


def test_model_check_exit_code(tmp_path):
    out = tmp_path / "o"
    code = run_cli(["model-check", "--systems", "uw_systematic", "--epsilons", "0.05",
                    "--trials", "1", "--seed", "11", "--out", str(out)])
    assert code == 0
    assert (out / "model_check.csv").exists()


def test_epsilon_range_parsing():
    assert cli._parse_floats("0:0.2:5") == pytest.approx((0.0, 0.05, 0.1, 0.15, 0.2))
    assert cli._parse_floats("0.02,0.1") == (0.02, 0.1)


def test_config_flag_validates(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"variant": "uw_ofdm"}')
    with pytest.raises(Exception):
        run_cli(["mse-sweep", "--trials", "1", "--config", str(bad),
                 "--out", str(tmp_path / "o")])


def test_config_flag_overrides_preset(tmp_path):
    from uwofdm import config as cfgmod
    from uwofdm import harness

    # a valid non-preset layout: swap one data index into the redundant set
    preset = cfgmod.build_preset(cfgmod.UW_OFDM)
    red = list(preset.red_indices)
    red[0] = 3 if 3 not in red else 4
    override = preset.with_red_indices(sorted(red))
    path = tmp_path / "cfg.json"
    cfgmod.save_config(override, path)
    out = tmp_path / "o"
    code = run_cli(["mse-sweep", "--systems", "uw_systematic", "--epsilons", "0.1",
                    "--trials", "2", "--config", str(path), "--out", str(out)])
    assert code == 0
    system = harness.build_link_system("uw_systematic", "zero", override)
    assert system.cfg.red_indices == override.red_indices != preset.red_indices
