import json
import math
import os

import numpy as np
import pytest

from pinchcrb.cli import EXIT_INVALID, EXIT_IO, EXIT_OK, EXIT_TOLERANCE, main
from pinchcrb.experiments import SweepResult, SweepRow
from pinchcrb.sensitivity import observation_jacobian
from pinchcrb.serialize import (
    CSV_HEADER,
    fmt,
    parse_sweep_csv,
    read_dat,
    read_placement,
    read_sweep_csv,
    sweep_csv_text,
)

FAST = """
[sweep]
samples = 32
n_values = 4, 8, 16
transmitters = PAS:2, ULA:4
[placement]
restarts = 2
reference_n = 8
[ensemble]
grid_theta = 3
grid_range = 3
"""


@pytest.fixture
def fast_config(tmp_path):
    p = tmp_path / "fast.ini"
    p.write_text(FAST)
    return str(p)


def test_crb_prints_report(capsys):
    assert main(["crb", "--range", "12", "--direction-deg", "10"]) == EXIT_OK
    out = dict(line.split(" = ") for line in capsys.readouterr().out.strip().splitlines())
    assert out["divergent"] == "false"
    assert float(out["sqrt_crb_r_m"]) > 0 and float(out["sqrt_crb_theta_deg"]) > 0


def test_crb_json_and_plane_wave(capsys):
    assert main(["crb", "--rx-mode", "plane-wave", "--format", "json"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["divergent"] is True and out["sqrt_crb_r_m"] == "inf"


@pytest.mark.parametrize("argv, needle", [
    (["crb", "--freq", "-5"], "--freq"),
    (["crb", "--n-elements", "0"], "--n-elements"),
    (["optimize", "--m", "2000"], "n_antennas"),
    (["validate", "--fd-configs", "0"], "--fd-configs"),
    (["sweep", "--samples", "0"], "--samples"),
])
def test_invalid_input_exits_2(argv, needle, capsys, tmp_path):
    assert main(argv + (["--out", str(tmp_path / "x")] if argv[0] in ("optimize", "sweep") else [])) == EXIT_INVALID
    assert needle in capsys.readouterr().err


def test_missing_config_exits_2(capsys, tmp_path):
    assert main(["crb", "--config", str(tmp_path / "nope.ini")]) == EXIT_INVALID


def test_bad_config_key_reports_line(capsys, tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text("[carrier]\nfrequency_ghz = 27\nfreq = 28\n")
    assert main(["crb", "--config", str(p)]) == EXIT_INVALID
    err = capsys.readouterr().err
    assert ":3:" in err and "carrier.freq" in err


def test_unwritable_output_exits_3(fast_config, tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["optimize", "--config", fast_config, "--out", str(blocker / "sub" / "p.txt")]) == EXIT_IO


def test_sweep_writes_csv_and_dat(fast_config, tmp_path, capsys):
    out = tmp_path / "res" / "sweep.csv"
    assert main(["sweep", "--config", fast_config, "--out", str(out), "--seed", "5"]) == EXIT_OK
    res = read_sweep_csv(out)
    assert len(res.rows) == 6 and res.labels() == ["PAS M=2", "ULA M=4"]
    dat = read_dat(tmp_path / "res" / "sweep_pas_m_2_range.dat")
    assert [n for n, _ in dat] == [4, 8, 16]
    assert dat[1][1] == res.cell("PAS M=2", 8).mean_sqrt_crb_r
    assert (tmp_path / "res" / "sweep_ula_m_4_angle.dat").exists()
    assert "slope(range)" in capsys.readouterr().out
    # same seed, same bytes
    again = tmp_path / "again.csv"
    main(["sweep", "--config", fast_config, "--out", str(again), "--seed", "5"])
    assert again.read_bytes() == out.read_bytes()


def test_sweep_json(fast_config, tmp_path):
    out = tmp_path / "s.json"
    assert main(["sweep", "--config", fast_config, "--out", str(out), "--format", "json"]) == EXIT_OK
    rows = json.loads(out.read_text())["rows"]
    assert len(rows) == 6 and set(rows[0]) == set(CSV_HEADER)


def test_csv_round_trip_at_twelve_digits():
    rows = (SweepRow("PAS M=4", 2, 1 / 3, math.pi * 1e7, 0.0),
            SweepRow("PAS M=4", 4, 2.0 ** -40, 123456789.123456789, 0.25),
            SweepRow("ULA, odd \"label\"", 8, math.inf, math.inf, 1.0))
    res = SweepResult(rows)
    back = parse_sweep_csv(sweep_csv_text(res))
    assert back == res.rounded(12)
    assert fmt(1 / 3) == "0.333333333333"


def test_optimize_is_byte_identical(fast_config, tmp_path, capsys):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    for p in (a, b):
        assert main(["optimize", "--config", fast_config, "--m", "3", "--seed", "9", "--out", str(p)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    pos, meta = read_placement(a)
    assert pos.size == 3 and abs(pos.sum()) < 1e-9
    assert meta["m_antennas"] == 3 and meta["seed"] == 9
    assert np.all(np.diff(pos) >= meta["wavelength_m"] / 2 - 1e-9)


def test_validate_passes(capsys):
    assert main(["validate", "--fd-configs", "40", "--fim-configs", "10", "--seed", "1"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.count("PASS") == 2


def test_validate_detects_injected_fault(capsys):
    def broken(layout, rx, target):
        jac = observation_jacobian(layout, rx, target)
        return type(jac)(g_theta=jac.g_theta, g_r=jac.g_r * (1 + 1e-3))

    code = main(["validate", "--fd-configs", "20", "--fim-configs", "2", "--seed", "1"], jacobian=broken)
    assert code == EXIT_TOLERANCE


def test_atomic_write_leaves_no_temp_files(fast_config, tmp_path):
    out = tmp_path / "p.txt"
    main(["optimize", "--config", fast_config, "--out", str(out)])
    assert sorted(os.listdir(tmp_path)) == ["fast.ini", "p.txt"]
