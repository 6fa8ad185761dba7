import csv
import io
import json
import math

import pytest

from isocrit import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_constants_json_and_csv(capsys):
    code, out, _ = run(capsys, "constants", "--dim", "1", "--mc-samples", "20000")
    assert code == 0
    rec = json.loads(out)
    assert rec["m"] == 1 and rec["amplitude"] == "gaussian"
    assert rec["s_m"] == pytest.approx((2 * math.pi) ** -0.5)
    assert abs(rec["c_m"] - math.sqrt(3) / math.pi) < 4 * rec["c_m_se"]
    code, out, _ = run(capsys, "constants", "--dim", "2", "--mc-samples", "2000", "--format", "csv")
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0][:2] == ["m", "amplitude"] and rows[1][0] == "2"


def test_kernel_csv(capsys):
    code, out, _ = run(capsys, "kernel", "--dim", "2", "--t", "0,1")
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["t", "gamma", "value"]
    zero = {r[1]: float(r[2]) for r in rows[1:] if r[0] == "0.0"}
    assert zero["0:0"] == pytest.approx(1 / (2 * math.pi))
    assert "T" in zero


def test_two_point_csv(capsys, tmp_path):
    out = tmp_path / "tp.csv"
    code, _, _ = run(capsys, "two-point", "--dim", "1", "--r-min", "0.5", "--r-max", "4", "--nodes", "5",
                     "--mc-samples", "2000", "--out", str(out))
    assert code == 0
    rows = list(csv.reader(open(out)))
    assert rows[0] == ["r", "rho_hat", "rho_hat_se", "rho_tilde", "delta", "delta_se", "T"]
    assert len(rows) == 6
    assert float(rows[1][0]) == pytest.approx(0.5) and float(rows[-1][0]) == pytest.approx(4.0)


def test_zconst_json_keys(capsys):
    code, out, _ = run(capsys, "zconst", "--dim", "1", "--nodes", "33", "--mc-samples", "5000")
    assert code == 0
    rec = json.loads(out)
    assert list(rec) == ["m", "amplitude", "c_m", "c_m_se", "z_m", "z_m_err", "v_m", "v_m_err",
                         "r_min", "r_max", "nodes"]
    assert rec["v_m"] == rec["z_m"] + rec["c_m"]


def test_simulate_stdout(capsys):
    code, out, _ = run(capsys, "simulate", "--dim", "1", "--box", "10", "--waves", "256", "--reps", "2")
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["rep", "x1", "value", "grad_norm", "morse_index"]
    assert {r[0] for r in rows[1:]} <= {"0", "1"}


def test_sweep_with_config_file(capsys, caplog, tmp_path):
    conf = tmp_path / "sweep.conf"
    rows = tmp_path / "rows.csv"
    conf.write_text("# small run\ndim = 1\nscales = 2,4\nreps = 3\nwaves = 256\n"
                    f"out = {rows}\nconstants = false\n")
    code, out, err = run(capsys, "sweep", "--config", str(conf), "--seed", "5")
    assert code == 0
    summary = json.loads(out)
    assert summary["config_echo"]["seed"] == 5
    assert summary["config_echo"]["reps"] == 3
    assert len(list(csv.reader(open(rows)))) == 1 + 6
    assert "unreliable" in caplog.text


def test_lln_needs_three_scales(capsys):
    code, _, err = run(capsys, "lln", "--dim", "1", "--scales", "2,4", "--reps", "2", "--no-constants")
    assert code == 2 and "3 scales" in err


def test_bad_amplitude_and_config(capsys, tmp_path):
    with pytest.raises(SystemExit):
        cli.main(["constants", "--amplitude", "cauchy"])
    conf = tmp_path / "bad.conf"
    conf.write_text("bogus = 1\n")
    with pytest.raises(SystemExit):
        cli.main(["kernel", "--config", str(conf), "--t", "1"])


def test_unwritable_output(capsys, tmp_path):
    code, _, err = run(capsys, "simulate", "--box", "5", "--reps", "2", "--out",
                       str(tmp_path / "nope" / "x.csv"))
    assert code == 2 and "cannot write" in err
