import json
import subprocess
import sys

from stablesim.cli import main


def _err(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_list(capsys):
    assert main(["--list"]) == 0
    out = capsys.readouterr().out
    assert "sweep-reward-stc" in out and "compare-fx" in out


def test_run_writes_outputs(tmp_path, capsys):
    cfg = tmp_path / "c.txt"
    cfg.write_text("days = 10\n")
    assert main(["market-stc", "--config", str(cfg), "--seed", "2", "--out", str(tmp_path / "o")]) == 0
    assert "stabilized" in capsys.readouterr().out
    params = (tmp_path / "o" / "params.txt").read_text()
    assert "seed = 2" in params and "days = 10" in params


def test_unknown_scenario(tmp_path, capsys):
    assert main(["nope", "--seed", "1", "--out", str(tmp_path)]) != 0
    assert _err(capsys)["error"] == "unknown-scenario"


def test_missing_seed(tmp_path, capsys):
    assert main(["intervals", "--out", str(tmp_path)]) != 0
    err = _err(capsys)
    assert err["error"] == "config" and "seed" in err["message"]


def test_bad_config_reports_line(tmp_path, capsys):
    cfg = tmp_path / "c.txt"
    cfg.write_text("seed = 1\nwat = 2\n")
    assert main(["intervals", "--config", str(cfg), "--out", str(tmp_path)]) != 0
    assert "line 2" in _err(capsys)["message"]


def test_missing_config_file(tmp_path, capsys):
    assert main(["intervals", "--config", str(tmp_path / "none"), "--seed", "1", "--out", str(tmp_path)]) != 0
    assert _err(capsys)["error"] == "config"


def test_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["intervals", "--seed", "1", "--out", str(blocker / "sub")]) != 0
    assert _err(capsys)["error"] == "run"


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "stablesim", "--list"], capture_output=True, text=True)
    assert proc.returncode == 0 and "intervals" in proc.stdout
