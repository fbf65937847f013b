import json
import subprocess
import sys

import numpy as np
import pytest

from tfising.cli import (
    COMMANDS,
    ConfigError,
    bundled_config,
    csv_text,
    main,
    parse_config,
    Report,
)

SMALL_CHI = """[model]
d = 1
L = 1
J = 1.0
beta = 0.5
q = 0.0

[mc]
seed = 2
replicas = 8
samples = 2000

[grids]
n_t = 8
"""


def test_every_command_has_a_bundled_config():
    for c in COMMANDS:
        cfg = parse_config(bundled_config(c), c)
        assert cfg.mc["replicas"] >= 2


def test_unknown_key_reports_line(tmp_path):
    text = "[model]\nd = 1\nL = 2\nbogus = 3\n"
    with pytest.raises(ConfigError, match=r"x\.ini:4: unknown key 'bogus'"):
        parse_config(text, "x.ini")


def test_unknown_section_reports_line():
    with pytest.raises(ConfigError, match=r"y\.ini:3: unknown section \[extra\]"):
        parse_config("[model]\nd = 1\n[extra]\na = 1\n", "y.ini")


def test_bad_value_reports_line():
    with pytest.raises(ConfigError, match=r"z\.ini:3: bad value for model\.beta"):
        parse_config("[model]\nd = 1\nbeta = warm\n", "z.ini")


def test_range_check_reports_line():
    with pytest.raises(ConfigError, match=r"w\.ini:2: mc\.replicas"):
        parse_config("[mc]\nreplicas = 1\n", "w.ini")


def test_duplicate_key_is_error():
    with pytest.raises(ConfigError, match=r"d\.ini:3:"):
        parse_config("[model]\nd = 1\nd = 2\n", "d.ini")


def test_config_error_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.ini"
    p.write_text("[model]\nnope = 1\n")
    assert main(["estimate-chi", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "bad.ini:2" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["estimate-chi", "--config", str(tmp_path / "missing.ini"), "--out", str(tmp_path)]) == 2


def test_unknown_command_exits_nonzero():
    r = subprocess.run([sys.executable, "-m", "tfising", "frobnicate"], capture_output=True, text=True)
    assert r.returncode != 0
    assert "usage" in r.stderr


def test_seed_override_validation(tmp_path):
    assert main(["estimate-chi", "--seed", "-1", "--out", str(tmp_path)]) == 2
    assert main(["estimate-chi", "--replicas", "1", "--out", str(tmp_path)]) == 2


def test_csv_formatting():
    rep = Report(("a", "b", "c", "d"))
    rep.add(a=0.1, b=True, c=3)
    assert csv_text(rep) == "a,b,c,d\n0.10000000000000001,true,3,\n"


def _run(tmp_path, name, args):
    out = tmp_path / name
    code = main(args + ["--out", str(out)])
    return code, (out / "report.csv").read_bytes(), (out / "summary.json").read_bytes()


def test_estimate_chi_deterministic_and_correct(tmp_path):
    cfg = tmp_path / "chi.ini"
    cfg.write_text(SMALL_CHI)
    a = _run(tmp_path, "a", ["estimate-chi", "--config", str(cfg)])
    b = _run(tmp_path, "b", ["estimate-chi", "--config", str(cfg)])
    assert a == b and a[0] == 0
    s = json.loads(a[2])
    assert s["passed"] and s["command"] == "estimate-chi"
    assert abs(s["summary"]["chi"] - (1 + np.tanh(0.5))) <= 4 * s["summary"]["std_error"]


def test_seed_override_changes_output(tmp_path):
    cfg = tmp_path / "chi.ini"
    cfg.write_text(SMALL_CHI)
    a = _run(tmp_path, "a", ["estimate-chi", "--config", str(cfg)])
    b = _run(tmp_path, "b", ["estimate-chi", "--config", str(cfg), "--seed", "99"])
    assert a[1] != b[1]
    assert json.loads(b[2])["config"]["mc"]["seed"] == 99


def test_out_env_variable(tmp_path, monkeypatch):
    cfg = tmp_path / "chi.ini"
    cfg.write_text(SMALL_CHI)
    monkeypatch.setenv("TFISING_OUT", str(tmp_path / "env"))
    assert main(["estimate-chi", "--config", str(cfg)]) == 0
    assert (tmp_path / "env" / "report.csv").exists()


@pytest.mark.parametrize("command", ["oracle-table", "chi-scan", "check-infrared"])
def test_oracle_commands_pass(tmp_path, command):
    code, csv_bytes, summary = _run(tmp_path, command, [command])
    assert code == 0
    assert json.loads(summary)["passed"]
    assert csv_bytes.count(b"\n") > 1
