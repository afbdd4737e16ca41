import csv
import io
import json

import pytest

from dirbc import bitmath
from dirbc.cli import EXIT_FAULT, EXIT_OK, EXIT_USAGE, main, parse_int_list
from dirbc.config import ConfigFileError, build_scenario, parse_config
from dirbc.harness import run_scenario

CUSTOM = """
[scenario]
name = "custom-noisy"
repeat = 3
seed = 12

[protocol]
variant = "CHSH2"
n = 200
delta = 0.02

[alice]
b = 1
"""


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_config_builds_scenario():
    sc = build_scenario(parse_config(CUSTOM))
    assert (sc.name, sc.repeat, sc.seed, sc.config.n, sc.config.delta, sc.alice.b) == ("custom-noisy", 3, 12, 200, 0.02, 1)
    over = build_scenario(parse_config(CUSTOM), {"n": 50, "seed": 1})
    assert over.config.n == 50 and over.seed == 1


def test_config_base_and_devices():
    text = """
[scenario]
base = "honest-chsh1"
[protocol]
n = 30
[devices.b1]
kind = "malicious"
rules = [{location = "at:Q1", output = "1"}]
"""
    sc = build_scenario(parse_config(text))
    assert sc.config.n == 30 and sc.devices.b[1].rules[0].location == "at:Q1"


@pytest.mark.parametrize(
    "text, field",
    [
        ("[protocol]\nvariant = 'CHSH1'\nn = 10\nxi = 0.3\n", "protocol.xi"),
        ("[protocol]\nvariant = 'CHSH1'\nn = 10\nspeed = 2\n", "protocol.speed"),
        ("[protocol]\nvariant = 'CHSH1'\nn = 10\n[alice]\nb = 2\n", "alice.b"),
        ("[scenario]\nbase = 'nope'\n", "scenario.base"),
        ("[protocol]\nvariant = 'CHSH1'\nn = 10\n[layout]\nP = [0, 0, 0, 0]\nQ0 = [0, 0, 0, 1]\nQ1 = [1, 0, 0, 0.5]\n",
         "layout"),
        ("[protocol]\nvariant = 'CHSH1'\nn = 10\n[devices.a]\nkind = 'malicious'\nrules = [{output = 'zz'}]\n",
         "devices.a"),
        ("[weather]\nsunny = true\n", "weather"),
    ],
)
def test_malformed_config_names_field(text, field):
    with pytest.raises(ConfigFileError, match=field.replace(".", r"\.")):
        build_scenario(parse_config(text))


def test_syntax_error_reports_line():
    with pytest.raises(ConfigFileError, match="line 2"):
        parse_config("[protocol]\nn = = 3\n")


def test_int_lists():
    assert parse_int_list("1-3") == [1, 2, 3]
    assert parse_int_list("1,4-6") == [1, 4, 5, 6]


def test_cli_run_csv_matches_verdicts(tmp_path, capsys):
    cfg = tmp_path / "s.toml"
    cfg.write_text(CUSTOM)
    report = tmp_path / "r.json"
    code = main(["run", "--config", str(cfg), "--report", str(report), "--audit", "--transcripts", str(tmp_path / "t")])
    out = capsys.readouterr()
    assert code == EXIT_OK and "audit: pass" in out.err
    rows = _rows(out.out)
    expected = run_scenario(build_scenario(parse_config(CUSTOM)))
    assert [r["status1"] for r in rows] == [t.verdict[1].status.value for t in expected.trials]
    assert [int(r["seed"]) for r in rows] == json.loads(report.read_text())["trial_seeds"]
    assert len(list((tmp_path / "t").iterdir())) == 3
    assert main(["audit", *map(str, (tmp_path / "t").iterdir())]) == EXIT_OK


def test_cli_run_is_reproducible(capsys):
    main(["run", "--scenario", "honest-chsh3", "--n", "60", "--repeat", "2", "--seed", "4"])
    first = capsys.readouterr().out
    main(["run", "--scenario", "honest-chsh3", "--n", "60", "--repeat", "2", "--seed", "4"])
    assert capsys.readouterr().out == first


def test_cli_bounds_rows(capsys):
    assert main(["bounds", "--n", "1000", "--xi", "0.05"]) == EXIT_OK
    (row,) = _rows(capsys.readouterr().out)
    assert float(row["epsilon"]) == pytest.approx(bitmath.epsilon_bound(1000, 0.05).epsilon, rel=1e-12)


def test_cli_rejects_large_tolerance(capsys):
    assert main(["bounds", "--xi", "0.11"]) == EXIT_USAGE
    assert "1/4" in capsys.readouterr().err


def test_cli_bruteforce(capsys):
    assert main(["bruteforce", "--n", "1-3"]) == EXIT_OK
    rows = _rows(capsys.readouterr().out)
    assert [float(r["epsilon_star"]) for r in rows] == [0.5, 0.25, 0.125]
    assert all(float(r["gap"]) >= 0 for r in rows)
    assert main(["bruteforce", "--n", "9"]) == EXIT_USAGE


def test_cli_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == EXIT_USAGE
    assert main(["run"]) == EXIT_USAGE
    assert main(["audit", "/nonexistent/transcript.txt"]) == EXIT_USAGE
    capsys.readouterr()


def test_cli_audit_detects_tampering(tmp_path, capsys):
    main(["run", "--scenario", "honest-chsh1", "--n", "8", "--repeat", "1", "--seed", "1", "--transcripts", str(tmp_path)])
    (path,) = tmp_path.iterdir()
    lines = path.read_text().splitlines()
    k = next(i for i, line in enumerate(lines) if "kind=recv" in line and "agent=V_0" in line and "label=O " in line)
    lines[k] = lines[k].rsplit("payload=", 1)[0] + "payload=" + "1" * 8
    path.write_text("\n".join(lines) + "\n")
    capsys.readouterr()
    assert main(["audit", str(path)]) == EXIT_FAULT


def test_cli_hiding(capsys):
    assert main(["hiding", "--program", "honest", "--samples", "400", "--seed", "2", "--limit", "0.1"]) == EXIT_OK
    (row,) = _rows(capsys.readouterr().out)
    assert row["program"] == "honest" and int(row["samples"]) == 400
