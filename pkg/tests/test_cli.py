import csv
import io
import json
import textwrap

import pytest

from seqmetro.cli import format_value, main
from seqmetro.config import ConfigError, load_config

SMALL_SWEEP = """
[run]
experiment = qfi-sweep
[grid]
n = 5, 12
alpha_min = 1e-5
alpha_max = 0.6
alpha_steps = 4
"""


def _write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(text))
    return str(p)


def _body(text):
    """CSV text without the metadata line (it carries a timestamp)."""
    lines = text.splitlines()
    assert lines[0].startswith("# metadata: ")
    json.loads(lines[0][len("# metadata: "):])
    return "\n".join(lines[1:])


def test_unknown_key_reports_line(tmp_path):
    path = _write(tmp_path, "[run]\nexperiment = qfi-sweep\n[grid]\nn = 5\nalpah_min = 0.1\n")
    with pytest.raises(ConfigError) as exc:
        load_config(path)
    assert exc.value.key == "alpah_min" and exc.value.line == 5


def test_unknown_section_and_bad_value(tmp_path):
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, "[output]\nfoo = 1\n"), "qfi-sweep")
    with pytest.raises(ConfigError) as exc:
        load_config(_write(tmp_path, "[grid]\nalpha_steps = many\n"), "qfi-sweep")
    assert exc.value.line == 2


def test_env_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv("SEQMETRO_WORKERS", "3")
    monkeypatch.setenv("SEQMETRO_OUT", str(tmp_path / "env.csv"))
    cfg = load_config(None, "validate")
    assert cfg.workers == 3 and cfg.out.endswith("env.csv")
    cfg = load_config(None, "validate", {"workers": 1})
    assert cfg.workers == 1
    monkeypatch.setenv("SEQMETRO_WORKERS", "two")
    with pytest.raises(ConfigError):
        load_config(None, "validate")


def test_format_value():
    assert format_value(1e-5) == "1e-05"
    assert format_value(0.25) == "0.25"
    assert format_value(float("inf")) == "inf"
    assert format_value(7) == "7"


def test_csv_output(tmp_path, capsys):
    path = _write(tmp_path, SMALL_SWEEP)
    assert main(["qfi-sweep", "--config", path]) == 0
    out = capsys.readouterr().out
    rows = list(csv.reader(io.StringIO(_body(out))))
    assert rows[0] == ["protocol", "N", "alpha", "qfi"]
    assert len(rows) == 1 + 2 * 2 * 4
    assert any("e-" in r[2] for r in rows[1:])  # small amplitudes in scientific notation


def test_reruns_and_workers_are_identical(tmp_path):
    path = _write(tmp_path, SMALL_SWEEP)
    outs = []
    for i, workers in enumerate(("1", "1", "2")):
        dest = tmp_path / f"o{i}.csv"
        assert main(["qfi-sweep", "--config", path, "--workers", workers, "--out", str(dest)]) == 0
        outs.append(_body(dest.read_text()))
    assert outs[0] == outs[1] == outs[2]


def test_json_output(tmp_path):
    dest = tmp_path / "o.json"
    path = _write(tmp_path, SMALL_SWEEP)
    assert main(["qfi-sweep", "--config", path, "--format", "json", "--out", str(dest)]) == 0
    doc = json.loads(dest.read_text())
    assert doc["columns"] == ["protocol", "N", "alpha", "qfi"]
    assert doc["metadata"]["config"]["experiment"] == "qfi-sweep"
    assert len(doc["rows"]) == 16


def test_sample_is_seeded(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["sample", "--seed", "4", "--count", "50", "--out", str(a)]) == 0
    assert main(["sample", "--seed", "4", "--count", "50", "--out", str(b)]) == 0
    assert _body(a.read_text()) == _body(b.read_text())
    assert _body(a.read_text()).splitlines()[0] == "trajectory,bitstring,k_real,k_imag"


def test_exit_code_config(tmp_path, capsys):
    path = _write(tmp_path, "[grid]\nalpah_min = 0.1\n")
    assert main(["qfi-sweep", "--config", path]) == 2
    assert "line 2" in capsys.readouterr().err
    assert main(["qfi-sweep", "--config", str(tmp_path / "missing.ini")]) == 2


def test_exit_code_resource(tmp_path, capsys):
    path = _write(tmp_path, "[grid]\nn = 100\nalpha = 0.2\n")
    assert main(["two-param-compare", "--config", path]) == 3
    assert "limiting parameter: n" in capsys.readouterr().err


def test_validate_exit_codes(monkeypatch, capsys, tmp_path):
    from seqmetro import validation

    assert main(["validate", "--out", str(tmp_path / "v.csv")]) == 0
    assert "PASS closed_form_single_qfi" in capsys.readouterr().err
    monkeypatch.setitem(validation.CHECKS, "closed_form_single_qfi", lambda: validation.CheckResult("closed_form_single_qfi", 1.0, 1e-8))
    assert main(["validate", "--out", str(tmp_path / "v.csv")]) == 1
    assert "1 check(s) failed" in capsys.readouterr().err
