import io
import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from wpvol.cli import EXIT_DOMAIN, EXIT_FAIL, EXIT_OK, EXIT_USAGE, Config, UsageError, main, read_config
from wpvol.intersection import CACHE_HEADER

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(autouse=True)
def _no_env_cache(monkeypatch, fresh_store):
    monkeypatch.delenv("WPVOL_CACHE", raising=False)


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out)
    return code, out.getvalue()


def run_proc(*argv, env=None, cwd=None):
    e = dict(os.environ)
    e.pop("WPVOL_CACHE", None)
    e.update(env or {})
    p = subprocess.run(
        [sys.executable, "-m", "wpvol", *argv], capture_output=True, text=True, env=e, cwd=cwd
    )
    return p.returncode, p.stdout, p.stderr


# -- examples ------------------------------------------------------------------


def test_bracket_examples():
    assert run("bracket", "-g", "1", "-d", "0") == (0, "1:1/12\n")
    assert run("bracket", "-g", "0", "-d", "0,0,0") == (0, "0:1/1\n")
    code, _ = run("bracket", "-g", "0", "-d", "5")
    assert code == EXIT_DOMAIN


def test_bracket_numeric():
    code, text = run("bracket", "-g", "1", "-d", "0", "--numeric")
    assert code == 0 and "0.8224670334241132" in text


def test_volume_and_polynomial():
    assert run("volume", "-g", "2", "-n", "0") == (0, "3:43/2160\n")
    code, text = run("polynomial", "-g", "1", "-n", "1")
    assert code == 0 and len(text.strip().split("\n")) == 2


def test_table_row_count():
    code, text = run("--format", "csv", "table", "-gmax", "10", "-n", "1")
    lines = text.strip().split("\n")
    assert code == 0 and lines[0] == "g,n,value" and len(lines) - 1 == 10


def test_table_to_file(tmp_path):
    dest = tmp_path / "t.csv"
    code, _ = run("table", "-gmax", "3", "-n", "1", "-o", str(dest))
    assert code == 0 and dest.read_text().startswith("g,n,value\n1,1,1:1/12\n")


# -- golden files ------------------------------------------------------------------


@pytest.mark.parametrize(
    "argv,name",
    [
        (["polynomial", "-g", "1", "-n", "1"], "polynomial_1_1.txt"),
        (["--format", "json", "polynomial", "-g", "2", "-n", "1"], "polynomial_2_1.json"),
        (["table", "-gmax", "4", "-n", "0,1,2"], "table_4.csv"),
        (["--format", "json", "volume", "-g", "2", "-n", "0"], "volume_2_0.json"),
        (["verify", "bounds", "-gmax", "3"], "verify_bounds_3.txt"),
    ],
)
def test_golden_byte_exact(argv, name):
    code, text = run(*argv)
    assert code == 0
    assert text.encode() == (GOLDEN / name).read_bytes()


# -- exit codes ------------------------------------------------------------------------


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["nonsense"],
        ["bracket", "-g", "x", "-d", "0"],
        ["bracket", "-g", "1"],
        ["--precision", "32", "volume", "-g", "1", "-n", "1"],
        ["--max-genus", "0", "volume", "-g", "1", "-n", "1"],
        ["extrapolate", "e1", "-n", "1", "-grange", "6:12"],
        ["extrapolate", "e1", "-n", "2", "-d", "1", "-grange", "6:12"],
        ["extrapolate", "h1", "-n", "1", "-grange", "bad"],
        ["cache", "stats"],
    ],
)
def test_usage_errors(argv):
    assert run(*argv)[0] == EXIT_USAGE


@pytest.mark.parametrize(
    "argv",
    [
        ["volume", "-g", "0", "-n", "2"],
        ["polynomial", "-g", "2", "-n", "0"],
        ["--max-genus", "3", "volume", "-g", "4", "-n", "1"],
        ["extrapolate", "h1", "-n", "1", "-grange", "6:7", "-order", "3"],
        ["bracket", "-g", "1", "-d", "0,0,9"],
    ],
)
def test_domain_errors(argv):
    assert run(*argv)[0] == EXIT_DOMAIN


def test_verify_suites_pass():
    for suite, extra in [("recursions", ["-gmax", "2"]), ("bounds", ["-gmax", "4"]), ("sinh", ["-gmax", "2"])]:
        code, text = run("verify", suite, *extra)
        assert code == EXIT_OK, text
        assert "FAIL" not in text


def test_verify_pdes_marks_interpretation():
    code, text = run("verify", "pdes", "-gmax", "2")
    assert code == EXIT_OK
    assert "interpreted: b_j = L_j" in text
    # counting the second PDE as written turns the run red
    code, _ = run("verify", "pdes", "-gmax", "2", "--assert-pde2")
    assert code == EXIT_FAIL


# -- machine-readable output ----------------------------------------------------------------


def test_json_outputs_parse():
    for argv in (
        ["--format", "json", "bracket", "-g", "2", "-d", "1,0"],
        ["--format", "json", "volume", "-g", "3", "-n", "1"],
        ["--format", "json", "table", "-gmax", "3", "-n", "1"],
        ["--format", "json", "verify", "bounds", "-gmax", "2"],
    ):
        code, text = run(*argv)
        assert code == 0
        json.loads(text)


def test_table_json_schema():
    doc = json.loads(run("--format", "json", "table", "-gmax", "2", "-n", "1")[1])
    assert doc["wpvol"] == 1
    assert {"g", "n", "value"} <= set(doc["entries"][0])


def test_extrapolate_report(tmp_path):
    plot = tmp_path / "p.csv"
    code, text = run(
        "extrapolate", "e1", "-n", "1", "-d", "1", "-grange", "6:12", "-order", "2", "--plot-csv", str(plot)
    )
    assert code == 0
    doc = json.loads(text)
    for key in ("target", "n", "d", "g_range", "order", "fitted", "closed_form", "relative_deviation", "spread"):
        assert key in doc
    assert doc["closed_form"] == "−1/(2π²)"
    assert doc["g_range"] == [6, 12] and len(doc["fitted"]) == 3
    rows = plot.read_text().strip().split("\n")
    assert rows[0] == "g,value,fitted" and len(rows) == 8


def test_extrapolate_check_flag():
    # a one-term fit is far too crude for e1 and must fail the tolerance
    code, text = run("extrapolate", "e1", "-n", "1", "-d", "1", "-grange", "4:8", "-order", "1", "--check")
    assert code == EXIT_FAIL and json.loads(text)["passed"] is False


# -- configuration --------------------------------------------------------------------------


def test_config_file(tmp_path):
    cfg = tmp_path / "w.conf"
    cfg.write_text('# settings\nprecision_bits = 128\noutput_format = "json"\nmax_genus = 9\n')
    assert read_config(str(cfg)) == {"precision_bits": 128, "output_format": "json", "max_genus": 9}
    code, text = run("--config", str(cfg), "volume", "-g", "1", "-n", "1")
    assert code == 0 and json.loads(text)["value"] == "1:1/12"
    assert run("--config", str(cfg), "volume", "-g", "10", "-n", "1")[0] == EXIT_DOMAIN


def test_config_errors(tmp_path):
    bad = tmp_path / "b.conf"
    bad.write_text("colour = blue\n")
    with pytest.raises(UsageError):
        read_config(str(bad))
    with pytest.raises(UsageError):
        Config(precision_bits=16)
    assert run("--config", str(bad), "volume", "-g", "1", "-n", "1")[0] == EXIT_USAGE
    assert run("--config", str(tmp_path / "missing.conf"), "volume", "-g", "1", "-n", "1")[0] == EXIT_USAGE


# -- cache ----------------------------------------------------------------------------------


def test_cache_via_env_and_flag(tmp_path, monkeypatch):
    env_path = tmp_path / "env.txt"
    flag_path = tmp_path / "flag.txt"
    monkeypatch.setenv("WPVOL_CACHE", str(env_path))
    assert run("volume", "-g", "2", "-n", "1")[0] == 0
    assert env_path.read_text().startswith(CACHE_HEADER + "\n")
    assert run("--cache", str(flag_path), "volume", "-g", "2", "-n", "2")[0] == 0
    assert flag_path.exists()


def test_cache_commands(tmp_path):
    path = tmp_path / "c.txt"
    code, text = run("cache", "stats", str(path))
    assert code == 0 and json.loads(text)["entries"] == 0
    run("--cache", str(path), "table", "-gmax", "4", "-n", "1")
    stats = json.loads(run("cache", "stats", str(path))[1])
    assert stats["entries"] > 0 and stats["max_genus"] == 4
    before = path.read_bytes()
    assert run("cache", "compact", str(path))[0] == 0
    assert path.read_bytes() == before
    assert run("cache", "compact", str(path))[0] == 0
    assert path.read_bytes() == before
    assert run("cache", "verify", str(path))[0] == 0


def test_cache_verify_after_tamper(tmp_path):
    path = tmp_path / "c.txt"
    run("--cache", str(path), "volume", "-g", "2", "-n", "1")
    lines = path.read_text().split("\n")
    fields = lines[1].split(";")
    fields[5] = str(int(fields[5]) + 1)
    lines[1] = ";".join(fields)
    path.write_text("\n".join(lines))
    code = run("cache", "verify", str(path))[0]
    assert code == EXIT_FAIL
    # ordinary commands refuse the corrupt file too
    assert run("--cache", str(path), "volume", "-g", "1", "-n", "1")[0] == EXIT_FAIL


def test_warm_equals_cold(tmp_path):
    cache = str(tmp_path / "w.txt")
    argv = ["--cache", cache, "table", "-gmax", "6", "-n", "0,1,2"]
    cold = run_proc(*argv)
    warm = run_proc(*argv)
    assert cold[0] == warm[0] == 0
    assert cold[1] == warm[1]
    nocache = run_proc("table", "-gmax", "6", "-n", "0,1,2")
    assert nocache[1] == cold[1]


def test_console_entry_point_version():
    code, out, _ = run_proc("--version")
    assert code == 0 and out.startswith("wpvol ")
