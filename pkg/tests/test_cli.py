import csv
import json

import pytest

from grflab import suites
from grflab.cli import main
from grflab.config import ConfigError, parse_config, render_config
from grflab.registry import STATEMENTS, paper_statement

SMALL = """\
# small perturbed run
model = grid
run_id = small
family = perturbed
N = 48
h0 = 1.0
eps = 0.1
phi0 = 0.2
t_end = 0.1
dt = auto
bases = 16, 28
C = 1000
"""


@pytest.fixture
def out(tmp_path, monkeypatch):
    monkeypatch.setenv("GRFLAB_OUTPUT_ROOT", str(tmp_path / "out"))
    return tmp_path / "out"


def write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


# -- config ---------------------------------------------------------------------------

def test_parse_round_trip():
    cfg = parse_config(SMALL + "tau_grid = 0.05:0.1:0.025\nradii = 0.2, 0.3\n")
    assert cfg.tau_grid == (0.05, 0.075, 0.1)
    assert cfg.bases == (16, 28) and cfg.C == 1000.0 and cfg.dt == "auto"
    assert parse_config(render_config(cfg)) == cfg


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="colour"):
        parse_config(SMALL + "colour = red\n")


@pytest.mark.parametrize("key", ["model", "t_end", "dt"])
def test_missing_key_named(key):
    text = "\n".join(line for line in SMALL.splitlines() if not line.startswith(key + " "))
    with pytest.raises(ConfigError, match=key):
        parse_config(text)


@pytest.mark.parametrize("line,key", [("N = 4", "N"), ("t_end = -1", "t_end"), ("model = sphere", "model"),
                                      ("k = two", "k"), ("radii = 0.1, -2", "radii")])
def test_bad_values_name_key(line, key):
    with pytest.raises(ConfigError, match=key):
        parse_config(SMALL.replace("N = 48", "") + line + "\n")


def test_config_errors_exit_nonzero(tmp_path, out, capsys):
    assert main(["simulate", str(write(tmp_path, SMALL + "colour = red\n"))]) == 2
    assert "colour" in capsys.readouterr().err


def test_missing_run_exit_nonzero(tmp_path, out, capsys):
    assert main(["entropy", str(write(tmp_path, SMALL))]) == 3
    assert "no run artifacts" in capsys.readouterr().err


# -- registry -------------------------------------------------------------------------

def test_registry_lookup():
    assert paper_statement("identity.volume") == STATEMENTS["identity.volume"]
    with pytest.raises(KeyError):
        paper_statement("identity.unknown")


# -- end to end -----------------------------------------------------------------------

def test_simulate_entropy_report(tmp_path, out):
    cfg = write(tmp_path, SMALL + "tau_grid = 0.02, 0.05, 5.0\n")
    assert main(["simulate", str(cfg)]) == 0
    assert main(["entropy", str(cfg)]) == 0
    run = out / "small"
    with open(run / "entropy.csv") as fh:
        rows = list(csv.DictReader(fh))
    # tau = 5 lies outside the slab and is skipped
    taus = sorted({float(r["tau"]) for r in rows})
    assert len(taus) == 2 and taus[1] == pytest.approx(0.05, abs=0.002)
    assert {r["base"] for r in rows} == {"16", "28"}
    checks = json.loads((run / "checks.json").read_text())
    stages = {c["context"]["stage"] for c in checks}
    assert stages == {"simulate", "entropy"}
    assert all(c["paper_statement"] for c in checks)
    # a second entropy pass replaces rather than appends
    assert main(["entropy", str(cfg)]) == 0
    assert len(json.loads((run / "checks.json").read_text())) == len(checks)
    assert main(["report", str(cfg)]) == 0
    assert {p.name for p in run.glob("*.png")} == {"history.png", "snapshots.png", "entropy.png"}


def test_sweep_writes_table(tmp_path, out):
    text = SMALL.replace("run_id = small", "run_id = sw") + "radii = 0.2\nsweep_key = eps\nsweep_values = 0.05, 0.1, 0.15\n"
    main(["sweep", str(write(tmp_path, text))])
    with open(out / "sw" / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [float(r["eps"]) for r in rows] == [0.05, 0.1, 0.15]
    names = [c["name"] for c in json.loads((out / "sw" / "checks.json").read_text())]
    assert "regularity.B11_probe" in names


def test_verify_homogeneous_and_corrupted_golden(tmp_path, out):
    assert main(["verify", "homogeneous"]) == 0
    report = json.loads((out / "verify-homogeneous" / "report.json").read_text())
    assert report["counts"]["fail"] == 0
    golden = tmp_path / "golden"
    golden.mkdir()
    src = (suites.GOLDEN_DIR / suites.GOLDEN_ENTROPY).read_text().splitlines()
    header, first, *rest = src
    cells = first.split(",")
    cells[2] = repr(float(cells[2]) + 1e-3)
    (golden / suites.GOLDEN_ENTROPY).write_text("\n".join([header, ",".join(cells), *rest]) + "\n")
    assert main(["verify", "homogeneous", "--golden-dir", str(golden)]) == 1
    report = json.loads((out / "verify-homogeneous" / "report.json").read_text())
    bad = [c for c in report["checks"] if c["verdict"] == "fail"]
    assert [c["name"] for c in bad] == ["oracle.golden_entropy"]


def test_golden_table_is_current():
    header, rows = suites.golden_rows()
    with open(suites.GOLDEN_DIR / suites.GOLDEN_ENTROPY) as fh:
        shipped = list(csv.reader(fh))
    assert shipped[0] == header
    for got, ref in zip(rows, shipped[1:]):
        assert [float(v) for v in got[1:]] == pytest.approx([float(v) for v in ref[1:]], abs=1e-10)
