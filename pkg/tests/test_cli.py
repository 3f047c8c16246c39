import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from tripleagent.cli import main

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def chain(tmp_path):
    d = tmp_path / "chain"
    shutil.copytree(FIXTURES / "chain", d)
    return d / "campaign.json"


def test_run_lists_worked_example(chain, capsys):
    assert main(["run", "--config", str(chain)]) == 0
    out = capsys.readouterr().out
    assert any(line.split()[:4] == ["m0@0", "IOException", "m2", "m1"] for line in out.splitlines())
    outdir = chain.parent / "out"
    assert {p.name for p in outdir.iterdir()} >= {"journal.jsonl", "report.txt", "report.json", "matrix.csv"}
    assert json.loads((outdir / "report.json").read_text())["counts"]["immunized"] == 1


def test_stages_one_by_one(chain, capsys):
    assert main(["detect", "--config", str(chain)]) == 0
    assert capsys.readouterr().out.split() == ["m0", "0", "IOException", "reached=1"]
    assert main(["classify", "--config", str(chain)]) == 0
    assert capsys.readouterr().out.split() == ["m0", "0", "IOException", "immunized"]
    assert main(["discover", "--config", str(chain)]) == 0
    assert capsys.readouterr().out.splitlines() == ["m0 0 IOException -> m0", "m0 0 IOException -> m1"]
    assert main(["assess", "--config", str(chain)]) == 0
    assert "m1 immunized ALTERNATIVE_RESILIENT" in capsys.readouterr().out


def test_report_reads_the_journal_only(chain, capsys):
    assert main(["report", "--config", str(chain)]) == 1
    assert "journal" in capsys.readouterr().err
    main(["run", "--config", str(chain)])
    capsys.readouterr()
    assert main(["report", "--config", str(chain), "--format", "csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "origin,achieved,count"
    assert "immunized,immunized,1" in lines


def test_rerun_is_idempotent(chain, capsys):
    main(["run", "--config", str(chain)])
    first = capsys.readouterr().out
    journal = (chain.parent / "out" / "journal.jsonl").read_text()
    assert main(["run", "--config", str(chain), "-v"]) == 0
    captured = capsys.readouterr()
    assert captured.out == first
    assert "0 new workload execution(s)" in captured.err
    assert (chain.parent / "out" / "journal.jsonl").read_text() == journal


def test_cli_overrides(chain, capsys, tmp_path):
    assert main(["run", "--config", str(chain), "--filter", "zzz", "--out", str(tmp_path / "o"), "--parallel", "2"]) == 0
    assert "total 0" in capsys.readouterr().out
    assert (tmp_path / "o" / "journal.jsonl").exists()


def test_validate_config(chain, tmp_path, capsys):
    assert main(["validate-config", "--config", str(chain)]) == 0
    bad = tmp_path / "bad.json"
    bad.write_text('{"format_version": 1, "target": {"backend": "telepathy"}}')
    assert main(["validate-config", "--config", str(bad)]) == 2
    bad.write_text("{not json")
    assert main(["validate-config", "--config", str(bad)]) == 2
    assert "line 1" in capsys.readouterr().err
    bad.write_text(json.dumps({"format_version": 1, "target": {"backend": "simulator", "program": "nope.json"}}))
    assert main(["validate-config", "--config", str(bad)]) == 2


def test_external_parallel_rejected(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({
        "format_version": 1,
        "target": {"backend": "external", "launch": "true", "health_check": "true", "restart": "true"},
        "parallelism": 2,
    }))
    assert main(["validate-config", "--config", str(cfg)]) == 2


def test_unknown_flag_exits_2(chain):
    with pytest.raises(SystemExit) as err:
        main(["run", "--config", str(chain), "--bogus"])
    assert err.value.code == 2


def test_module_entry_point(chain):
    proc = subprocess.run(
        [sys.executable, "-m", "tripleagent", "run", "--config", str(chain), "--format", "structured"],
        capture_output=True, text=True, timeout=60,
    )
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["matrix"]["f"] == 1
