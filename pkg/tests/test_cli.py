import json
import shutil

import pytest

from conftest import CORPUS_DIR
from wrcompiler import __version__
from wrcompiler.cli import main


@pytest.fixture
def worker(tmp_path):
    d = tmp_path / "worker"
    shutil.copytree(CORPUS_DIR / "worker", d)
    return d


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_compile_worker_writes_outputs(worker, capsys):
    assert main(["compile", str(worker / "worker.wl")]) == 0
    listing = (worker / "worker.risc").read_text()
    doc = json.loads((worker / "worker.json").read_text())
    assert "LockAcq workspace_lock" in listing
    assert doc["failed"] is False and doc["format_version"] == 1
    assert len(doc["code"]) == sum(1 for line in listing.splitlines()
                                   if not line.startswith(".exit"))


def test_compile_racy_is_rejected(tmp_path, capsys):
    out_dir = tmp_path / "out"
    assert main(["compile", str(CORPUS_DIR / "racy" / "racy.wl"), "-o", str(out_dir)]) == 1
    assert "stability check failed" in capsys.readouterr().out
    assert not out_dir.exists() or not any(out_dir.iterdir())


def test_compile_missing_policy(tmp_path, capsys):
    src = tmp_path / "lonely.wl"
    src.write_text("skip")
    assert main(["compile", str(src)]) == 2
    assert "policy" in capsys.readouterr().err


def test_compile_parse_error(worker, capsys):
    (worker / "broken.wl").write_text("x := ")
    assert main(["compile", str(worker / "broken.wl")]) == 2


def test_run_listing_with_schedule(worker, capsys):
    main(["compile", str(worker / "worker.wl")])
    capsys.readouterr()
    assert main(["run", str(worker / "worker.risc"), "--schedule", "0,0,0"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [line.split()[:2] for line in lines[:3]] == [["0", "t0"], ["1", "t0"], ["2", "t0"]]
    assert lines[3].startswith("final:") and len(lines) == 4


def test_run_json_trace_has_one_entry_per_step(worker, capsys):
    assert main(["run", str(worker), "--schedule", "0,1,2,0", "--json", "-"]) == 0
    captured = capsys.readouterr()
    doc = json.loads(captured.out)
    assert len(doc["trace"]) == 4 and doc["schedule"] == [0, 1, 2, 0]
    assert "final:" in captured.err


def test_run_seeded_is_reproducible(capsys):
    args = ["run", str(CORPUS_DIR / "cddc"), "--seed", "7", "--steps", "200"]
    assert main(args) == 0
    first = capsys.readouterr().out
    assert main(args) == 0
    assert capsys.readouterr().out == first


@pytest.mark.parametrize("sched", ["0,5", "x"])
def test_run_bad_schedule(worker, capsys, sched):
    assert main(["run", str(worker), "--schedule", sched]) == 2


def test_verify_worker_all(capsys):
    assert main(["verify", str(CORPUS_DIR / "worker"), "--all"]) == 0
    out = capsys.readouterr().out
    assert out.count(": ok") == 8


def test_verify_leaky_hyper_prints_counterexample(tmp_path, capsys):
    dest = tmp_path / "r.json"
    code = main(["verify", str(CORPUS_DIR / "worker-leaky"), "--hyper", "--json", str(dest)])
    assert code == 1
    out = capsys.readouterr().out
    assert "hyper: violated" in out and "schedule:" in out
    doc = json.loads(dest.read_text())
    assert doc["reports"][0]["counterexample"]["schedule"]


def test_verify_unknown_check(capsys):
    assert main(["verify", str(CORPUS_DIR / "worker"), "--checks", "bogus"]) == 2


def test_verify_bad_domain(capsys):
    assert main(["verify", str(CORPUS_DIR / "worker"), "--nohb", "--domain", "x"]) == 2


def test_verify_rejected_entry_is_violated(capsys):
    assert main(["verify", str(CORPUS_DIR / "racy"), "--compile"]) == 1


def test_corpus_command_on_negative_entries(tmp_path, capsys):
    for name in ("racy", "if-lock-mismatch"):
        shutil.copytree(CORPUS_DIR / name, tmp_path / name)
    assert main(["corpus", str(tmp_path)]) == 0
    assert "0 mismatches" in capsys.readouterr().out
