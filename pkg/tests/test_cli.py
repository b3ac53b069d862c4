import csv
import json

import numpy as np
import pytest

from advflow.cli import EXIT_CONFIG, EXIT_NONCONVERGENCE, EXIT_OK, main
from advflow.formats import read_pbm_mask

DISK = """\
[experiment]
name = disk
[grid]
extent = -1 1 -1 1
h_ratio = 4
[initial]
kind = disk
radius = 0.8
[flow]
eps = 0.08
total_time = 0.16
[oracle]
kind = constant
"""


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def read_rows(path):
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def test_run_writes_masks_metrics_and_manifest(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", write(tmp_path, DISK), "--out", str(out)]) == EXIT_OK
    masks = sorted(out.glob("mask_*.pbm"))
    # floor(T / eps) / snapshot_every + 1 masks
    assert len(masks) == 0.16 / 0.08 + 1
    assert read_pbm_mask(masks[0]).shape == (100, 100)
    rows = read_rows(out / "metrics.csv")
    assert [r["k"] for r in rows] == ["0", "1", "2"]
    header = [ln for ln in (out / "metrics.csv").read_text().splitlines() if ln.startswith("#")]
    assert len(header) == len(rows[0])
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "done" and len(manifest["config_sha256"]) == 64
    assert "numpy" in manifest["versions"] and manifest["wall_clock_seconds"] > 0
    assert (out / "config.ini").read_text().startswith("[experiment]")
    assert (out / "runlog.csv").exists()


def test_snapshot_every_counts_masks(tmp_path):
    out = tmp_path / "out"
    text = DISK.replace("total_time = 0.16", "total_time = 0.16\nsnapshot_every = 2")
    assert main(["run", "--config", write(tmp_path, text), "--out", str(out)]) == EXIT_OK
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "done"
    assert sorted(p.name for p in out.glob("mask_*.pbm")) == ["mask_00000.pbm", "mask_00002.pbm"]


def test_rerun_is_byte_identical(tmp_path):
    cfg = write(tmp_path, DISK)
    main(["run", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "7"])
    main(["run", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "7"])
    assert (tmp_path / "a" / "metrics.csv").read_bytes() == (tmp_path / "b" / "metrics.csv").read_bytes()
    assert (tmp_path / "a" / "mask_00002.pbm").read_bytes() == (tmp_path / "b" / "mask_00002.pbm").read_bytes()


def test_extinction_marker(tmp_path, capsys):
    text = DISK.replace("radius = 0.8", "radius = 0.2")
    assert main(["run", "--config", write(tmp_path, text), "--out", str(tmp_path / "o")]) == EXIT_OK
    assert "extinct at step" in capsys.readouterr().out
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["status"] == "extinct"


def test_nonconvergence_exit_code(tmp_path, capsys):
    text = DISK + "[solver]\nmax_iters = 0\ntol_gap = 1e-30\ntol_set = 1e-30\n"
    code = main(["run", "--config", write(tmp_path, text), "--out", str(tmp_path / "o")])
    assert code == EXIT_NONCONVERGENCE
    assert "solver failure at step 1" in capsys.readouterr().err


def test_configuration_errors_exit_2(tmp_path, capsys):
    bad = DISK.replace("eps = 0.08\n", "")
    assert main(["run", "--config", write(tmp_path, bad), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "missing required key" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "nope.ini")]) == EXIT_CONFIG
    assert main(["verify", "--suite", "nope"]) == EXIT_CONFIG
    bad_density = DISK + "[density]\nfamily = radial-exp\nparams = -1 0 0\n"
    assert main(["run", "--config", write(tmp_path, bad_density), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_sweep_writes_convergence_table(tmp_path):
    out = tmp_path / "sweep"
    code = main(["sweep", "--config", write(tmp_path, DISK), "--eps-list", "0.16,0.08,0.04", "--out", str(out)])
    assert code == EXIT_OK
    rows = read_rows(out / "convergence.csv")
    assert len(rows) == 3
    assert [float(r["eps"]) for r in rows] == [0.16, 0.08, 0.04]
    assert {r["hausdorff_decreasing"] for r in rows} <= {"0", "1"}
    assert rows[0]["hausdorff_decreasing"] == "1"
    for r in rows[1:]:
        prev = rows[rows.index(r) - 1]
        expect = float(r["hausdorff"]) < float(prev["hausdorff"]) if r["hausdorff"] and prev["hausdorff"] else False
        assert r["hausdorff_decreasing"] == str(int(expect))
    assert (out / "eps_0.04" / "metrics.csv").exists()


def test_sweep_rejects_incomplete_template(tmp_path):
    bad = DISK.replace("total_time = 0.16\n", "")
    assert main(["sweep", "--config", write(tmp_path, bad), "--eps-list", "0.08"]) == EXIT_CONFIG


def test_verify_reports_json(tmp_path):
    report = tmp_path / "coarea.json"
    assert main(["verify", "--suite", "coarea", "--budget", "0.1", "--out", str(report)]) == EXIT_OK
    data = json.loads(report.read_text())
    assert data["suite"] == "coarea" and data["passed"]
    check = data["checks"][0]
    assert check["measured"] <= check["tolerance"] == 1e-10


@pytest.mark.parametrize("suite", ["selection", "submodularity"])
def test_verify_small_suites_pass(suite):
    assert main(["verify", "--suite", suite, "--budget", "0.05"]) == EXIT_OK


def test_threads_flag(tmp_path):
    assert main(["--threads", "1", "verify", "--suite", "coarea", "--budget", "0.05"]) == EXIT_OK


def test_mask_initial_region(tmp_path):
    from advflow import build_grid
    from advflow.analysis import disk_region
    from advflow.formats import write_pbm

    g = build_grid(((-1, 1), (-1, 1)), 0.02)
    write_pbm(disk_region(g, 0.8), tmp_path / "a0.pbm")
    text = DISK.replace("kind = disk\nradius = 0.8", f"kind = mask\npath = {tmp_path / 'a0.pbm'}").replace(
        "[oracle]\nkind = constant\n", "")
    out = tmp_path / "m"
    assert main(["run", "--config", write(tmp_path, text), "--out", str(out)]) == EXIT_OK
    m0 = read_pbm_mask(out / "mask_00000.pbm")
    assert np.array_equal(m0, disk_region(g, 0.8).mask)
