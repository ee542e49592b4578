import json
import shutil

import numpy as np
import pytest

from conftest import DATA
from tracelens import cli
from tracelens.em import AdmixtureModel, match_patterns, pooled_estimate
from tracelens.errors import NumericError
from tracelens.ingest import TraceSet, parse_log


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Small synth -> ingest -> infer run shared by the read-only tests."""
    out = tmp_path_factory.mktemp("pipe")
    assert run("synth", "--out", out, "--users", 40, "--sessions", 6, "--seed", 4) == 0
    assert run("ingest", "--out", out, "--input", out / "synth_log.json") == 0
    assert run("infer", "--out", out, "--K", "1,2", "--max-restarts", 2, "--seed", 4) == 0
    return out


def test_ingest_sample_log(tmp_path):
    assert run("ingest", "--out", tmp_path, "--input", DATA / "sample_log.json", "--cuts", "0:1") == 0
    manifest = json.loads((tmp_path / "traces" / "manifest.json").read_text())
    assert manifest["users"] == 1
    (entry,) = manifest["cuts"]
    assert entry["users"] == 1 and entry["file"] == "cut_0_1.json"
    ts = TraceSet.from_json((tmp_path / "traces" / entry["file"]).read_text())
    assert len(ts.traces[0][1]) == 9


def test_ingest_empty_array(tmp_path):
    log = tmp_path / "empty.json"
    log.write_text("[]")
    assert run("ingest", "--out", tmp_path, "--input", log) == 0
    manifest = json.loads((tmp_path / "traces" / "manifest.json").read_text())
    assert manifest["users"] == 0
    assert all(c["file"] is None for c in manifest["cuts"])
    assert sorted(p.name for p in (tmp_path / "traces").iterdir()) == ["manifest.json"]


def test_ingest_overlapping_cuts(pipeline, tmp_path):
    assert run("ingest", "--out", tmp_path, "--input", pipeline / "synth_log.json",
               "--cuts", "0:30,7:30") == 0
    manifest = json.loads((tmp_path / "traces" / "manifest.json").read_text())
    assert [c["tag"] for c in manifest["cuts"]] == ["0_30", "7_30"]
    big, small = (TraceSet.from_json((tmp_path / "traces" / c["file"]).read_text())
                  for c in manifest["cuts"])
    assert set(small.device_ids) <= set(big.device_ids)


def test_ingest_errors(tmp_path, sample_text):
    bad = tmp_path / "bad.json"
    bad.write_text(sample_text.replace('"TopApps"', '"Bogus"'))
    assert run("ingest", "--out", tmp_path, "--input", bad) == 2
    assert run("ingest", "--out", tmp_path, "--input", tmp_path / "missing.json") == 2
    assert run("ingest", "--out", tmp_path, "--input", DATA / "sample_log.json", "--cuts", "5:1") == 2


def test_synth_log_round_trips(pipeline, vocab):
    text = (pipeline / "synth_log.json").read_text()
    records = parse_log(text, vocab)
    assert len(records) == 40
    from tracelens.ingest import serialize_log
    assert parse_log(serialize_log(records, vocab), vocab) == records


def test_infer_outputs_and_determinism(pipeline, tmp_path):
    shutil.copytree(pipeline / "traces", tmp_path / "traces")
    assert run("infer", "--out", tmp_path, "--K", 2, "--max-restarts", 2, "--seed", 4) == 0
    for tag in ("0_1", "60_90"):
        a = (pipeline / "models" / f"cut_{tag}" / "K2" / "model.txt").read_bytes()
        b = (tmp_path / "models" / f"cut_{tag}" / "K2" / "model.txt").read_bytes()
        assert a == b
    kdir = pipeline / "models" / "cut_0_30" / "K2"
    assert {"model.txt", "loglik.csv", "summary.json", "AP1.pm", "AP2.pm"} <= {p.name for p in kdir.iterdir()}
    assert (kdir / "loglik.csv").read_text().startswith("restart,iteration,loglik\n")


def test_infer_k1_is_pooled(pipeline):
    model = AdmixtureModel.from_text((pipeline / "models" / "cut_0_30" / "K1" / "model.txt").read_text())
    ts = TraceSet.from_json((pipeline / "traces" / "cut_0_30.json").read_text())
    assert np.max(np.abs(model.phis[0] - pooled_estimate(ts))) <= 1e-12


def test_check_default_table(pipeline, tmp_path):
    assert run("check", "--out", tmp_path, "--input", pipeline / "models", "--K", 2) == 0
    wide = (tmp_path / "results" / "table_K2.csv").read_bytes().decode().split("\r\n")
    header = wide[0].split(",")
    assert header[:2] == ["property", "cut"] and len(header) == 2 + 5 * 2
    assert len(wide) == 1 + 3 * 6 + 1
    cut_csv = (tmp_path / "results" / "cut_0_1_K2.csv").read_bytes().decode().split("\r\n")
    assert len(cut_csv) == 1 + 15 + 1
    assert json.loads((tmp_path / "results" / "annotations.json").read_text())["interpretation"]


def test_check_syntax_error_reports_line(pipeline, tmp_path, capsys):
    props = tmp_path / "bad.props"
    props.write_text('prop1("Main", 50)\n# fine\nP=? [ F "Main" U ]\n')
    assert run("check", "--out", tmp_path, "--input", pipeline / "models", "--props", props) == 2
    assert "line 3" in capsys.readouterr().err


def test_check_unknown_label(pipeline, tmp_path):
    assert run("check", "--out", tmp_path, "--input", pipeline / "models",
               "--template", 1, "--label", "Nowhere") == 2


def test_check_sweep(pipeline, tmp_path):
    assert run("check", "--out", tmp_path, "--input", pipeline / "models", "--K", 2,
               "--cuts", "0:30", "--template", 2, "--label", "Stats", "--N-range", "10:150:10") == 0
    (sweep,) = (tmp_path / "results").glob("sweep_*_cut_0_30_K2.csv")
    rows = sweep.read_bytes().decode().split("\r\n")[1:-1]
    assert len(rows) == 15
    values = np.array([[float(x) for x in r.split(",")[1:]] for r in rows])
    assert np.all(np.diff(values, axis=0) >= 0)


def test_numeric_failure_exit_code(pipeline, tmp_path, monkeypatch):
    def boom(*_a, **_k):
        raise NumericError("log-likelihood became NaN during EM")
    monkeypatch.setattr(cli, "infer", boom)
    shutil.copytree(pipeline / "traces", tmp_path / "traces")
    assert run("infer", "--out", tmp_path, "--K", 2) == 3


def test_nan_model_file_rejected(pipeline, tmp_path):
    shutil.copytree(pipeline / "models", tmp_path / "models")
    path = tmp_path / "models" / "cut_0_1" / "K2" / "model.txt"
    lines = path.read_text().splitlines()
    lines[-1] = "\t".join(["nan"] * 15)
    path.write_text("\n".join(lines) + "\n")
    assert run("check", "--out", tmp_path, "--cuts", "0:1", "--K", 2) == 2


def test_report_index(pipeline, tmp_path):
    shutil.copytree(pipeline / "models", tmp_path / "models")
    assert run("report", "--out", tmp_path, "--K", 2) == 0
    index = json.loads((tmp_path / "report" / "index.json").read_text())
    names = set(index["artifacts"])
    assert "report/theta_cut_0_1_K2.csv" in names
    assert "report/graph_cut_0_1_K2_AP2.dot" in names
    on_disk = {str(p.relative_to(tmp_path)) for p in tmp_path.rglob("*") if p.is_file()}
    assert names == on_disk - {"report/index.json"}


def test_end_to_end_recovery(tmp_path):
    out = tmp_path
    assert run("synth", "--out", out, "--truth", "separated", "--users", 300, "--sessions", 30,
               "--seed", 3) == 0
    assert run("ingest", "--out", out, "--input", out / "synth_log.json", "--cuts", "0:inf") == 0
    # default caps stop EM on a flat ridge before it reaches the vertices; see README
    assert run("infer", "--out", out, "--K", 2, "--max-restarts", 2, "--max-iters", 1000,
               "--tol", "1e-9") == 0
    truth = AdmixtureModel.from_text((out / "ground_truth.model").read_text())
    model = AdmixtureModel.from_text((out / "models" / "cut_0_inf" / "K2" / "model.txt").read_text())
    _, dist = match_patterns(model, truth)
    assert np.all(dist <= 0.05)
