import csv
import io
import json

import pytest

from hpforecast.cli import main, replay_certificates
from hpforecast.config import ExperimentConfig, config_from_dict, load_config, thread_count
from hpforecast.errors import InvalidArgument


def write_config(tmp_path, data):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(data))
    return str(path)


def rows(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


def test_regret_certify_depth2(tmp_path, capsys):
    cfg = write_config(tmp_path, {"partition": {"kind": "quadtree", "levels": 2}, "stream": {"T": 1000}})
    out = tmp_path / "out"
    assert main(["--config", cfg, "--mode", "regret-certify", "--seed", "1", "--out", str(out)]) == 0
    certs = rows(out / "certificates.csv")
    assert len(certs) == 2 and all(r["satisfied"] == "1" for r in certs)
    assert len(rows(out / "stream.csv")) == 1000
    assert "2/2 certificates satisfied" in capsys.readouterr().out


def test_certificate_replay_is_exact(tmp_path):
    cfg = write_config(tmp_path, {"partition": {"kind": "quadtree", "levels": 3}, "stream": {"T": 300}})
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out)]) == 0
    assert replay_certificates(out) == (out / "certificates.csv").read_text()


def test_switching_certify(tmp_path, capsys):
    out = tmp_path / "sw"
    cfg = write_config(tmp_path, {"mode": "switching-certify", "switching": {"m": 3, "T": 6}})
    assert main(["--config", cfg, "--out", str(out)]) == 0
    assert "checked 729 competitor sequences" in capsys.readouterr().out
    [row] = rows(out / "certificates.csv")
    assert row["checked"] == "729" and row["satisfied"] == "1"


@pytest.mark.parametrize("text", ["{not json", json.dumps({"mode": "fly"}), json.dumps({"bogus": 1}),
                                  json.dumps({"learner": {"gamma": -1}}), json.dumps({"seed": -3}),
                                  json.dumps({"partition": {"kind": "quadtree", "levels": 9, "width": 8}})])
def test_malformed_config_exits_2(tmp_path, text):
    path = tmp_path / "bad.json"
    path.write_text(text)
    assert main(["--config", str(path), "--out", str(tmp_path / "o")]) == 2


def test_strict_indexing_flag_reaches_config(tmp_path):
    out = tmp_path / "o"
    cfg = write_config(tmp_path, {"partition": {"kind": "single"}, "stream": {"T": 50}})
    assert main(["--config", cfg, "--out", str(out), "--strict-paper-indexing", "--global-switch-clock"]) == 0
    saved = load_config(out / "config.json")
    assert saved.strict_paper_indexing and saved.global_switch_clock


def test_synth_data_writes_raster(tmp_path):
    out = tmp_path / "syn"
    cfg = write_config(tmp_path, {"mode": "synth-data", "synth": {"width": 128, "height": 128, "frames": 3}})
    assert main(["--config", cfg, "--out", str(out)]) == 0
    from hpforecast.nowcast.rasterio import read_raster
    assert len(read_raster(out / "rasters.bin")) == 3


def test_violation_exit_code(tmp_path, capsys):
    # A declared G below the measured gradient bound is a contract violation.
    out = tmp_path / "v"
    cfg = write_config(tmp_path, {"partition": {"kind": "single"}, "stream": {"T": 100},
                                  "learner": {"G": 0.01}})
    assert main(["--config", cfg, "--out", str(out)]) == 1
    assert "contract violation" in capsys.readouterr().err


def test_config_roundtrip():
    cfg = ExperimentConfig(seed=4)
    assert config_from_dict(json.loads(cfg.dumps())) == cfg


def test_thread_count(monkeypatch):
    monkeypatch.delenv("HPF_THREADS", raising=False)
    assert thread_count() == 1
    monkeypatch.setenv("HPF_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("HPF_THREADS", "zero")
    with pytest.raises(InvalidArgument):
        thread_count()
