import hashlib
import json
import os

import numpy as np
import pytest

from fwave.cli import main
from fwave.dataio import load_recording

pytestmark = pytest.mark.filterwarnings("ignore::RuntimeWarning")


def _config(tmp_path, **overrides):
    cfg = {
        "out_dir": str(tmp_path / "out"),
        "seed": 123,
        "synth": {"n_af": 10, "n_sinus": 10},
    }
    cfg.update(overrides)
    tmp_path.mkdir(parents=True, exist_ok=True)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def _sha(path):
    return hashlib.sha256(open(path, "rb").read()).hexdigest()


class TestSynthCommand:
    def test_writes_records_and_manifest(self, tmp_path, capsys):
        out = str(tmp_path / "o")
        rc = main(["synth", "--n-af", "2", "--n-sinus", "1", "--out", out,
                   "--seed", "5"])
        assert rc == 0
        manifest = json.load(open(os.path.join(out, "records", "manifest.json")))
        assert len(manifest["records"]) == 3
        labels = [e["label"] for e in manifest["records"]]
        assert labels.count("AF") == 2 and labels.count("non-AF") == 1
        rec = load_recording(os.path.join(out, "records", manifest["records"][0]["path"]))
        assert rec.duration_s == pytest.approx(60.0)
        truth = json.load(open(os.path.join(out, "records",
                                            manifest["records"][0]["truth"])))
        assert 4.5 <= truth["daf_true"] <= 11.0
        assert "wrote 3 records" in capsys.readouterr().out

    def test_binary_format_flag(self, tmp_path):
        out = str(tmp_path / "o")
        rc = main(["synth", "--n-af", "1", "--n-sinus", "0", "--out", out,
                   "--format", "binary"])
        assert rc == 0
        manifest = json.load(open(os.path.join(out, "records", "manifest.json")))
        assert manifest["records"][0]["path"].endswith(".fwk")
        load_recording(os.path.join(out, "records", manifest["records"][0]["path"]))


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("run")
    cfg = _config(tmp)
    rc = main(["run", "--config", cfg])
    assert rc == 0
    return json.load(open(tmp / "config.json"))["out_dir"]


class TestFullRun:
    def test_artifacts_present(self, run_dir):
        for name in ("features.csv", "metrics.json", "report.txt",
                     "daf.csv", "windows.json", "exclusions.json"):
            assert os.path.exists(os.path.join(run_dir, name)), name

    def test_metrics_schema(self, run_dir):
        metrics = json.load(open(os.path.join(run_dir, "metrics.json")))
        for m in ("TS_B", "TS_CE", "TS_SU", "TS_PCA", "vote"):
            assert set(metrics[m]) == {"f1", "auroc", "n_train", "n_test", "seed"}
            assert 0.0 <= metrics[m]["f1"] <= 1.0
            assert 0.0 <= metrics[m]["auroc"] <= 1.0
        assert sorted(metrics["ranking"]) == ["TS_B", "TS_CE", "TS_PCA", "TS_SU"]
        assert len(metrics["voting_set"]) == 3
        assert set(metrics["voting_set"]) <= set(metrics["ranking"])
        for m in ("TS_B", "vote"):
            assert set(metrics["daf_summary"][m]) == {"median", "q1", "q3"}

    def test_every_window_accounted_for(self, run_dir):
        windows = json.load(open(os.path.join(run_dir, "windows.json")))["windows"]
        excl = json.load(open(os.path.join(run_dir, "exclusions.json")))["windows"]
        used = {w["window_id"] for w in windows}
        excluded = {e["window_id"] for e in excl}
        assert not used & excluded
        assert len(used) + len(excluded) == 20

    def test_spectra_dumped(self, run_dir):
        spectra = os.listdir(os.path.join(run_dir, "spectra"))
        assert len(spectra) == 4
        first = open(os.path.join(run_dir, "spectra", sorted(spectra)[0])).readline()
        assert first.strip() == "freq_hz,power"

    def test_report_shape(self, run_dir):
        text = open(os.path.join(run_dir, "report.txt")).read()
        assert "median (Q1-Q3)" in text
        assert "F1" in text and "AUROC" in text
        assert "NOT reproducible" in text
        assert "0.63" in text and "0.60" in text


class TestStagedComposition:
    def test_stages_match_monolithic_run(self, tmp_path):
        cfg_a = _config(tmp_path / "a", seed=77)
        cfg_b = _config(tmp_path / "b", seed=77)
        assert main(["run", "--config", cfg_a]) == 0
        for cmd in ("synth", "extract", "daf", "eval"):
            assert main([cmd, "--config", cfg_b]) == 0
        out_a = json.load(open(cfg_a))["out_dir"]
        out_b = json.load(open(cfg_b))["out_dir"]
        for name in ("features.csv", "metrics.json", "daf.csv", "report.txt"):
            assert _sha(os.path.join(out_a, name)) == _sha(os.path.join(out_b, name)), name


class TestExitCodes:
    def test_config_error_is_2(self, tmp_path):
        cfg = _config(tmp_path, bogus_key=1)
        assert main(["run", "--config", cfg]) == 2

    def test_missing_config_is_2(self):
        assert main(["run"]) == 2

    def test_unreadable_config_is_2(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "missing.json")]) == 2

    def test_voting_set_must_be_subset(self, tmp_path):
        cfg = _config(tmp_path, voting_set=["TS_B", "TS_X", "TS_SU"])
        assert main(["run", "--config", cfg]) == 2

    def test_impossible_threshold_excludes_everything(self, tmp_path, capsys):
        cfg = _config(tmp_path, bsqi_threshold=1.01,
                      synth={"n_af": 3, "n_sinus": 3})
        rc = main(["run", "--config", cfg])
        assert rc == 3
        out_dir = json.load(open(cfg))["out_dir"]
        ledger = json.load(open(os.path.join(out_dir, "exclusions.json")))
        assert len(ledger["windows"]) == 6
        assert all("bsqi" in e["reason"] for e in ledger["windows"])


class TestEvalOnFeatureTable:
    def test_hand_written_features(self, tmp_path, capsys):
        rows = ["window_id,method,daf_hz,label,split"]
        rng = np.random.default_rng(0)
        for i in range(30):
            split = "train" if i < 24 else "test"
            rows.append(f"af{i:02d},vote,{rng.uniform(5.5, 7.5):.4f},AF,{split}")
            rows.append(f"ns{i:02d},vote,{rng.uniform(9, 11):.4f},non-AF,{split}")
        feat = tmp_path / "features.csv"
        feat.write_text("\n".join(rows) + "\n")
        rc = main(["eval", "--features", str(feat), "--out", str(tmp_path / "o"),
                   "--seed", "1"])
        assert rc == 0
        metrics = json.load(open(tmp_path / "o" / "metrics.json"))
        assert metrics["vote"]["auroc"] == pytest.approx(1.0)
        assert metrics["vote"]["f1"] == pytest.approx(1.0)
