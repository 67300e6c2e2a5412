import json

import pytest

from nbreval.cli import main
from nbreval.dataset import load_canonical

SYNTH = ["--users", "40", "--items", "60", "--baskets", "4", "10", "--basket-size", "2", "5"]


@pytest.fixture
def data_dir(tmp_path):
    out = tmp_path / "data"
    assert main(["synth", "--out", str(out), "--seed", "3", *SYNTH]) == 0
    return out


class TestExitCodes:
    def test_unknown_schema_is_config_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["ingest", "--schema", "movielens", "--in", "x", "--out", str(tmp_path)])
        assert exc.value.code == 2

    def test_missing_input_flag(self, tmp_path):
        assert main(["ingest", "--schema", "tafeng", "--out", str(tmp_path)]) == 2

    def test_missing_file_is_io_error(self, tmp_path):
        assert main(["ingest", "--schema", "tafeng", "--in", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]) == 4

    def test_everything_filtered_is_data_error(self, tmp_path):
        raw = tmp_path / "raw.csv"
        raw.write_text("user,basket,time,item\nu,b,1,x\n")
        assert main(["ingest", "--schema", "canonical", "--in", str(raw), "--out", str(tmp_path / "o")]) == 3

    def test_bad_k(self, data_dir, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["run", "--data", str(data_dir), "--k", "0", "--out", str(tmp_path)])
        assert exc.value.code == 2

    def test_bad_config_file(self, data_dir, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text("[1, 2]")
        assert main(["run", "--data", str(data_dir), "--config", str(cfg), "--out", str(tmp_path)]) == 2

    def test_wrong_dataset_predictions(self, data_dir, tmp_path):
        other = tmp_path / "other"
        assert main(["synth", "--out", str(other), "--seed", "4", *SYNTH, "--name", "other"]) == 0
        assert main(["run", "--data", str(other), "--method", "p-topfreq", "--out", str(tmp_path / "r")]) == 0
        pred = tmp_path / "r" / "predictions" / "p-topfreq.jsonl"
        assert main(["eval", "--data", str(data_dir), "--pred", str(pred), "--out", str(tmp_path / "e")]) == 3


class TestPipeline:
    def test_end_to_end(self, data_dir, tmp_path, capsys):
        out = tmp_path / "run"
        assert main(["run", "--data", str(data_dir), "--method", "all", "--k", "5,10", "--out", str(out)]) == 0
        preds = sorted((out / "predictions").glob("*.jsonl"))
        assert [p.stem for p in preds] == ["g-topfreq", "gp-topfreq", "p-topfreq", "tifuknn", "upcf"]
        assert main(["eval", "--data", str(data_dir), "--pred", *map(str, preds), "--k", "5,10", "--out", str(out)]) == 0
        report = json.loads((out / "reports" / "p-topfreq.json").read_text())
        assert [r["k"] for r in report["reports"]] == [5, 10]
        assert report["reports"][0]["recall_expl"] == 0.0
        assert (out / "reports" / "upcf.csv").read_text().startswith("method,dataset,K")
        reports = sorted((out / "reports").glob("*.json"))
        args = ["analyze", "--data", str(data_dir), "--pred", *map(str, preds), "--report", *map(str, reports), "--k", "5,10", "--out", str(out)]
        assert main(args) == 0
        analysis = out / "analysis"
        for name in ("comparison.csv", "comparison.txt", "components.json", "contributions.json", "plot_components_k5.json", "plot_contributions_k10.json"):
            assert (analysis / name).exists()
        assert "*" in capsys.readouterr().out

    def test_grid_selection(self, data_dir, tmp_path):
        out = tmp_path / "g"
        assert main(["run", "--data", str(data_dir), "--method", "upcf", "--grid", "small", "--k", "5", "--out", str(out)]) == 0
        sel = json.loads((out / "predictions" / "upcf.selection.json").read_text())
        assert len(sel["grid"]) == 6
        best = max(range(6), key=lambda i: (sel["grid"][i]["val_recall"], -i))
        assert sel["best"] == best
        chosen = (out / "predictions" / sel["grid"][best]["file"]).read_text()
        assert chosen == (out / "predictions" / "upcf.jsonl").read_text()

    def test_first_test_basket_mode(self, data_dir, tmp_path):
        out = tmp_path / "f"
        assert main(["run", "--data", str(data_dir), "--method", "g-topfreq", "--target", "first-test-basket", "--out", str(out)]) == 0
        pred = out / "predictions" / "g-topfreq.jsonl"
        assert main(["eval", "--data", str(data_dir), "--pred", str(pred), "--target", "first-test-basket", "--out", str(out)]) == 0
        assert json.loads((out / "reports" / "g-topfreq.json").read_text())["reports"][0]["n"] == 40

    def test_canonical_ingest(self, tmp_path):
        rows = ["user,basket,time,item"]
        for u in range(5):
            for b in range(6):
                rows += [f"u{u},{u}-{b},{b},x{(b + u) % 4}", f"u{u},{u}-{b},{b},y{b % 3}"]
        raw = tmp_path / "raw.csv"
        raw.write_text("\n".join(rows) + "\n")
        out = tmp_path / "ds"
        assert main(["ingest", "--schema", "canonical", "--in", str(raw), "--name", "mini", "--coverage", "1.0", "--out", str(out)]) == 0
        bundle = load_canonical(out)
        assert bundle.name == "mini" and len(bundle.users) == 5


class TestConfig:
    def test_precedence(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"users": 30, "items": 50, "seed": 1, "synth": {"repeat_prob": 0.9, "n_items": 80}}))
        out = tmp_path / "o"
        assert main(["synth", "--config", str(cfg), "--items", "70", "--out", str(out)]) == 0
        echoed = json.loads((out / "config.synth.json").read_text())
        assert echoed["items"] == 70 and echoed["users"] == 30
        bundle = load_canonical(out)
        assert len(bundle.users) == 30 and len(bundle.vocabulary) == 70

    def test_data_root_env(self, data_dir, tmp_path, monkeypatch):
        monkeypatch.setenv("NBREVAL_DATA_ROOT", str(data_dir.parent))
        assert main(["run", "--data", data_dir.name, "--method", "g-topfreq", "--out", str(tmp_path / "x")]) == 0

    def test_no_temp_files_left(self, data_dir, tmp_path):
        out = tmp_path / "t"
        assert main(["run", "--data", str(data_dir), "--method", "p-topfreq", "--out", str(out)]) == 0
        leftovers = [p for p in out.rglob("*") if p.name.startswith(".") or p.suffix == ".tmp"]
        assert leftovers == []
