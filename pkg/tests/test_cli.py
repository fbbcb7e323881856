import json

import pytest
import yaml

from phefl import metrics
from phefl.archive import ArchiveWriter, read_archive
from phefl.cli import main
from phefl.config import config_from_dict
from phefl.orchestrator import RoundRecord

SMALL = {"schema_version": 1, "scenario": "D1", "strategy": "phe_fl", "rounds": 3, "epochs": 1,
         "samples_per_device": 8, "synthetic_test_per_label": 10, "hidden_dims": [8], "seed": 3}


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(SMALL))
    return path


@pytest.fixture
def env(monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")


def run(config_path, out, *extra):
    return main(["run", "--config", str(config_path), "--out", str(out), "--workers", "1", *extra])


@pytest.fixture
def three_archives(tmp_path, config_path, env):
    paths = []
    for strategy in ("edge_cloud", "only_edge", "phe_fl"):
        out = tmp_path / f"{strategy}.jsonl"
        assert run(config_path, out, "--strategy", strategy) == 0
        paths.append(str(out))
    return paths


class TestRun:
    def test_three_rounds(self, tmp_path, config_path, env, capsys):
        out = tmp_path / "a.jsonl"
        assert run(config_path, out) == 0
        archive = read_archive(out)
        assert len(archive.log) == 3 and archive.complete
        assert capsys.readouterr().out.count("mean_accuracy") == 3

    def test_override_wins(self, tmp_path, config_path, env):
        out = tmp_path / "a.jsonl"
        run(config_path, out, "--strategy", "only_edge", "--rounds", "2")
        meta = json.loads(out.read_text().splitlines()[0])
        assert meta["config"]["strategy"] == "only_edge"
        assert meta["config"]["rounds"] == 2

    def test_rerun_byte_identical(self, tmp_path, config_path, env):
        run(config_path, tmp_path / "a.jsonl")
        run(config_path, tmp_path / "b.jsonl")
        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()

    def test_default_out(self, tmp_path, config_path, env, monkeypatch):
        monkeypatch.chdir(tmp_path)
        assert main(["run", "--config", str(config_path), "--workers", "1", "--rounds", "1"]) == 0
        assert (tmp_path / "results" / "D1_imbalanced_phe_fl_seed3.jsonl").exists()

    def test_unknown_key_exit(self, tmp_path, capsys):
        path = tmp_path / "bad.yaml"
        path.write_text(yaml.safe_dump({**SMALL, "bogus": 1}))
        assert main(["run", "--config", str(path), "--out", str(tmp_path / "x")]) == 2
        assert "bogus: unknown key" in capsys.readouterr().err

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_marks_incomplete(self, tmp_path, env, capsys):
        path = tmp_path / "hot.yaml"
        path.write_text(yaml.safe_dump({**SMALL, "lr": 1e308}))
        out = tmp_path / "a.jsonl"
        assert main(["run", "--config", str(path), "--out", str(out), "--workers", "1"]) == 3
        assert not read_archive(out).complete
        end = json.loads(out.read_text().splitlines()[-1])
        assert end["complete"] is False and "TrainingDivergence" in end["error"]


class TestCompare:
    def test_table(self, three_archives, tmp_path, capsys):
        report = tmp_path / "r.json"
        capsys.readouterr()
        assert main(["compare", *three_archives, "--m", "0", "--json", str(report)]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert "Acc3" in lines[0] and "Drop0" in lines[0]
        assert len(lines) == 2 + 3
        rows = json.loads(report.read_text())["rows"]
        for row, path in zip(rows, three_archives):
            assert row["acc_n"] == metrics.acc_n(read_archive(path).series, 3)

    def test_unmeasurable_dash(self, tmp_path, capsys):
        cfg = config_from_dict(SMALL)
        path = tmp_path / "low.jsonl"
        with ArchiveWriter(path, cfg) as w:
            for t, acc in enumerate([0.2, 0.5, 0.4], start=1):
                w.append(RoundRecord(t, (acc,) * 10))
        assert main(["compare", str(path), "--m", "90"]) == 0
        row = capsys.readouterr().out.splitlines()[2].split()
        assert row[3] == "50.00" and row[4] == "-"

    def test_n_too_large(self, three_archives, capsys):
        assert main(["compare", *three_archives, "--n", "99"]) == 2


class TestPartitionReport:
    def report(self, tmp_path, scenario, mode="imbalanced"):
        path = tmp_path / "cfg.yaml"
        path.write_text(yaml.safe_dump({**SMALL, "scenario": scenario, "test_mode": mode}))
        out = tmp_path / f"{scenario}.json"
        assert main(["partition-report", "--config", str(path), "--json", str(out)]) == 0
        return json.loads(out.read_text())

    def test_d1_diagonal(self, tmp_path):
        rep = self.report(tmp_path, "D1")
        for e, row in enumerate(rep["ttd_percent"]):
            assert row == ["100" if c == e else "0" for c in range(10)]

    @pytest.mark.parametrize("scenario", ["D1", "D2", "D3", "D4"])
    def test_rows_sum_to_100(self, tmp_path, scenario):
        rep = self.report(tmp_path, scenario)
        for key in ("train_percent", "ttd_percent"):
            for row in rep[key]:
                assert sum(float(v) for v in row) == pytest.approx(100.0)

    def test_split_sizes(self, tmp_path):
        rep = self.report(tmp_path, "D3", "balanced")
        assert rep["ttd_sizes"] == [80] * 10
        assert rep["ptd_sizes"] == [12] * 10 and rep["etd_sizes"] == [68] * 10


class TestPlotData:
    def test_columns(self, three_archives, capsys):
        capsys.readouterr()
        assert main(["plot-data", *three_archives, "--window", "2"]) == 0
        lines = capsys.readouterr().out.splitlines()
        header = lines[0].split("\t")
        assert len(header) == 1 + 2 * 3
        rows = [line.split("\t") for line in lines[1:]]
        assert [int(r[0]) for r in rows] == [1, 2, 3]
        for j, path in enumerate(three_archives):
            raw = [float(r[1 + 2 * j]) for r in rows]
            assert raw == read_archive(path).series
            assert [float(r[2 + 2 * j]) for r in rows] == metrics.rolling_mean(raw, 2)

    def test_default_window(self):
        from phefl.cli import build_parser
        assert build_parser().parse_args(["plot-data", "x"]).window == 10
