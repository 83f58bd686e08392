"""CLI behaviour through the embedded service path."""

import json

import pytest
from click.testing import CliRunner

from socialdht.cli import main
from socialdht.graph import write_edge_list
from socialdht.metrics import read_csv
from socialdht.overlay import build_ring, save_checkpoint

from conftest import random_graph

ALL_COMMANDS = ("serve", "datasets", "fetch", "embed", "orderings",
                "schemes", "relabel", "metrics")


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def workspace(tmp_path):
    g = random_graph(60, 6.0, seed=17)
    dataset = tmp_path / "toy.txt"
    write_edge_list(g, dataset)
    return {"graph": g, "dataset": dataset, "tmp": tmp_path,
            "state": tmp_path / "state", "data": tmp_path / "data",
            "out": tmp_path / "out"}


def service_args(ws):
    return ["--state-dir", str(ws["state"]), "--data-dir", str(ws["data"]),
            "--poll-interval", "0.05"]


def embed_args(ws, *extra):
    return ["embed", str(ws["dataset"]), "--replicates", "1",
            "--metrics-every", "5", "--latency-sample-cap", "0",
            "--seed", "3", "--outdir", str(ws["out"]),
            *extra, *service_args(ws)]


class TestHelp:
    def test_top_level_lists_commands(self, runner):
        result = runner.invoke(main, ["--help"])
        assert result.exit_code == 0
        for cmd in ALL_COMMANDS:
            assert cmd in result.output

    @pytest.mark.parametrize("cmd", ALL_COMMANDS)
    def test_subcommand_help(self, runner, cmd):
        result = runner.invoke(main, [cmd, "--help"])
        assert result.exit_code == 0

    def test_version(self, runner):
        result = runner.invoke(main, ["--version"])
        assert result.exit_code == 0
        assert "version" in result.output


class TestDatasets:
    def test_listing_json(self, runner, workspace):
        result = runner.invoke(main, ["datasets", *service_args(workspace)])
        assert result.exit_code == 0, result.output
        rows = json.loads(result.stdout)
        assert {r["name"] for r in rows} == {"fb", "wv", "sd", "tw"}

    def test_fetch_unknown_fails(self, runner, workspace):
        result = runner.invoke(main, ["fetch", "mystery",
                                      *service_args(workspace)])
        assert result.exit_code != 0
        assert "404" in result.stderr

    def test_fetch_local_source(self, runner, workspace, monkeypatch):
        import gzip
        from socialdht import datasets
        src = workspace["tmp"] / "src.txt.gz"
        src.write_bytes(gzip.compress(b"0 1\n1 2\n"))
        monkeypatch.setitem(datasets.MANIFEST, "toy", datasets.DatasetInfo(
            name="toy", url=src.as_uri(), filename="toy-fetched.txt",
            directed=False, nodes=3, listed_edges=2))
        result = runner.invoke(main, ["fetch", "toy", *service_args(workspace)])
        assert result.exit_code == 0, result.output
        statuses = json.loads(result.stdout)
        assert statuses[0]["present"] is True
        assert (workspace["data"] / "toy-fetched.txt").exists()


class TestEmbed:
    def test_runs_and_downloads(self, runner, workspace):
        result = runner.invoke(main, embed_args(workspace,
                                                "--iterations", "10"))
        assert result.exit_code == 0, result.output
        summary = json.loads(result.stdout)
        assert summary["seeds"] == [3]
        assert summary["config"]["iterations"] == 10
        assert "submitted embed job" in result.stderr

        files = sorted(p.name for p in workspace["out"].iterdir())
        tag = summary["tag"]
        assert files == [f"{tag}_seed3.csv", f"{tag}_seed3.ring",
                         f"{tag}_summary.json"]
        reports = read_csv(workspace["out"] / f"{tag}_seed3.csv")
        assert reports[-1].iteration == 10

    def test_seeds_list(self, runner, workspace):
        result = runner.invoke(main, embed_args(workspace, "--iterations", "5",
                                                "--seeds", "4, 7"))
        assert result.exit_code == 0, result.output
        assert json.loads(result.stdout)["seeds"] == [4, 7]

    def test_bad_seeds_rejected(self, runner, workspace):
        result = runner.invoke(main, embed_args(workspace, "--seeds", "a,b"))
        assert result.exit_code != 0
        assert "comma-separated integer list" in result.stderr

    def test_no_checkpoints(self, runner, workspace):
        result = runner.invoke(main, embed_args(workspace, "--iterations", "5",
                                                "--no-checkpoints"))
        assert result.exit_code == 0, result.output
        assert not any(p.suffix == ".ring" for p in workspace["out"].iterdir())


class TestConfigFile:
    def write_config(self, ws, text):
        cfg = ws["tmp"] / "run.cfg"
        cfg.write_text(text)
        return cfg

    def test_config_supplies_defaults(self, runner, workspace):
        cfg = self.write_config(workspace,
                                "# run shape\niterations = 5\nscheme = random\n")
        result = runner.invoke(main, embed_args(workspace,
                                                "--config", str(cfg)))
        assert result.exit_code == 0, result.output
        summary = json.loads(result.stdout)
        assert summary["config"]["iterations"] == 5
        assert summary["config"]["scheme"] == "random"

    def test_commandline_beats_config(self, runner, workspace):
        cfg = self.write_config(workspace, "iterations = 5\n")
        result = runner.invoke(main, embed_args(workspace, "--config", str(cfg),
                                                "--iterations", "7"))
        assert result.exit_code == 0, result.output
        assert json.loads(result.stdout)["config"]["iterations"] == 7

    def test_unknown_key_rejected(self, runner, workspace):
        cfg = self.write_config(workspace, "warp_speed = 9\n")
        result = runner.invoke(main, embed_args(workspace, "--config", str(cfg)))
        assert result.exit_code != 0
        assert "unknown config key" in result.stderr

    def test_malformed_line_rejected(self, runner, workspace):
        cfg = self.write_config(workspace, "iterations\n")
        result = runner.invoke(main, embed_args(workspace, "--config", str(cfg)))
        assert result.exit_code != 0
        assert "expected key=value" in result.stderr


class TestOtherCommands:
    def test_schemes_subset(self, runner, workspace):
        result = runner.invoke(main, [
            "schemes", str(workspace["dataset"]), "--schemes", "random,greedy",
            "--iterations", "6", "--replicates", "1", "--metrics-every", "3",
            "--latency-sample-cap", "0", "--outdir", str(workspace["out"]),
            *service_args(workspace)])
        assert result.exit_code == 0, result.output
        assert set(json.loads(result.stdout)["schemes"]) == {"random", "greedy"}

    def test_relabel_small(self, runner, workspace):
        result = runner.invoke(main, [
            "relabel", "--n", "120", "--seeds", "0", "--iterations", "3",
            "--metrics-every", "3", "--latency-sample-cap", "0",
            "--outdir", str(workspace["out"]), *service_args(workspace)])
        assert result.exit_code == 0, result.output
        summary = json.loads(result.stdout)
        assert summary["ideal_hops"] == 1.0
        assert (workspace["out"] / "q4_relabel_n120_summary.json").exists()

    def test_metrics_roundtrip(self, runner, workspace):
        n = workspace["graph"].n
        ckpt = workspace["tmp"] / "snap.ring"
        save_checkpoint(ckpt, build_ring(n, 5, seed=9))
        result = runner.invoke(main, [
            "metrics", str(ckpt), "--dataset", str(workspace["dataset"]),
            "--latency-sample-cap", "0", "--outdir", str(workspace["out"]),
            *service_args(workspace)])
        assert result.exit_code == 0, result.output
        body = json.loads(result.stdout)
        assert body["metrics"]["avg_latency"] > 0
        assert "csv" not in body
        assert (workspace["out"] / "metrics.csv").exists()

    def test_metrics_missing_checkpoint(self, runner, workspace):
        result = runner.invoke(main, [
            "metrics", str(workspace["tmp"] / "ghost.ring"),
            "--dataset", str(workspace["dataset"]), *service_args(workspace)])
        assert result.exit_code != 0
        assert "404" in result.stderr
