import json
from pathlib import Path

import numpy as np
import pytest

from hesitancy.cli import main
from hesitancy.config import build_config, load_config, parse_config_lines
from hesitancy.corpus import GeoPoint, LocatedTweet
from hesitancy.errors import ConfigError
from hesitancy.pipeline import (
    Manifest,
    all_cells,
    ensure_split,
    run_cell,
    run_ingest,
    run_report,
    select_cells,
)


def write_mini_inputs(root: Path, n_zips=2, tweets_per_zip=6):
    """A tiny hand-built fixture: one metro, deterministic texts."""
    root.mkdir(parents=True, exist_ok=True)
    corpus = root / "corpus.jsonl"
    rows = []
    tid = 0
    for z in range(n_zips):
        lat, lon = 1.0 + z, 1.0
        for i in range(tweets_per_zip):
            tid += 1
            rows.append(
                {
                    "tweet_id": f"t{tid:03d}",
                    "text": f"hello world number {i} #tag{z}",
                    "lat": lat,
                    "lon": lon,
                    "sentiment": 0.1 * z,
                }
            )
    corpus.write_text("\n".join(json.dumps(r, sort_keys=True) for r in rows) + "\n")
    (root / "centroids.csv").write_text(
        "zip,lat,lon\n" + "".join(f"{10001+z:05d},{1.0+z},1.0\n" for z in range(n_zips))
    )
    (root / "features.csv").write_text(
        "zip,zhvi,n_health,n_edu,n_pst\n"
        + "".join(f"{10001+z:05d},{100000*(z+1)},{z+1},{z+2},{z+3}\n" for z in range(n_zips))
    )
    (root / "gt.csv").write_text(
        "zip,hesitancy\n" + "".join(f"{10001+z:05d},{0.2+0.3*z}\n" for z in range(n_zips))
    )
    (root / "vectors.txt").write_text(
        "3 4\nhello 1 0 0 1\nworld 0 1 0 1\nnumber 0 0 1 1\n"
    )
    cfg = root / "run.cfg"
    cfg.write_text(
        f"paths.corpus = {corpus}\n"
        f"paths.centroids = {root/'centroids.csv'}\n"
        f"paths.zip_features = {root/'features.csv'}\n"
        f"paths.ground_truth = {root/'gt.csv'}\n"
        f"paths.vectors = {root/'vectors.txt'}\n"
        f"paths.out = {root/'out'}\n"
        "box.alpha = 0.0,10.0,0.0,10.0\n"
        "embed.dim = 4\n"
        "corpus.min_tweets = 2\n"
    )
    return cfg


class TestConfig:
    def test_parse_and_types(self, tmp_path):
        cfg_path = write_mini_inputs(tmp_path / "in")
        cfg = load_config(cfg_path)
        assert cfg.min_tweets == 2
        assert cfg.embed_dim == 4
        assert [b.metro for b in cfg.boxes] == ["alpha"]

    def test_overrides_applied(self, tmp_path):
        cfg_path = write_mini_inputs(tmp_path / "in")
        cfg = load_config(cfg_path, {"corpus.min_tweets": "5", "models.clamp": "true"})
        assert cfg.min_tweets == 5
        assert cfg.clamp_predictions is True

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown config key"):
            build_config({"corpus.bogus": "1"})

    def test_bad_value_rejected(self):
        with pytest.raises(ConfigError):
            build_config({"corpus.min_tweets": "many"})

    def test_bad_box_rejected(self):
        with pytest.raises(ConfigError):
            build_config({"box.m": "1,2,3"})

    def test_comments_and_blanks_ignored(self):
        raw = parse_config_lines(["# comment", "", "corpus.min_tweets = 3  # todo"])
        assert raw == {"corpus.min_tweets": "3"}

    def test_missing_path_is_fatal(self, tmp_path):
        cfg_path = write_mini_inputs(tmp_path / "in")
        cfg = load_config(cfg_path, {"paths.corpus": str(tmp_path / "nope.jsonl")})
        with pytest.raises(ConfigError, match="does not exist"):
            run_ingest(cfg, Manifest(cfg, "ingest"))


class TestIngestStage:
    def test_counts_and_stats(self, tmp_path):
        cfg = load_config(write_mini_inputs(tmp_path / "in"))
        result = run_ingest(cfg, Manifest(cfg, "ingest"))
        assert result.counts["final"] == 12
        stats = (Path(cfg.out_dir) / "stats.csv").read_text().splitlines()
        assert stats[1].startswith("alpha,2,12,6.000")

    def test_min_tweet_rule_drops_zip_from_stats(self, tmp_path):
        cfg = load_config(
            write_mini_inputs(tmp_path / "in"), {"corpus.min_tweets": "7"}
        )
        result = run_ingest(cfg, Manifest(cfg, "ingest"))
        assert result.counts["final"] == 0

    def test_rerun_identical_artifacts(self, tmp_path):
        cfg = load_config(write_mini_inputs(tmp_path / "in"))
        run_ingest(cfg, Manifest(cfg, "ingest"))
        first = (Path(cfg.out_dir) / "corpus.jsonl").read_bytes()
        first_stats = (Path(cfg.out_dir) / "stats.csv").read_bytes()
        run_ingest(cfg, Manifest(cfg, "ingest"))
        assert (Path(cfg.out_dir) / "corpus.jsonl").read_bytes() == first
        assert (Path(cfg.out_dir) / "stats.csv").read_bytes() == first_stats


class TestCells:
    def test_matrix_shape(self):
        cells = all_cells()
        assert len(cells) == 32
        ids = [c.cell_id for c in cells]
        assert len(set(ids)) == 32
        assert sum(1 for c in cells if c.representation == "zip_only") == 2

    def test_selection(self):
        chosen = select_cells("text_only|ols|zip|nosent")
        assert len(chosen) == 1
        with pytest.raises(ConfigError, match="unknown matrix cell"):
            select_cells("text_only|bogus|zip|nosent")


class TestSplitStage:
    def test_split_artifact_reused(self, tmp_path):
        cfg = load_config(write_mini_inputs(tmp_path / "in"))
        manifest = Manifest(cfg, "split")
        ids = [f"t{i:03d}" for i in range(1, 13)]
        zips = ["10001"] * 6 + ["10002"] * 6
        Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
        a = ensure_split(cfg, ids, zips, manifest)
        b = ensure_split(cfg, ids, zips, manifest)
        assert np.array_equal(a.train_idx, b.train_idx)
        data = json.loads((Path(cfg.out_dir) / "split.json").read_text())
        assert set(data["train_ids"]) | set(data["test_ids"]) == set(ids)

    def test_stale_split_rejected(self, tmp_path):
        cfg = load_config(write_mini_inputs(tmp_path / "in"))
        manifest = Manifest(cfg, "split")
        Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
        ensure_split(cfg, ["a", "b", "c", "d"], ["10001"] * 4, manifest)
        with pytest.raises(ConfigError, match="split.json"):
            ensure_split(cfg, ["a", "b", "c", "e"], ["10001"] * 4, manifest)


class TestMatrixViaCli:
    def test_single_cell_selection_and_reports(self, mini_paths):
        code = main(
            [
                "matrix",
                "-c", mini_paths["config"],
                "--set", "matrix.cells=text_only|ols|zip|nosent",
            ]
        )
        assert code == 0
        out = Path(mini_paths["out"])
        matrix = json.loads((out / "matrix.json").read_text())
        assert len(matrix["cells"]) == 1
        assert len(matrix["baselines"]) == 6
        manifest = json.loads((out / "manifest.json").read_text())
        assert "text_only|ols|zip|nosent" in manifest["cells"]
        preds = json.loads((out / "predictions.json").read_text())
        assert set(preds["cells"]) == {"text_only|ols|nosent".replace("|nosent", "|zip|nosent")}

    def test_report_after_matrix(self, mini_paths):
        code = main(["report", "-c", mini_paths["config"]])
        assert code == 0
        out = Path(mini_paths["out"])
        report = (out / "report.csv").read_text().splitlines()
        assert report[0].startswith("metro,")
        assert report[-1].startswith("total,")

    def test_report_unknown_cell_is_fatal(self, mini_paths):
        code = main(
            ["report", "-c", mini_paths["config"], "--set", "report.cell=nope|x|y|z"]
        )
        assert code == 1

    def test_bad_config_exit_code(self, tmp_path):
        missing = tmp_path / "missing.cfg"
        assert main(["ingest", "-c", str(missing)]) == 1

    def test_train_writes_model(self, mini_paths):
        code = main(
            ["train", "-c", mini_paths["config"], "--cell", "zip_only|svr_rbf|zip|nosent"]
        )
        assert code == 0
        out = Path(mini_paths["out"]) / "models"
        assert (out / "zip_only__svr_rbf__zip__nosent.json").exists()
        assert (out / "zip_only__svr_rbf__zip__nosent.metrics.json").exists()


class TestPartialFailureIsolation:
    def test_one_bad_cell_does_not_stop_others(self, tmp_path, monkeypatch):
        cfg = load_config(write_mini_inputs(tmp_path / "in"))
        import hesitancy.pipeline as pl

        real_fit = pl.fit

        def flaky_fit(spec, X, y, layout=None):
            if spec.family.value == "sgd":
                raise RuntimeError("boom")
            return real_fit(spec, X, y, layout=layout)

        monkeypatch.setattr(pl, "fit", flaky_fit)
        monkeypatch.setattr(cfg, "matrix_cells", "text_only|sgd|zip|nosent,text_only|ols|zip|nosent")
        code = pl.run_matrix(cfg, Manifest(cfg, "matrix"))
        assert code == 2
        matrix = json.loads((Path(cfg.out_dir) / "matrix.json").read_text())
        by_id = {c["cell_id"]: c for c in matrix["cells"]}
        assert by_id["text_only|sgd|zip|nosent"]["status"] == "failed"
        assert "boom" in by_id["text_only|sgd|zip|nosent"]["error"]
        assert by_id["text_only|ols|zip|nosent"]["status"] == "ok"


class TestErrorReportShapes:
    def test_perfect_predictions_zero_table(self, tmp_path):
        cfg = load_config(write_mini_inputs(tmp_path / "in"))
        run_ingest(cfg, Manifest(cfg, "ingest"))
        out = Path(cfg.out_dir)
        gt = {"10001": 0.2, "10002": 0.5}
        (out / "matrix.json").write_text(
            json.dumps(
                {
                    "cells": [
                        {
                            "cell_id": "c1", "status": "ok", "zip_rmse": 0.0,
                            "tweet_rmse": 0.0, "cv_rmse": 0.0,
                        }
                    ],
                    "baselines": [],
                }
            )
        )
        (out / "predictions.json").write_text(
            json.dumps({"cells": {"c1": gt}})
        )
        analysis, chosen = run_report(cfg, Manifest(cfg, "report"))
        assert chosen == "c1"
        assert analysis.total.n_overestimated == 0
        report = (out / "report.csv").read_text().splitlines()
        assert report[-1] == "total,2,0,0.0000,0,0"
