import json

import pytest

from conftest import separable_corpus
from estatewatch.cli import main
from estatewatch.ingestion import save_corpus
from estatewatch.types import topic_name


@pytest.fixture(autouse=True)
def pseudonym_key(monkeypatch):
    monkeypatch.setenv("PSEUDONYM_KEY", "ab" * 16)


def write_raw_posts(path, n=5, text="infraword1 infraword2 lift issue"):
    with open(path, "w") as fh:
        for i in range(n):
            fh.write(
                json.dumps(
                    {
                        "id": f"c{i:03d}",
                        "user": f"user{i}",
                        "text": text,
                        "created_at": f"2024-03-01T08:00:{i:02d}Z",
                    }
                )
                + "\n"
            )


class TestIngest:
    def test_writes_normalized_corpus(self, tmp_path, capsys):
        raw = tmp_path / "raw.ndjson"
        out = tmp_path / "corpus.ndjson"
        write_raw_posts(raw)
        assert main(["ingest", "--input", str(raw), "--out", str(out)]) == 0
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 5
        assert "user0" not in out.read_text()
        assert "skipped 0" in capsys.readouterr().err

    def test_stdout_when_no_out(self, tmp_path, capsys):
        raw = tmp_path / "raw.ndjson"
        write_raw_posts(raw, n=2)
        assert main(["ingest", "--input", str(raw)]) == 0
        stdout = capsys.readouterr().out
        assert len(stdout.strip().splitlines()) == 2

    def test_missing_input_is_io_error(self, tmp_path):
        assert main(["ingest", "--input", str(tmp_path / "nope.ndjson")]) == 2

    def test_missing_key_is_validation_error(self, tmp_path, monkeypatch):
        monkeypatch.delenv("PSEUDONYM_KEY")
        raw = tmp_path / "raw.ndjson"
        write_raw_posts(raw)
        assert main(["ingest", "--input", str(raw)]) == 1


class TestTrainAndPipeline:
    def _write_corpus(self, tmp_path):
        corpus = separable_corpus(posts_per_topic=25, non_estate=100)
        path = tmp_path / "corpus.ndjson"
        save_corpus(corpus, path)
        return corpus, path

    def test_full_flow(self, tmp_path, capsys):
        corpus, corpus_path = self._write_corpus(tmp_path)
        estate_model = tmp_path / "estate.npz"
        topic_model = tmp_path / "topic.npz"
        assert (
            main(
                ["train", "--input", str(corpus_path), "--target", "estate", "--out", str(estate_model)]
            )
            == 0
        )
        assert (
            main(
                ["train", "--input", str(corpus_path), "--target", "topic", "--out", str(topic_model)]
            )
            == 0
        )
        config_path = tmp_path / "pipeline.json"
        config_path.write_text(
            json.dumps(
                {
                    "estate_backend": {"kind": "native", "model_path": "estate.npz"},
                    "topic_backend": {"kind": "native", "model_path": "topic.npz"},
                    "store_path": "store",
                }
            )
        )
        out_path = tmp_path / "events.ndjson"
        capsys.readouterr()
        code = main(
            [
                "pipeline",
                "run",
                "--config",
                str(config_path),
                "--input",
                str(corpus_path),
                "--out",
                str(out_path),
            ]
        )
        assert code == 0
        events = [json.loads(line) for line in out_path.read_text().strip().splitlines()]
        assert len(events) == len(corpus)
        assert "processed 200 events" in capsys.readouterr().err

        # evaluate the pipeline output against gold labels end to end
        gold_topic = tmp_path / "gold_topic.ndjson"
        pred_topic = tmp_path / "pred_topic.ndjson"
        with open(gold_topic, "w") as fh:
            for pid, label in corpus.gold_topic.items():
                fh.write(json.dumps({"post_id": pid, "label": topic_name(label)}) + "\n")
        with open(pred_topic, "w") as fh:
            for event in events:
                if event["topic_label"] is not None:
                    fh.write(
                        json.dumps(
                            {"post_id": event["post"]["post_id"], "label": event["topic_label"]}
                        )
                        + "\n"
                    )
        report_path = tmp_path / "report.csv"
        code = main(
            [
                "evaluate",
                "--gold",
                str(gold_topic),
                "--pred",
                str(pred_topic),
                "--task",
                "topic",
                "--format",
                "csv",
                "--out",
                str(report_path),
            ]
        )
        assert code == 0
        lines = report_path.read_text().splitlines()
        assert lines[0] == "class,accuracy,f1"
        assert lines[-1].startswith("Weighted Avg,")

    def test_degenerate_training_data_exits_1(self, tmp_path):
        corpus = separable_corpus(posts_per_topic=5, non_estate=0)
        all_estate = type(corpus)(
            posts=corpus.posts,
            gold_estate={pid: label for pid, label in corpus.gold_estate.items()},
        )
        path = tmp_path / "corpus.ndjson"
        save_corpus(all_estate, path)
        code = main(
            ["train", "--input", str(path), "--target", "estate", "--out", str(tmp_path / "m.npz")]
        )
        assert code == 1


class TestEvaluateGeo:
    def test_geo_report_from_files(self, tmp_path, capsys):
        gold = tmp_path / "gold.ndjson"
        pred = tmp_path / "pred.ndjson"
        gold.write_text(
            json.dumps({"post_id": "a", "lat": 1.30, "lon": 103.80, "location_id": "p1"})
            + "\n"
            + json.dumps({"post_id": "b", "lat": 1.31, "lon": 103.81, "location_id": "p2"})
            + "\n"
        )
        pred.write_text(
            json.dumps(
                {
                    "post_id": "a",
                    "lat": 1.30,
                    "lon": 103.80,
                    "location_id": "p1",
                    "granularity": "POI",
                    "neighbourhood_id": "n1",
                }
            )
            + "\n"
            + json.dumps({"post_id": "b", "resolved": False})
            + "\n"
        )
        code = main(
            ["evaluate", "--gold", str(gold), "--pred", str(pred), "--task", "geo", "--format", "json"]
        )
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["task"] == "geo"
        assert report["mean_distance_km"] == 0.0
        assert report["resolved_fraction"] == 0.5
        assert report["overall_accuracy"] == 0.5


class TestGeolocateCommand:
    def test_resolves_posts(self, tmp_path, capsys):
        from conftest import make_post, synthetic_gazetteer_files
        from estatewatch.types import Corpus

        gaz_dir, poi_rows, _ = synthetic_gazetteer_files(tmp_path)
        posts = [
            make_post("g0", f"seen at {poi_rows[0][1]}"),
            make_post("g1", "nothing matches here"),
        ]
        corpus_path = tmp_path / "posts.ndjson"
        save_corpus(Corpus.build(posts), corpus_path)
        code = main(
            [
                "geolocate",
                "--gazetteer",
                str(gaz_dir),
                "--input",
                str(corpus_path),
                "--granularity",
                "poi",
            ]
        )
        assert code == 0
        lines = [json.loads(l) for l in capsys.readouterr().out.strip().splitlines()]
        by_id = {obj["post_id"]: obj for obj in lines}
        assert by_id["g0"]["resolved"] is True
        assert by_id["g0"]["location_id"] == poi_rows[0][0]
        assert by_id["g1"]["resolved"] is False

    def test_missing_gazetteer_dir_exits_2(self, tmp_path):
        corpus_path = tmp_path / "posts.ndjson"
        from conftest import make_post
        from estatewatch.types import Corpus

        save_corpus(Corpus.build([make_post("a", "text")]), corpus_path)
        code = main(
            ["geolocate", "--gazetteer", str(tmp_path / "missing"), "--input", str(corpus_path)]
        )
        assert code == 2


class TestServeValidation:
    def test_missing_gazetteer_dir_exits_2(self, tmp_path):
        from estatewatch.linear import LinearModel, save_model

        save_model(LinearModel.zeros(2), tmp_path / "estate.npz")
        save_model(LinearModel.zeros(4), tmp_path / "topic.npz")
        config_path = tmp_path / "svc.json"
        config_path.write_text(
            json.dumps(
                {
                    "listen_address": "127.0.0.1:0",
                    "pipeline": {
                        "estate_backend": {"kind": "native", "model_path": "estate.npz"},
                        "topic_backend": {"kind": "native", "model_path": "topic.npz"},
                        "store_path": "store",
                        "geolocation_mode": "poi",
                        "gazetteer_dir": "no-such-dir",
                    },
                }
            )
        )
        assert main(["serve", "--config", str(config_path)]) == 2

    def test_missing_model_file_exits_2(self, tmp_path):
        config_path = tmp_path / "svc.json"
        config_path.write_text(
            json.dumps(
                {
                    "listen_address": "127.0.0.1:0",
                    "pipeline": {
                        "estate_backend": {"kind": "native", "model_path": "estate.npz"},
                        "topic_backend": {"kind": "native", "model_path": "topic.npz"},
                        "store_path": "store",
                    },
                }
            )
        )
        assert main(["serve", "--config", str(config_path)]) == 2


class TestUsage:
    def test_unknown_subcommand_exits_1(self, capsys):
        assert main(["frobnicate"]) == 1
        assert "usage" in capsys.readouterr().err.lower()

    def test_evaluate_unknown_task_rejected(self, capsys):
        assert main(["evaluate", "--gold", "g", "--pred", "p", "--task", "vibes"]) == 1
