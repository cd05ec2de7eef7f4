from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from synth import build_archive, build_assets_tree, two_cluster_corpus
from totr.cli import main
from totr.embedding import load_matrix, save_matrix
from totr.jsonl import read_jsonl, write_jsonl
from totr.prompts import RETRIEVAL_INSTRUCTION


@pytest.fixture
def archive(tmp_path: Path) -> dict:
    fixture = build_archive(60)
    posts_path, comments_path = fixture.write(tmp_path)
    return {"fixture": fixture, "posts": posts_path, "comments": comments_path, "tmp": tmp_path}


class TestCurateCommand:
    def test_outputs(self, archive):
        out_dir = archive["tmp"] / "out"
        code = main(
            [
                "curate",
                "--posts", str(archive["posts"]),
                "--comments", str(archive["comments"]),
                "--out", str(out_dir),
            ]
        )
        assert code == 0
        records = list(read_jsonl(out_dir / "records.jsonl"))
        stats = json.loads((out_dir / "stats.json").read_text())
        expected_solved = sum(
            1 for s in archive["fixture"].expected_status.values() if s == "solved"
        )
        assert len(records) == expected_solved
        assert stats["solved"] == expected_solved
        assert stats["total_posts"] == 60
        assert stats["filtered_posts"] <= stats["total_posts"]
        assert (out_dir / "resolutions.jsonl").exists()

    def test_prefer_op_reply_flag_converts_conflicts(self, archive):
        out_a = archive["tmp"] / "a"
        out_b = archive["tmp"] / "b"
        argv = ["curate", "--posts", str(archive["posts"]), "--comments", str(archive["comments"])]
        main(argv + ["--out", str(out_a)])
        main(argv + ["--out", str(out_b), "--prefer", "op-reply"])
        stats_a = json.loads((out_a / "stats.json").read_text())
        stats_b = json.loads((out_b / "stats.json").read_text())
        assert stats_a["conflict"] > 0
        assert stats_b["conflict"] == 0
        assert stats_b["solved"] == stats_a["solved"] + stats_a["conflict"]


class TestAssetsAndEmbed:
    def test_assets_then_embed(self, tmp_path):
        root = tmp_path / "assets"
        build_assets_tree(root, n=6)
        index_path = tmp_path / "assets_index.jsonl"
        assert main(["assets", "--root", str(root), "--out", str(index_path)]) == 0
        rows = list(read_jsonl(index_path))
        assert len(rows) == 6
        assert all(len(r["deduped_scene_indices"]) <= 30 for r in rows)

        store = tmp_path / "vids.t2me"
        code = main(
            ["embed", "--in", str(index_path), "--embedder-url", "stub://24", "--out", str(store)]
        )
        assert code == 0
        matrix = load_matrix(store)
        assert len(matrix) == 6 and matrix.dim == 24

    def test_embed_records_with_instruction_file(self, tmp_path, archive):
        out_dir = archive["tmp"] / "out"
        main(
            ["curate", "--posts", str(archive["posts"]), "--comments", str(archive["comments"]),
             "--out", str(out_dir)]
        )
        instruction = tmp_path / "instruction.txt"
        instruction.write_text(RETRIEVAL_INSTRUCTION, encoding="utf-8")
        plain = tmp_path / "plain.t2me"
        instructed = tmp_path / "instructed.t2me"
        records = str(out_dir / "records.jsonl")
        main(["embed", "--in", records, "--embedder-url", "stub://16", "--out", plain.as_posix()])
        main(
            ["embed", "--in", records, "--embedder-url", "stub://16",
             "--out", instructed.as_posix(), "--instruction-file", str(instruction)]
        )
        a, b = load_matrix(plain), load_matrix(instructed)
        assert a.ids == b.ids
        assert not np.array_equal(a.vectors, b.vectors)  # instruction feeds the embedding

    def test_embed_generated_recalls_for_proxy_eval(self, tmp_path):
        generated = tmp_path / "generated.jsonl"
        write_jsonl(
            generated,
            (
                {"video_id": f"vid{i}", "generated_recall": f"a model-made recall {i}"}
                for i in range(4)
            ),
        )
        store = tmp_path / "gen.t2me"
        code = main(
            ["embed", "--in", str(generated), "--embedder-url", "stub://16",
             "--out", str(store)]
        )
        assert code == 0
        matrix = load_matrix(store)
        assert matrix.ids == [f"vid{i}" for i in range(4)]


class TestMineTrainEval:
    def test_full_training_round_trip(self, tmp_path):
        queries, docs, _ = two_cluster_corpus(n=80, seed=31)
        q_path, d_path = tmp_path / "q.t2me", tmp_path / "d.t2me"
        save_matrix(queries, q_path)
        save_matrix(docs, d_path)

        negatives_path = tmp_path / "negatives.jsonl"
        pairs_path = tmp_path / "pairs.jsonl"
        code = main(
            ["mine", "--corpus", str(d_path), "--pool", "20", "--per-sample", "1",
             "--seed", "7", "--out", str(negatives_path), "--pairs-out", str(pairs_path)]
        )
        assert code == 0
        negatives = list(read_jsonl(negatives_path))
        assert len(negatives) == 80
        assert all(row["id"] not in row["hard_negative_ids"] for row in negatives)

        adapter_path = tmp_path / "adapter.json"
        code = main(
            ["train", "--pairs", str(pairs_path), "--queries", str(q_path),
             "--docs", str(d_path), "--tau", "0.05", "--lr", "0.5", "--batch", "64",
             "--epochs", "20", "--seed", "7", "--out", str(adapter_path)]
        )
        assert code == 0
        adapter_doc = json.loads(adapter_path.read_text())
        assert set(adapter_doc) == {"dim_in", "dim_out", "tau", "seed", "weight"}

        eval_config = tmp_path / "eval.json"
        eval_config.write_text(
            json.dumps(
                {
                    "name": "video_documents",
                    "query_source": str(q_path),
                    "doc_source": str(d_path),
                    "k_values": [1, 10],
                    "adapter": str(adapter_path),
                }
            ),
            encoding="utf-8",
        )
        result_path = tmp_path / "result.json"
        figures_dir = tmp_path / "figs"
        code = main(
            ["eval", "--config", str(eval_config), "--out", str(result_path),
             "--figures-dir", str(figures_dir)]
        )
        assert code == 0
        result = json.loads(result_path.read_text())
        assert result["recall"]["1"] >= 0.9
        assert "/" in result["table"]["@1"]
        figure = figures_dir / "metrics_by_k.png"
        assert figure.is_file()
        assert figure.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


class TestScoreCommand:
    def test_scores_against_gold_records(self, tmp_path, archive):
        out_dir = archive["tmp"] / "out"
        main(
            ["curate", "--posts", str(archive["posts"]), "--comments", str(archive["comments"]),
             "--out", str(out_dir)]
        )
        records = list(read_jsonl(out_dir / "records.jsonl"))[:5]
        pred_path = tmp_path / "generated.jsonl"
        write_jsonl(
            pred_path,
            (
                {"video_id": r["record_id"], "generated_recall": r["recall_text"]}
                for r in records
            ),
        )
        scores_path = tmp_path / "scores.json"
        code = main(
            ["score", "--pred", str(pred_path), "--gold", str(out_dir / "records.jsonl"),
             "--out", str(scores_path)]
        )
        assert code == 0
        scores = json.loads(scores_path.read_text())
        assert scores["n_pairs"] == 5
        assert scores["mean"]["bleu"] == pytest.approx(1.0)
        assert scores["mean"]["rouge_l"] == pytest.approx(1.0)


class TestAnalyzeCommand:
    def test_json_csv_and_figures(self, tmp_path):
        rng = np.random.default_rng(5)
        stats_path = tmp_path / "stats.jsonl"
        rows = []
        for i in range(25):
            rows.append(
                {
                    "content_id": f"c{i}",
                    "search_count": int(rng.integers(1, 50)),
                    "external_views": int(rng.integers(100, 10_000_000)),
                    "response_time_s": float(rng.integers(60, 86_400)),
                    "genre": ["drama", "comedy", "horror"][i % 3],
                    "days_since_release": int(rng.integers(100, 4000)),
                }
            )
        write_jsonl(stats_path, rows)
        out = tmp_path / "analysis.json"
        csv_dir = tmp_path / "csv"
        figures_dir = tmp_path / "figs"
        code = main(
            ["analyze", "--stats", str(stats_path), "--out", str(out),
             "--csv-dir", str(csv_dir), "--figures-dir", str(figures_dir)]
        )
        assert code == 0
        report = json.loads(out.read_text())
        assert set(report["genres"]) == {"drama", "comedy", "horror"}
        assert (csv_dir / "genres.csv").is_file()
        assert (csv_dir / "content_stats.csv").is_file()
        for name in (
            "views_vs_searches.png",
            "response_time_by_genre.png",
            "posts_by_years_since_release.png",
        ):
            assert (figures_dir / name).read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_raw_views_flag(self, tmp_path):
        stats_path = tmp_path / "stats.jsonl"
        write_jsonl(
            stats_path,
            (
                {"content_id": f"c{i}", "search_count": i + 1, "external_views": 10**i}
                for i in range(2, 8)
            ),
        )
        out = tmp_path / "a.json"
        main(["analyze", "--stats", str(stats_path), "--out", str(out), "--raw-views"])
        assert json.loads(out.read_text())["views_transform"] == "raw"


class TestConfigFile:
    def test_config_file_sets_defaults_cli_overrides(self, tmp_path):
        queries, docs, _ = two_cluster_corpus(n=30, seed=41)
        d_path = tmp_path / "d.t2me"
        save_matrix(docs, d_path)
        config = tmp_path / "totr.conf"
        config.write_text("pool=5\nper_sample=2\n", encoding="utf-8")
        out = tmp_path / "negatives.jsonl"
        code = main(
            ["mine", "--config", str(config), "--corpus", str(d_path),
             "--seed", "1", "--out", str(out)]
        )
        assert code == 0
        rows = list(read_jsonl(out))
        assert all(len(r["hard_negative_ids"]) == 2 for r in rows)  # per_sample from config

        out2 = tmp_path / "negatives2.jsonl"
        main(
            ["mine", "--config", str(config), "--corpus", str(d_path), "--seed", "1",
             "--per-sample", "1", "--out", str(out2)]
        )
        rows2 = list(read_jsonl(out2))
        assert all(len(r["hard_negative_ids"]) == 1 for r in rows2)  # CLI wins

    def test_missing_input_reports_error(self, tmp_path):
        code = main(
            ["mine", "--corpus", str(tmp_path / "absent.t2me"), "--out", str(tmp_path / "o")]
        )
        assert code == 2
