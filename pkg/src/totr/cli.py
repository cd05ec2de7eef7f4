"""`totr` command line: corpus lifecycle, training, evaluation, and serving."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import ContentStat, analyze_content_stats
from .assets import DEFAULT_SCENE_CAP, AssetFilterReport, VideoAsset, load_asset_index
from .clients import HttpConfig, HttpJudgeClient, HttpNerClient, make_embedder
from .contrastive import (
    TrainConfig,
    TrainingPair,
    mine_hard_negatives,
    train_adapter,
)
from .curation import RecallRecord, curate
from .embedding import (
    EmbeddingMatrix,
    EmbedRequest,
    RequestKind,
    embed_batch,
    load_matrix,
    normalize,
    save_matrix,
)
from .evaluation import EvalConfig, run_eval
from .jsonl import read_jsonl, write_json, write_jsonl
from .metrics import PrrInstance, prr_run, score_pair
from .service import ServeConfig, serve

log = logging.getLogger("totr")


def _load_config_file(path: str | None) -> dict[str, object]:
    """Parse a key=value defaults file; values become CLI option defaults."""
    if not path:
        return {}
    values: dict[str, object] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise SystemExit(f"config {path}: expected key=value, got {line!r}")
        key, _, raw = line.partition("=")
        values[key.strip().replace("-", "_")] = _coerce(raw.strip())
    return values


def _coerce(raw: str) -> object:
    if raw.lower() in ("true", "false"):
        return raw.lower() == "true"
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            continue
    return raw


def _http_config(config: dict[str, object]) -> HttpConfig:
    return HttpConfig(
        timeout_s=float(config.get("timeout_s", 30.0)),
        retries=int(config.get("retries", 2)),
    )


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_curate(args: argparse.Namespace, config: dict[str, object]) -> int:
    judge = HttpJudgeClient(args.judge_url, _http_config(config)) if args.judge_url else None
    records, stats, resolutions = curate(
        args.posts,
        args.comments,
        judge=judge,
        tagger=judge,
        prefer_op_reply=args.prefer == "op-reply",
    )
    out_dir = Path(args.out)
    write_jsonl(out_dir / "records.jsonl", (r.to_json() for r in records))
    write_jsonl(out_dir / "resolutions.jsonl", (r.to_json() for r in resolutions.values()))
    write_json(out_dir / "stats.json", stats.to_json())
    log.info(
        "curated %d posts -> %d after filters -> %d solved -> %d records",
        stats.total_posts, stats.filtered_posts, stats.solved, stats.records,
    )
    return 0


def cmd_assets(args: argparse.Namespace, config: dict[str, object]) -> int:
    ner = HttpNerClient(args.ner_url, _http_config(config)) if args.ner_url else None
    report = AssetFilterReport()
    index = load_asset_index(
        args.root, cap=args.dedup_cap, ner=ner, mask=args.mask, report=report
    )
    write_jsonl(args.out, (a.to_json() for a in index))
    log.info("indexed %d assets (%s)", len(index), report.to_json())
    return 0


def _sniff_requests(path: str) -> tuple[list[str], list[EmbedRequest]]:
    """records.jsonl and generated.jsonl rows become text documents;
    assets_index.jsonl rows become video documents (text block + scene images)."""
    ids: list[str] = []
    requests: list[EmbedRequest] = []
    for row in read_jsonl(path):
        if "record_id" in row:
            record = RecallRecord.from_json(row)
            ids.append(record.record_id)
            requests.append(
                EmbedRequest(kind=RequestKind.DOCUMENT_TEXT, text=record.recall_text)
            )
        elif "generated_recall" in row:
            ids.append(str(row["video_id"]))
            requests.append(
                EmbedRequest(kind=RequestKind.DOCUMENT_TEXT, text=str(row["generated_recall"]))
            )
        elif "video_id" in row:
            asset = VideoAsset.from_json(row)
            ids.append(asset.video_id)
            requests.append(
                EmbedRequest(
                    kind=RequestKind.VIDEO_DOCUMENT,
                    text=asset.document_text(),
                    image_paths=tuple(s.image_path for s in asset.deduped_scenes()),
                )
            )
        else:
            raise SystemExit(f"{path}: rows must carry record_id or video_id")
    return ids, requests


def cmd_embed(args: argparse.Namespace, config: dict[str, object]) -> int:
    ids, requests = _sniff_requests(getattr(args, "in"))
    instruction = None
    if args.instruction_file:
        instruction = Path(args.instruction_file).read_text(encoding="utf-8").strip()
    embedder = make_embedder(args.embedder_url, _http_config(config))
    matrix = embed_batch(requests, embedder, instruction=instruction, batch_size=args.batch_size)
    matrix = EmbeddingMatrix(ids=ids, vectors=matrix.vectors)
    save_matrix(matrix, args.out)
    log.info("embedded %d items (dim %d) -> %s", len(matrix), matrix.dim, args.out)
    return 0


def cmd_mine(args: argparse.Namespace, config: dict[str, object]) -> int:
    matrix = normalize(load_matrix(args.corpus))
    assignment = mine_hard_negatives(
        matrix, pool_size=args.pool, per_sample=args.per_sample, seed=args.seed or 0
    )
    write_jsonl(
        args.out,
        ({"id": anchor, "hard_negative_ids": list(negs)} for anchor, negs in assignment.items()),
    )
    if args.pairs_out:
        write_jsonl(
            args.pairs_out,
            (
                TrainingPair(query_id=a, positive_id=a, hard_negative_ids=negs).to_json()
                for a, negs in assignment.items()
            ),
        )
    log.info("mined negatives for %d recalls -> %s", len(assignment), args.out)
    return 0


def cmd_train(args: argparse.Namespace, config: dict[str, object]) -> int:
    pairs = [TrainingPair.from_json(row) for row in read_jsonl(args.pairs)]
    queries = normalize(load_matrix(args.queries))
    docs = normalize(load_matrix(args.docs))
    train_config = TrainConfig(
        tau=args.tau,
        lr=args.lr,
        batch_size=args.batch,
        epochs=args.epochs,
        seed=args.seed or 0,
        momentum=args.momentum,
    )
    state, trace = train_adapter(pairs, queries, docs, train_config)
    state.save(args.out)
    means = trace.epoch_means
    log.info(
        "trained %d steps on %d pairs; epoch mean loss %.4f -> %.4f; adapter -> %s",
        state.step, len(pairs), means[0] if means else float("nan"),
        means[-1] if means else float("nan"), args.out,
    )
    return 0


def cmd_eval(args: argparse.Namespace, config: dict[str, object]) -> int:
    eval_config = EvalConfig.from_json(json.loads(Path(args.eval_config).read_text(encoding="utf-8")))
    result = run_eval(eval_config, seed=args.seed or 0)
    doc = result.to_json()
    write_json(args.out, doc)
    if args.figures_dir:
        from .figures import render_eval_figure

        path = render_eval_figure(doc, args.figures_dir)
        log.info("figure -> %s", path)
    for k, cell in result.table().items():
        log.info("%s: %s (recall/mrr)", k, cell)
    return 0


def cmd_score(args: argparse.Namespace, config: dict[str, object]) -> int:
    golds = {r["record_id"]: RecallRecord.from_json(r) for r in read_jsonl(args.gold)}
    embedder = (
        make_embedder(args.embedder_url, _http_config(config)) if args.embedder_url else None
    )
    rows = []
    missing = 0
    for row in read_jsonl(args.pred):
        video_id = str(row["video_id"])
        gold = golds.get(video_id)
        if gold is None:
            missing += 1
            continue
        report = score_pair(str(row["generated_recall"]), gold.recall_text, embedder)
        rows.append({"video_id": video_id, **report.to_json()})
    if not rows:
        raise SystemExit("no prediction matched a gold record")
    metric_names = [key for key in rows[0] if key != "video_id"]
    means = {
        name: float(np.mean([r[name] for r in rows if r[name] is not None]))
        for name in metric_names
    }
    write_json(args.out, {"n_pairs": len(rows), "missing_gold": missing, "mean": means, "pairs": rows})
    log.info("scored %d pairs (%d without gold): %s", len(rows), missing, means)
    return 0


def cmd_prr(args: argparse.Namespace, config: dict[str, object]) -> int:
    instances = [PrrInstance.from_json(row) for row in read_jsonl(args.instances)]
    assets = {a.video_id: a for a in load_asset_index(args.assets)}
    judge = HttpJudgeClient(args.judge_url, _http_config(config))
    report = prr_run(instances, assets, judge)
    write_json(args.out, report.to_json())
    log.info("prr accuracy %.4f over %d instances", report.accuracy, report.n_instances)
    return 0


def cmd_analyze(args: argparse.Namespace, config: dict[str, object]) -> int:
    stats = [ContentStat.from_json(row) for row in read_jsonl(args.stats)]
    report = analyze_content_stats(stats, log_views=not args.raw_views)
    write_json(args.out, report)
    if args.csv_dir:
        _write_analysis_csvs(stats, report, Path(args.csv_dir))
    if args.figures_dir:
        from .figures import render_analysis_figures

        paths = render_analysis_figures(stats, report, args.figures_dir)
        log.info("figures -> %s", ", ".join(str(p) for p in paths))
    log.info("analyzed %d content items -> %s", len(stats), args.out)
    return 0


def _write_analysis_csvs(stats, report, csv_dir: Path) -> None:
    csv_dir.mkdir(parents=True, exist_ok=True)
    with (csv_dir / "genres.csv").open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["genre", "post_count", "mean_response_hours", "low_support"])
        for genre, row in report["genres"].items():
            writer.writerow([genre, row["post_count"], row["mean_response_hours"], row["low_support"]])
    with (csv_dir / "content_stats.csv").open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["content_id", "search_count", "external_views", "response_time_s", "genre", "days_since_release"]
        )
        for stat in stats:
            writer.writerow(
                [stat.content_id, stat.search_count, stat.external_views,
                 stat.response_time_s, stat.genre, stat.days_since_release]
            )


def cmd_serve(args: argparse.Namespace, config: dict[str, object]) -> int:
    serve_config = ServeConfig(
        index_path=args.index,
        assets_index_path=args.assets_index,
        assets_root=args.assets_root,
        embedder_url=args.embedder_url,
        adapter_path=args.adapter,
        use_instruction=not args.no_instruction,
        feedback_log=args.feedback_log,
        host=args.host,
        port=args.port,
    )
    serve(serve_config)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _parser(config: dict[str, object] | None = None) -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", dest="config_file", help="key=value defaults file")
    shared.add_argument("--seed", type=int, help="RNG seed")
    shared.add_argument("--log-level", default="info", help="debug|info|warning|error")

    # `eval` keeps --config for its evaluation JSON, so it takes the globals
    # without the defaults-file flag.
    shared_no_config = argparse.ArgumentParser(add_help=False)
    shared_no_config.add_argument("--seed", type=int, help="RNG seed")
    shared_no_config.add_argument("--log-level", default="info", help="debug|info|warning|error")

    parser = argparse.ArgumentParser(prog="totr", description=__doc__)
    parser.add_argument("--version", action="version", version=f"totr {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("curate", parents=[shared], help="resolve solved posts into records")
    p.add_argument("--posts", required=True)
    p.add_argument("--comments", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--judge-url")
    p.add_argument("--prefer", choices=["op-reply"], help="resolve signal conflicts toward the OP reply")
    p.set_defaults(func=cmd_curate)

    p = commands.add_parser("assets", parents=[shared], help="index video asset directories")
    p.add_argument("--root", required=True)
    p.add_argument("--dedup-cap", type=int, default=DEFAULT_SCENE_CAP)
    p.add_argument("--out", required=True)
    p.add_argument("--mask", action="store_true", help="mask proper nouns in OCR and transcript")
    p.add_argument("--ner-url")
    p.set_defaults(func=cmd_assets)

    p = commands.add_parser("embed", parents=[shared], help="embed records or assets into a store")
    p.add_argument("--in", required=True)
    p.add_argument("--embedder-url", required=True, help="http URL or stub://<dim>")
    p.add_argument("--out", required=True)
    p.add_argument("--instruction-file")
    p.add_argument("--batch-size", type=int, default=32)
    p.set_defaults(func=cmd_embed)

    p = commands.add_parser("mine", parents=[shared], help="mine hard negatives from a recall store")
    p.add_argument("--corpus", required=True)
    p.add_argument("--pool", type=int, default=50)
    p.add_argument("--per-sample", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--pairs-out", help="also write ready-to-train pairs (query = positive id)")
    p.set_defaults(func=cmd_mine)

    p = commands.add_parser("train", parents=[shared], help="train the embedding adapter")
    p.add_argument("--pairs", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--docs", required=True)
    p.add_argument("--tau", type=float, default=0.05)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--momentum", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = commands.add_parser("eval", parents=[shared_no_config], help="run a retrieval evaluation config")
    p.add_argument("--config", dest="eval_config", required=True, help="eval config JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--figures-dir")
    p.set_defaults(func=cmd_eval)

    p = commands.add_parser("score", parents=[shared], help="score generated recalls against gold")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--embedder-url")
    p.set_defaults(func=cmd_score)

    p = commands.add_parser("prr", parents=[shared], help="prompt recall ranking harness")
    p.add_argument("--instances", required=True)
    p.add_argument("--assets", required=True)
    p.add_argument("--judge-url", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prr)

    p = commands.add_parser("analyze", parents=[shared], help="popularity and genre analytics")
    p.add_argument("--stats", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--raw-views", action="store_true", help="skip the log1p view transform")
    p.add_argument("--csv-dir")
    p.add_argument("--figures-dir")
    p.set_defaults(func=cmd_analyze)

    p = commands.add_parser("serve", parents=[shared], help="run the search service")
    p.add_argument("--index", required=True)
    p.add_argument("--assets-index", required=True)
    p.add_argument("--assets-root", required=True)
    p.add_argument("--embedder-url", required=True)
    p.add_argument("--adapter")
    p.add_argument("--no-instruction", action="store_true")
    p.add_argument("--feedback-log", default="feedback.jsonl")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(func=cmd_serve)

    if config:
        # Config-file values become per-subcommand option defaults, so the
        # precedence is CLI flag > config file > built-in default.
        for subparser in commands.choices.values():
            dests = {action.dest for action in subparser._actions}
            matching = {k: v for k, v in config.items() if k in dests}
            if matching:
                subparser.set_defaults(**matching)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    command = next((a for a in argv if not a.startswith("-")), None)

    config: dict[str, object] = {}
    if command != "eval":
        pre = argparse.ArgumentParser(add_help=False)
        pre.add_argument("--config", dest="config_file")
        known, _ = pre.parse_known_args(argv)
        config = _load_config_file(known.config_file)

    parser = _parser(config)
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args, config)
    except (FileNotFoundError, ValueError) as err:
        log.error("%s", err)
        return 2


if __name__ == "__main__":
    sys.exit(main())
