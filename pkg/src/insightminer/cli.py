"""Command-line interface.

Exit codes: 0 success, 1 input error (bad bundle/data/config/arguments),
2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .errors import InputError, InsightError
from .pipeline import (
    DEFAULT_KNN_K,
    DEFAULT_TOP_K,
    InsightSet,
    RankConfig,
    RunConfig,
    load_feedback,
    pca_points,
    run_generate,
    run_rank,
)
from .recommender import TrainConfig, UsefulnessModel
from .synth import PRESETS, generate_synthetic


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="insightminer")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="evaluate every candidate insight")
    gen.add_argument("--schemas", required=True, help="bundle directory")
    gen.add_argument("--data", required=True, help="CSV data file")
    gen.add_argument("--config", required=True, help="ingestion config JSON")
    gen.add_argument("--out", required=True, help="output InsightSet JSON")
    gen.add_argument("--workers", type=int, default=1)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--alpha", type=float, default=0.05)
    gen.add_argument("--gamma", type=float, default=6.0)
    gen.add_argument("--lenient", action="store_true",
                     help="skip failing candidates instead of aborting")

    rank = sub.add_parser("rank", help="rank insights, optionally with feedback")
    rank.add_argument("--insights", required=True)
    rank.add_argument("--feedback", default=None, help="JSONL feedback log")
    rank.add_argument("--top", type=int, default=DEFAULT_TOP_K)
    rank.add_argument("--knn-k", type=int, default=DEFAULT_KNN_K)
    rank.add_argument("--model", default=None, help="where to write the trained model")
    rank.add_argument("--out", required=True, help="output ranked selection JSON")
    rank.add_argument("--seed", type=int, default=0)
    rank.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    rank.add_argument("--learning-rate", type=float, default=TrainConfig.learning_rate)

    synth = sub.add_parser("synth", help="generate a synthetic dataset + bundle")
    synth.add_argument("--out", required=True, help="output directory")
    synth.add_argument("--rows", type=int, default=2000)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--preset", choices=PRESETS, default="protocol")

    pca = sub.add_parser("pca", help="2-D PCA projection of truthful insights")
    pca.add_argument("--insights", required=True)
    pca.add_argument("--feedback", default=None)
    pca.add_argument("--out", required=True)

    serve = sub.add_parser("serve", help="run the review HTTP service")
    serve.add_argument("--insights", required=True)
    serve.add_argument("--feedback", required=True, help="JSONL feedback log path")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--seed", type=int, default=0)
    serve.add_argument("--top", type=int, default=DEFAULT_TOP_K)
    serve.add_argument("--static", default=None,
                       help="directory of built UI assets to serve at /")
    return parser


def _cmd_generate(args) -> None:
    config = RunConfig(
        bundle_dir=args.schemas,
        data_path=args.data,
        ingestion_path=args.config,
        out_path=args.out,
        alpha=args.alpha,
        gamma=args.gamma,
        workers=args.workers,
        seed=args.seed,
        lenient=args.lenient,
    )
    insight_set = run_generate(config)
    insight_set.save(args.out)
    counts = insight_set.metadata["counts"]
    timings = insight_set.metadata["timings"]
    print(
        f"candidates={counts['candidates_total']} truthful={counts['truthful_count']} "
        f"total_s={timings['total_s']:.2f} evaluate_s={timings['evaluate_s']:.2f} "
        f"workers={args.workers}"
    )


def _cmd_rank(args) -> None:
    insight_set = InsightSet.load(args.insights)
    feedback = load_feedback(args.feedback) if args.feedback else []
    train = TrainConfig(
        epochs=args.epochs, learning_rate=args.learning_rate, seed=args.seed
    )
    config = RankConfig(top_k=args.top, knn_k=args.knn_k, seed=args.seed, train=train)
    result = run_rank(insight_set, feedback, config)
    out = {
        "summary": result.summary,
        "selected": [i.to_dict() for i in result.selected],
    }
    Path(args.out).write_text(json.dumps(out, sort_keys=True, indent=2) + "\n")
    if result.model is not None and args.model:
        Path(args.model).write_text(
            json.dumps(result.model.to_dict(), sort_keys=True, indent=2) + "\n"
        )
    print(f"selected={len(result.selected)} seeds={result.summary['seeds']}")


def _cmd_synth(args) -> None:
    out = generate_synthetic(args.out, rows=args.rows, seed=args.seed, preset=args.preset)
    print(f"wrote synthetic dataset to {out}")


def _cmd_pca(args) -> None:
    insight_set = InsightSet.load(args.insights)
    feedback = load_feedback(args.feedback) if args.feedback else []
    Path(args.out).write_text(
        json.dumps(pca_points(insight_set, feedback), sort_keys=True, indent=2) + "\n"
    )
    print(f"wrote PCA projection to {args.out}")


def _cmd_serve(args) -> None:
    import uvicorn

    from .service import create_app

    app = create_app(
        insights_path=args.insights,
        feedback_path=args.feedback,
        seed=args.seed,
        top_k=args.top,
        static_dir=args.static,
    )
    uvicorn.run(app, host=args.host, port=args.port)


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handler = {
        "generate": _cmd_generate,
        "rank": _cmd_rank,
        "synth": _cmd_synth,
        "pca": _cmd_pca,
        "serve": _cmd_serve,
    }[args.command]
    try:
        handler(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InsightError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
