"""Command-line entry points for corpus building, scoring, and evaluation."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import dataset, evaluation, verbalizer
from .classifier import ReferenceNeedClassifier, SentenceFeatures, load_bundle, stub_classifier
from .pipeline import MediaWikiClient, build_corpus, load_revisions, score_revision, score_online
from .service import score_payload


def _add_model_args(parser: argparse.ArgumentParser):
    parser.add_argument("--bundle", type=Path, default=None, help="model bundle directory")
    parser.add_argument("--stub-seed", type=int, default=0, help="seed for the hash scorer used without a bundle")
    parser.add_argument("--threads", type=int, default=None, help="CPU threads for the graph backend")
    parser.add_argument("--batch-size", type=int, default=32)


def _load_classifier(args: argparse.Namespace) -> ReferenceNeedClassifier:
    if args.bundle is not None:
        return load_bundle(args.bundle, threads=args.threads, batch_size=args.batch_size)
    clf = stub_classifier(seed=args.stub_seed)
    clf.batch_size = args.batch_size
    return clf


def _cmd_build_corpus(args: argparse.Namespace) -> int:
    revisions = load_revisions(args.revisions)
    records = build_corpus(revisions, require_featured=not args.all_pages)
    count = dataset.write_jsonl(records, args.out)
    print(f"wrote {count} records to {args.out}")
    return 0


def _cmd_split(args: argparse.Namespace) -> int:
    fractions = [float(f) for f in args.fractions.split(",")]
    records = list(dataset.read_jsonl(args.corpus))
    splits = dataset.split_by_page(records, fractions, seed=args.seed)
    names = ("train", "dev", "test") if len(splits) == 3 else tuple(
        f"part{i}" for i in range(len(splits))
    )
    args.outdir.mkdir(parents=True, exist_ok=True)
    for name, chunk in zip(names, splits):
        path = args.outdir / f"{name}.jsonl"
        count = dataset.write_jsonl(chunk, path)
        print(f"wrote {count} records to {path}")
    return 0


def _cmd_sample(args: argparse.Namespace) -> int:
    records = list(dataset.read_jsonl(args.corpus))
    sampled = dataset.balanced_sample(records, args.per_language, seed=args.seed)
    count = dataset.write_jsonl(sampled, args.out)
    print(f"wrote {count} records to {args.out}")
    return 0


def _cmd_score(args: argparse.Namespace) -> int:
    clf = _load_classifier(args)
    if args.revisions is not None:
        matches = [
            r for r in load_revisions(args.revisions)
            if r.lang == args.lang and r.rev_id == args.rev_id
        ]
        if not matches:
            print(f"revision {args.rev_id} ({args.lang}) not in {args.revisions}", file=sys.stderr)
            return 1
        result = score_revision(matches[0], clf)
    else:
        result = score_online(MediaWikiClient(), args.lang, args.rev_id, clf)
    payload = score_payload(clf.model_version, result.wiki_db, result.revision_id, result.score)
    print(json.dumps(payload, ensure_ascii=False, separators=(",", ":")))
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    records = list(dataset.read_jsonl(args.corpus))
    if not records:
        print("corpus is empty", file=sys.stderr)
        return 1
    clf = _load_classifier(args)
    labels = [r.label for r in records]
    scores = clf.score_records(records)
    report = evaluation.evaluate_scores(
        labels, scores, threshold=args.threshold, n_boot=args.n_boot, seed=args.seed
    )
    groups = [r.wiki_db for r in records]
    preds = (np.asarray(scores) >= args.threshold).astype(int)
    report["per_wiki_confusion"] = {
        wiki: matrix.tolist()
        for wiki, matrix in evaluation.per_group_confusion(groups, labels, preds).items()
    }
    print(json.dumps(report, ensure_ascii=False, indent=2))
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    clf = _load_classifier(args)
    if args.corpus is not None:
        feats = [
            SentenceFeatures.from_record(r) for r in dataset.read_jsonl(args.corpus)
        ][: args.sentences]
    else:
        feats = [
            SentenceFeatures(
                lang="en",
                section_title="history",
                sentence=f"Sentence number {i} makes an assertion that may need support.",
                next_sent="The following sentence continues the paragraph.",
                prev_sent="The previous sentence set the scene.",
            )
            for i in range(args.sentences)
        ]
    stats = evaluation.bench(
        lambda: clf.predict_proba(feats), repeats=args.repeats, warmup=args.warmup
    )
    print(
        json.dumps(
            {
                "sentences": len(feats),
                "repeats": args.repeats,
                "mean_s": stats.mean,
                "median_s": stats.median,
                "p95_s": stats.p95,
                "best_s": stats.best,
            },
            indent=2,
        )
    )
    return 0


def _cmd_verbalize(args: argparse.Namespace) -> int:
    records = list(dataset.read_jsonl(args.corpus))
    if not records:
        print("corpus is empty", file=sys.stderr)
        return 1
    if args.replay is not None:
        client = verbalizer.ReplayVerbalizerClient.from_json(args.replay)
    else:
        client = verbalizer.HTTPVerbalizerClient()
    feats = [SentenceFeatures.from_record(r) for r in records]
    scores = verbalizer.verbalize_scores(client, feats)
    labels = [r.label for r in records]
    report = {
        "auc": evaluation.auc_roc(labels, scores),
        "scores": [
            {"sentence": r.sentence, "label": r.label, "p_yes": float(s)}
            for r, s in zip(records, scores)
        ],
    }
    print(json.dumps(report, ensure_ascii=False, indent=2))
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(
        classifier=_load_classifier(args),
        budget_ms=args.budget_ms,
        max_inflight=args.max_inflight,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="refneed", description="Reference need scoring for wiki articles."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-corpus", help="extract labeled sentences from revisions")
    p.add_argument("--revisions", type=Path, required=True, help="JSONL of raw revisions")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--all-pages", action="store_true", help="keep pages without a featured-article template")
    p.set_defaults(func=_cmd_build_corpus)

    p = sub.add_parser("split", help="partition a corpus into page-disjoint splits")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--outdir", type=Path, required=True)
    p.add_argument("--fractions", default="0.8,0.1,0.1")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("sample", help="draw a label-balanced sample per wiki")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--per-language", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("score", help="score one revision")
    p.add_argument("--lang", required=True)
    p.add_argument("--rev-id", type=int, required=True)
    p.add_argument("--revisions", type=Path, default=None, help="read the revision from this JSONL instead of the wiki API")
    _add_model_args(p)
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("evaluate", help="metrics for a labeled corpus")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--n-boot", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    _add_model_args(p)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("bench", help="wall-clock latency of the scorer")
    p.add_argument("--corpus", type=Path, default=None)
    p.add_argument("--sentences", type=int, default=1)
    p.add_argument("--repeats", type=int, default=30)
    p.add_argument("--warmup", type=int, default=3)
    _add_model_args(p)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("verbalize", help="zero-shot scores from an instruction model")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--replay", type=Path, default=None, help="recorded logprobs instead of a live endpoint")
    p.set_defaults(func=_cmd_verbalize)

    p = sub.add_parser("serve", help="run the scoring service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--budget-ms", type=float, default=500.0)
    p.add_argument("--max-inflight", type=int, default=8)
    _add_model_args(p)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
