"""Command-line entry point: one subcommand per stage plus ``run-all``.

Exit codes: 0 success, 2 bad arguments, 3 stage failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import cluster as cluster_mod
from . import evaluation, model1, pipeline, pseudotext as pt_mod, synth, translate as translate_mod, utd
from .corpus import load_manifest, load_split, load_stopwords, save_manifest, save_split, split_corpus
from .features import FeatureConfig, load_features
from .pipeline import RunConfig, StageError, dump_json, stage

EXIT_OK, EXIT_ARGS, EXIT_STAGE = 0, 2, 3


def _out(args, name: str) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir / name


def _k_list(values) -> tuple[int, ...]:
    ks = []
    for v in values:
        for part in str(v).split(","):
            try:
                k = int(part)
            except ValueError:
                raise argparse.ArgumentTypeError(f"invalid K {part!r}") from None
            if k < 1:
                raise argparse.ArgumentTypeError("K must be >= 1")
            ks.append(k)
    return tuple(dict.fromkeys(ks))


def _utd_params(path) -> utd.UtdParams:
    return utd.UtdParams.from_json(path) if path else utd.UtdParams()


def cmd_synth(args):
    with stage("synth"):
        cfg = synth.SynthConfig.from_json(args.config) if args.config else synth.SynthConfig()
        if args.seed is not None:
            cfg = synth.SynthConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
        manifest = synth.write_corpus(synth.generate_corpus(cfg), args.out_dir, cfg)
    print(manifest)


def cmd_features(args):
    with stage("features"):
        corpus = load_manifest(args.manifest)
        config = FeatureConfig.from_json(args.config) if args.config else FeatureConfig()
        corpus = pipeline.extract_features(corpus, config, args.out_dir)
        save_manifest(corpus, Path(args.out_dir) / "manifest.jsonl")


def cmd_discover(args):
    with stage("discover"):
        if args.manifest:
            mats = pipeline.load_feature_db(load_manifest(args.manifest))
        else:
            files = sorted(Path(args.features_dir).glob("*.ptft"))
            if not files:
                raise ValueError(f"no .ptft files in {args.features_dir}")
            mats = [load_features(f) for f in files]
        matches = utd.discover_matches(mats, _utd_params(args.params), jobs=args.jobs)
        utd.save_matches(matches, _out(args, "matches.tsv"))


def cmd_cluster(args):
    with stage("cluster"):
        matches = utd.load_matches(args.matches)
        order = load_manifest(args.manifest).position if args.manifest else None
        clustering = cluster_mod.cluster_matches(matches, args.overlap, order)
        cluster_mod.save_clusters(clustering, _out(args, "clusters.json"))


def cmd_pseudotext(args):
    with stage("pseudotext"):
        corpus = load_manifest(args.manifest)
        if args.oracle:
            pt = pt_mod.generate_oracle_pseudotext(corpus)
        else:
            pt = pt_mod.generate_pseudotext(cluster_mod.load_clusters(args.clusters), corpus)
        pt_mod.save_pseudotext(pt, _out(args, "pseudotext.txt"))


def cmd_split(args):
    with stage("split"):
        corpus = load_manifest(args.manifest)
        split = split_corpus(corpus, args.mode, args.ratio, args.seed or 0)
        save_split(split, _out(args, "split.json"), corpus)


def cmd_train(args):
    with stage("train"):
        corpus = load_manifest(args.manifest)
        split = load_split(args.split)
        pt = pt_mod.load_pseudotext(args.pseudotext)
        table = pipeline.train_model(pt, corpus, split, load_stopwords(args.stopwords),
                                     args.iters, args.alpha)
        model1.save_table(table, _out(args, "model.tsv"))


def cmd_translate(args):
    with stage("translate"):
        table = model1.load_table(args.model)
        pt = pt_mod.load_pseudotext(args.pseudotext)
        split = load_split(args.split)
        ids = [u for u in pt.lines if u in split.test_ids]
        preds = [p for k in _k_list(args.k) for p in translate_mod.translate_lines(table, pt.lines, ids, k)]
        translate_mod.save_predictions(preds, _out(args, "predictions.jsonl"))


def cmd_evaluate(args):
    with stage("evaluate"):
        corpus = load_manifest(args.manifest)
        stopwords = load_stopwords(args.stopwords)
        preds = translate_mod.load_predictions(args.predictions)
        by_k: dict[int, list] = {}
        for p in preds:
            by_k.setdefault(p.K, []).append(p)
        report = {"metrics": {str(k): pipeline.score(ps, corpus, stopwords, args.average)
                              for k, ps in sorted(by_k.items())},
                  "params": {"average": args.average}}
        _emit(report, args, "evaluation")


def cmd_diagnose(args):
    with stage("diagnose"):
        corpus = load_manifest(args.manifest)
        matches = utd.load_matches(args.matches)
        clustering = cluster_mod.load_clusters(args.clusters)
        num_frames = {m.utterance_id: len(m) for m in pipeline.load_feature_db(corpus)}
        pt = pt_mod.load_pseudotext(args.pseudotext) if args.pseudotext else None
        oov = {}
        if pt is not None and args.split:
            split = load_split(args.split)
            oov["utd"] = evaluation.oov_stats(pt.subset(split.train_ids), pt.subset(split.test_ids))
        diag = evaluation.diagnose(matches, clustering, corpus, num_frames, oov, pt)
        _emit({"diagnostics": diag.to_dict()}, args, "diagnostics")


def _emit(report, args, stem):
    if args.format == "tsv":
        _out(args, f"{stem}.tsv").write_text(evaluation.format_report_tsv(report), encoding="utf-8")
    else:
        dump_json(report, _out(args, f"{stem}.json"))


def cmd_run_all(args):
    ks = _k_list(args.k)
    with stage("load"):
        corpus = load_manifest(args.manifest)
        stopwords = load_stopwords(args.stopwords)
        cfg = RunConfig(
            split_mode=args.split_mode, ratio=args.ratio, seed=args.seed or 0,
            ks=ks, oracle=args.oracle, utd_params=_utd_params(args.params),
            overlap=args.overlap, iterations=args.iters, alpha=args.alpha,
            average=args.average, jobs=args.jobs,
            feature_config=FeatureConfig.from_json(args.features_config) if args.features_config else None,
        )
    report = pipeline.run_all(corpus, stopwords, cfg, args.out_dir, manifest_path=args.manifest)
    if args.format == "tsv":
        Path(args.out_dir, "report.tsv").write_text(evaluation.format_report_tsv(report), encoding="utf-8")
    for k, m in report["metrics"].items():
        print(f"{cfg.echo()['pseudotext']}\t{cfg.split_mode}\tP@{k}={m['precision']:.4f}\tR@{k}={m['recall']:.4f}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", default=".", help="directory for stage outputs")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for discovery")
    common.add_argument("--seed", type=int, default=None, help="random seed (split, synth)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="utdmt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic corpus")
    p.add_argument("--config")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("features", parents=[common], help="MFCC extraction from WAV")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("discover", parents=[common], help="pairwise term discovery")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--features-dir")
    src.add_argument("--manifest")
    p.add_argument("--params", help="JSON file of UTD parameters")
    p.add_argument("--out")
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("cluster", parents=[common], help="cluster matches into pseudoterms")
    p.add_argument("--matches", required=True)
    p.add_argument("--overlap", type=float, default=0.5)
    p.add_argument("--manifest", help="corpus order for cluster labels")
    p.add_argument("--out")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("pseudotext", parents=[common], help="pseudotext from clusters or transcripts")
    p.add_argument("--manifest", required=True)
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--clusters")
    mode.add_argument("--oracle", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_pseudotext)

    p = sub.add_parser("split", parents=[common], help="train/test split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--mode", choices=("call", "utterance"), default="utterance")
    p.add_argument("--ratio", type=float, default=0.9)
    p.add_argument("--out")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", parents=[common], help="train the translation model")
    p.add_argument("--pseudotext", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--iters", type=int, default=5)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--stopwords")
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("translate", parents=[common], help="top-K translation of test pseudotext")
    p.add_argument("--model", required=True)
    p.add_argument("--pseudotext", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--k", nargs="+", default=["1"])
    p.add_argument("--out")
    p.set_defaults(func=cmd_translate)

    for name, func, help_ in (("evaluate", cmd_evaluate, "precision/recall@K"),
                              ("diagnose", cmd_diagnose, "discovery diagnostics")):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("--manifest", required=True)
        p.add_argument("--format", choices=("json", "tsv"), default="json")
        p.add_argument("--out")
        p.set_defaults(func=func)
        if name == "evaluate":
            p.add_argument("--predictions", required=True)
            p.add_argument("--stopwords")
            p.add_argument("--average", choices=("micro", "macro"), default="micro")
        else:
            p.add_argument("--matches", required=True)
            p.add_argument("--clusters", required=True)
            p.add_argument("--pseudotext")
            p.add_argument("--split")

    p = sub.add_parser("run-all", parents=[common], help="full pipeline")
    p.add_argument("--manifest", required=True)
    p.add_argument("--oracle", action="store_true", help="use gold transcripts as pseudotext")
    p.add_argument("--split-mode", choices=("call", "utterance"), default="utterance")
    p.add_argument("--ratio", type=float, default=0.9)
    p.add_argument("--k", nargs="+", default=["1"])
    p.add_argument("--params", help="JSON file of UTD parameters")
    p.add_argument("--overlap", type=float, default=0.5)
    p.add_argument("--iters", type=int, default=5)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--stopwords")
    p.add_argument("--average", choices=("micro", "macro"), default="micro")
    p.add_argument("--features-config", help="FeatureConfig JSON, for manifests with audio")
    p.add_argument("--format", choices=("json", "tsv"), default="json")
    p.set_defaults(func=cmd_run_all)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        parser.error("--jobs must be >= 1")
    try:
        args.func(args)
    except argparse.ArgumentTypeError as exc:
        print(f"utdmt: error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except StageError as exc:
        print(f"utdmt: {exc}", file=sys.stderr)
        return EXIT_STAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
