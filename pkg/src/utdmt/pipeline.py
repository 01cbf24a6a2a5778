"""Stage functions and the end-to-end run.

Information flow: discovery sees only feature matrices of the combined
(train + test) audio; training sees only train-side pseudotext lines and
train-side translations; translation and scoring run on the test side.
"""

from __future__ import annotations

import hashlib
import json
import logging
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import cluster as cluster_mod
from . import model1, translate as translate_mod, utd
from .corpus import Corpus, Split, StopwordList, Utterance, save_split, split_corpus
from .evaluation import corpus_pr, diagnose, evaluate_predictions, oov_stats
from .features import FeatureConfig, FeatureMatrix, compute_mfcc, feature_path, load_features, read_wav, save_features
from .pseudotext import Pseudotext, generate_oracle_pseudotext, generate_pseudotext, save_pseudotext

log = logging.getLogger(__name__)


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"stage {stage} failed: {message}")
        self.stage = stage


@contextmanager
def stage(name: str):
    log.info("stage %s", name)
    try:
        yield
    except StageError:
        raise
    except (OSError, ValueError, KeyError) as exc:
        raise StageError(name, str(exc)) from exc


def extract_features(corpus: Corpus, config: FeatureConfig, out_dir) -> Corpus:
    """MFCC files for every utterance with an ``audio`` path; returns the updated corpus."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    utts = []
    for u in corpus:
        if u.audio is None:
            utts.append(u)
            continue
        samples, rate = read_wav(u.audio)
        if rate != config.sample_rate_hz:
            raise ValueError(f"{u.utterance_id}: sample rate {rate} != configured {config.sample_rate_hz}")
        fm = compute_mfcc(samples, config, u.utterance_id)
        path = feature_path(out_dir, u.utterance_id)
        save_features(fm, path)
        utts.append(Utterance(**{**u.__dict__, "audio_ref": str(path)}))
    return Corpus(tuple(utts))


def load_feature_db(corpus: Corpus) -> list[FeatureMatrix]:
    return [load_features(u.audio_ref, u.utterance_id) for u in corpus]


def discover(mats: Sequence[FeatureMatrix], params: utd.UtdParams, jobs: int = 1) -> list[utd.Match]:
    return utd.discover_matches(mats, params, jobs=jobs)


def train_model(pseudotext: Pseudotext, corpus: Corpus, split: Split, stopwords: StopwordList,
                iterations: int = 5, alpha: float = 0.01) -> model1.TranslationTable:
    train_lines = pseudotext.subset(split.train_ids).lines
    pairs = model1.assemble_pairs(train_lines, corpus, split.train_ids, stopwords)
    return model1.train(pairs, iterations, alpha)


def test_side_ids(corpus: Corpus, split: Split) -> list[str]:
    return sorted(split.test_ids, key=corpus.position)


def score(preds, corpus: Corpus, stopwords: StopwordList, average: str = "micro") -> dict:
    records = evaluate_predictions(preds, corpus, stopwords)
    pr = corpus_pr(records, average)
    return {
        **pr,
        "corr": sum(r.corr for r in records),
        "predicted": sum(sum(r.pred_at_k.values()) for r in records),
        "gold": sum(sum(r.gold.values()) for r in records),
        "utterances": len(records),
    }


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True, ensure_ascii=False) + "\n",
                          encoding="utf-8")


@dataclass
class RunConfig:
    split_mode: str = "utterance"
    ratio: float = 0.9
    seed: int = 0
    ks: tuple[int, ...] = (1,)
    oracle: bool = False
    utd_params: utd.UtdParams = field(default_factory=utd.UtdParams)
    overlap: float = 0.5
    iterations: int = 5
    alpha: float = 0.01
    average: str = "micro"
    jobs: int = 1
    feature_config: FeatureConfig | None = None

    def echo(self) -> dict:
        return {
            "split_mode": self.split_mode, "ratio": self.ratio, "seed": self.seed,
            "k": list(self.ks), "pseudotext": "oracle" if self.oracle else "utd",
            "utd": self.utd_params.to_dict(), "overlap": self.overlap,
            "iterations": self.iterations, "alpha": self.alpha, "average": self.average,
        }


def run_all(corpus: Corpus, stopwords: StopwordList, cfg: RunConfig, out_dir,
            manifest_path=None) -> dict:
    """Run every stage, writing stage outputs into ``out_dir``; returns the report."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    outputs = {}
    report: dict = {"params": cfg.echo()}

    if cfg.oracle:
        with stage("pseudotext"):
            if any(u.transcript is None for u in corpus):
                raise StageError("pseudotext", "oracle requires transcripts")
            pt = generate_oracle_pseudotext(corpus)
        matches = clustering = None
        num_frames = {}
    else:
        with stage("features"):
            if cfg.feature_config is not None and any(u.audio for u in corpus):
                corpus = extract_features(corpus, cfg.feature_config, out / "features")
            mats = load_feature_db(corpus)
            num_frames = {m.utterance_id: len(m) for m in mats}
        with stage("discover"):
            matches = discover(mats, cfg.utd_params, cfg.jobs)
            utd.save_matches(matches, out / "matches.tsv")
            outputs["matches"] = "matches.tsv"
        with stage("cluster"):
            clustering = cluster_mod.cluster_matches(matches, cfg.overlap, corpus.position)
            cluster_mod.save_clusters(clustering, out / "clusters.json")
            outputs["clusters"] = "clusters.json"
        with stage("pseudotext"):
            pt = generate_pseudotext(clustering, corpus)
    save_pseudotext(pt, out / "pseudotext.txt")
    outputs["pseudotext"] = "pseudotext.txt"

    with stage("split"):
        split = split_corpus(corpus, cfg.split_mode, cfg.ratio, cfg.seed)
        save_split(split, out / "split.json", corpus)
        outputs["split"] = "split.json"
    with stage("train"):
        table = train_model(pt, corpus, split, stopwords, cfg.iterations, cfg.alpha)
        model1.save_table(table, out / "model.tsv")
        outputs["model"] = "model.tsv"
        report["train_log_likelihood"] = table.history
    with stage("translate"):
        ids = test_side_ids(corpus, split)
        preds = {k: translate_mod.translate_lines(table, pt.lines, ids, k) for k in cfg.ks}
        translate_mod.save_predictions([p for k in cfg.ks for p in preds[k]], out / "predictions.jsonl")
        outputs["predictions"] = "predictions.jsonl"
    with stage("evaluate"):
        report["metrics"] = {str(k): score(preds[k], corpus, stopwords, cfg.average) for k in cfg.ks}
        report["oov"] = oov_stats(pt.subset(split.train_ids), pt.subset(split.test_ids))
        report["counts"] = {"utterances": len(corpus), "train": len(split.train_ids),
                            "test": len(split.test_ids)}
    if clustering is not None:
        with stage("diagnose"):
            diag = diagnose(matches, clustering, corpus, num_frames,
                            oov={"utd": report["oov"]}, pseudotext=pt)
            report["diagnostics"] = diag.to_dict()
            report["counts"].update(matches=len(matches), clusters=len(clustering))
    dump_json(report, out / "report.json")
    outputs["report"] = "report.json"

    run_info = {
        "params": cfg.echo(),
        "manifest_sha256": sha256_file(manifest_path) if manifest_path else None,
        "features_sha256": {u.utterance_id: sha256_file(u.audio_ref)
                            for u in corpus if not cfg.oracle},
        "outputs": {name: {"file": f, "sha256": sha256_file(out / f)} for name, f in outputs.items()},
    }
    dump_json(run_info, out / "run.json")
    return report
