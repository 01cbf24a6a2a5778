import json
import subprocess
import sys

import pytest

from utdmt import cli, model1, pipeline, utd
from utdmt.corpus import load_manifest, save_manifest, Corpus, Utterance, tokenize
from utdmt.synth import SynthConfig, generate_corpus, write_corpus

CFG = SynthConfig(num_source_types=6, num_calls=3, utterances_per_call=4, seed=3)


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    write_corpus(generate_corpus(CFG), d, CFG)
    return d


def _with_sentinels(manifest, out):
    """Copy of a manifest whose translations carry one unique token per utterance."""
    corpus = load_manifest(manifest)
    utts = [Utterance(**{**u.__dict__, "translation": f"{u.translation} zzsent{k}"})
            for k, u in enumerate(corpus)]
    save_manifest(Corpus(tuple(utts)), out)
    return out


def test_stage_pipeline_end_to_end(synth_dir, tmp_path):
    m = str(synth_dir / "manifest.jsonl")
    out = tmp_path
    steps = [
        ["discover", "--manifest", m, "--out", str(out / "matches.tsv")],
        ["cluster", "--matches", str(out / "matches.tsv"), "--manifest", m, "--out", str(out / "clusters.json")],
        ["pseudotext", "--manifest", m, "--clusters", str(out / "clusters.json"), "--out", str(out / "pt.txt")],
        ["split", "--manifest", m, "--mode", "call", "--ratio", "0.67", "--seed", "1", "--out", str(out / "split.json")],
        ["train", "--pseudotext", str(out / "pt.txt"), "--manifest", m, "--split", str(out / "split.json"),
         "--out", str(out / "model.tsv")],
        ["translate", "--model", str(out / "model.tsv"), "--pseudotext", str(out / "pt.txt"),
         "--split", str(out / "split.json"), "--k", "1", "5", "--out", str(out / "pred.jsonl")],
        ["evaluate", "--manifest", m, "--predictions", str(out / "pred.jsonl"), "--out", str(out / "eval.json")],
        ["diagnose", "--manifest", m, "--matches", str(out / "matches.tsv"), "--clusters", str(out / "clusters.json"),
         "--pseudotext", str(out / "pt.txt"), "--split", str(out / "split.json"), "--format", "tsv",
         "--out", str(out / "diag.tsv")],
    ]
    for argv in steps:
        assert cli.main(argv) == 0, argv
    report = json.loads((out / "eval.json").read_text())
    assert set(report["metrics"]) == {"1", "5"}
    assert (out / "diag.tsv").read_text().startswith("\tutterance\tcall\tcorpus\n")


def test_discover_from_features_dir(synth_dir, tmp_path):
    assert cli.main(["discover", "--features-dir", str(synth_dir / "features"), "--out-dir", str(tmp_path)]) == 0
    via_manifest = tmp_path / "m.tsv"
    cli.main(["discover", "--manifest", str(synth_dir / "manifest.jsonl"), "--out", str(via_manifest)])
    assert (tmp_path / "matches.tsv").read_bytes() == via_manifest.read_bytes()


def test_run_all_oracle_report(synth_dir, tmp_path):
    rc = cli.main(["run-all", "--manifest", str(synth_dir / "manifest.jsonl"), "--oracle",
                   "--split-mode", "utterance", "--k", "1", "--out-dir", str(tmp_path)])
    assert rc == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["params"]["pseudotext"] == "oracle"
    assert {"precision", "recall"} <= set(report["metrics"]["1"])
    run = json.loads((tmp_path / "run.json").read_text())
    assert run["outputs"]["report"]["sha256"] == pipeline.sha256_file(tmp_path / "report.json")


def test_oracle_without_transcripts(synth_dir, tmp_path, capsys):
    corpus = load_manifest(synth_dir / "manifest.jsonl")
    stripped = Corpus(tuple(Utterance(**{**u.__dict__, "transcript": None, "word_alignment": None})
                            for u in corpus))
    save_manifest(stripped, tmp_path / "m.jsonl")
    rc = cli.main(["run-all", "--manifest", str(tmp_path / "m.jsonl"), "--oracle", "--out-dir", str(tmp_path)])
    assert rc == 3
    assert "oracle requires transcripts" in capsys.readouterr().err


def test_bad_arguments_exit_2(synth_dir, tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["run-all"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["discover", "--manifest", "x", "--jobs", "0"])
    assert exc.value.code == 2
    assert cli.main(["run-all", "--manifest", str(synth_dir / "manifest.jsonl"), "--k", "0",
                     "--out-dir", str(tmp_path)]) == 2


def test_missing_input_exit_3(tmp_path):
    assert cli.main(["cluster", "--matches", str(tmp_path / "nope.tsv"), "--out-dir", str(tmp_path)]) == 3


def test_console_script_entry(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "utdmt.cli", "synth", "--out-dir", str(tmp_path), "--seed", "2"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert (tmp_path / "manifest.jsonl").exists() and (tmp_path / "lexicon.json").exists()


def test_information_hygiene(synth_dir, tmp_path, monkeypatch):
    manifest = _with_sentinels(synth_dir / "manifest.jsonl", tmp_path / "m.jsonl")
    corpus = load_manifest(manifest)
    seen = {"discover": [], "train": []}

    real_discover, real_train = utd.discover_matches, model1.train

    def rec_discover(db, *a, **kw):
        db = list(db)
        seen["discover"].extend(db)
        return real_discover(db, *a, **kw)

    def rec_train(pairs, *a, **kw):
        seen["train"].extend(pairs)
        return real_train(pairs, *a, **kw)

    monkeypatch.setattr(utd, "discover_matches", rec_discover)
    monkeypatch.setattr(model1, "train", rec_train)
    out = tmp_path / "run"
    assert cli.main(["run-all", "--manifest", str(manifest), "--split-mode", "call", "--ratio", "0.67",
                     "--out-dir", str(out)]) == 0

    # Discovery gets bare feature matrices: no text attributes at all.
    assert seen["discover"] and all(set(vars(m)) == {"utterance_id", "frame_shift_ms", "frames"}
                                    for m in seen["discover"])

    split = json.loads((out / "split.json").read_text())
    train_ids, test_ids = set(split["train"]), set(split["test"])
    position = {u: k for k, u in enumerate(corpus.ids)}
    allowed = {f"zzsent{position[u]}" for u in train_ids}
    forbidden = {f"zzsent{position[u]}" for u in test_ids}
    used = {w for p in seen["train"] for w in p.target if w.startswith("zzsent")}
    assert used == allowed and not used & forbidden
    # Training sources come only from train-side pseudotext lines.
    assert len(seen["train"]) == len(train_ids)
    test_words = {w for u in test_ids for w in tokenize(corpus[u].translation)}
    assert not any(w in test_words - {x for u in train_ids for x in tokenize(corpus[u].translation)}
                   for p in seen["train"] for w in p.target)
