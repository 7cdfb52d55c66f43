import json
import os

import pytest

from lowmt import cli
from lowmt.util import sha256_file


def run(args, workdir):
    return cli.main(["--workdir", str(workdir)] + args)


@pytest.fixture
def work(tmp_path):
    return tmp_path / "work"


class TestSyntheticCorpus:
    def test_deterministic(self):
        a = cli.generate_synthetic_corpus(50, seed=3)
        b = cli.generate_synthetic_corpus(50, seed=3)
        assert a == b

    def test_reversible_mapping(self):
        for rec in cli.generate_synthetic_corpus(20, seed=0, variable_fraction=0.0):
            src_words = rec["src"].replace(".", "").split()
            tgt_words = rec["tgt"].replace(".", "").split()
            assert [w.upper() for w in src_words] == tgt_words


class TestIngestSplit:
    def test_ingest_synthetic(self, work):
        assert run(["ingest", "--synthetic", "30"], work) == 0
        assert (work / "corpus.jsonl").exists()
        assert (work / "ingest.manifest.json").exists()

    def test_split_deterministic_digests(self, work):
        assert run(["ingest", "--synthetic", "60"], work) == 0
        assert run(["split", "--ratios", "0.8,0.1,0.1", "--seed", "7"], work) == 0
        digests1 = {n: sha256_file(work / "split" / n)
                    for n in ("train.jsonl", "test.jsonl", "validation.jsonl")}
        assert run(["split", "--ratios", "0.8,0.1,0.1", "--seed", "7"], work) == 0
        digests2 = {n: sha256_file(work / "split" / n)
                    for n in ("train.jsonl", "test.jsonl", "validation.jsonl")}
        assert digests1 == digests2

    def test_missing_corpus_is_data_error(self, work):
        assert run(["split"], work) == cli.EXIT_DATA

    def test_missing_input_flag(self, work):
        assert run(["ingest"], work) == cli.EXIT_DATA

    def test_stats_runs(self, work):
        assert run(["ingest", "--synthetic", "30"], work) == 0
        assert run(["stats", "--side", "src"], work) == 0
        stats = json.loads((work / "stats.src.json").read_text())
        assert stats["word_count"] > 0


class TestTokenizerStages:
    def test_tok_train_and_apply(self, work, capsys):
        run(["ingest", "--synthetic", "40"], work)
        run(["split"], work)
        assert run(["tok-train", "--vocab-size", "80"], work) == 0
        capsys.readouterr()
        assert run(["tok-apply", "--side", "src", "--text", "ba ce di."], work) == 0
        out = capsys.readouterr().out.strip()
        assert all(tok.isdigit() for tok in out.split())


class TestEvaluate:
    def test_identity_prints_100(self, work, tmp_path, capsys):
        os.makedirs(work, exist_ok=True)
        hyp = tmp_path / "hyp.txt"
        ref = tmp_path / "ref.txt"
        text = "the cat is on the mat\nthe dog sat on the log\n"
        hyp.write_text(text)
        ref.write_text(text)
        assert run(["evaluate", "--hyp", str(hyp), "--ref", str(ref)], work) == 0
        out = capsys.readouterr().out
        assert "BLEU4 = 100.00" in out

    def test_report_json_written(self, work, tmp_path):
        hyp = tmp_path / "hyp.txt"
        ref = tmp_path / "ref.txt"
        hyp.write_text("a b c d\n")
        ref.write_text("a b c e\n")
        os.makedirs(work, exist_ok=True)
        run(["evaluate", "--hyp", str(hyp), "--ref", str(ref),
             "--smoothing", "add_one_for_n_ge_2"], work)
        report = json.loads((work / "bleu.json").read_text())
        assert report["smoothing"] == "add_one_for_n_ge_2"
        assert 0.0 <= report["score"] <= 1.0


class TestExport:
    def test_export_validates_and_writes(self, work):
        run(["ingest", "--synthetic", "40"], work)
        run(["split"], work)
        assert run(["export-ft"], work) == 0
        records = [json.loads(l) for l in
                   (work / "finetune.jsonl").read_text().splitlines()]
        cli.validate_export(records)
        assert {r["split"] for r in records} == {"train", "test", "validation"}

    def test_schema_rejects_bad_record(self):
        with pytest.raises(ValueError, match="invalid"):
            cli.validate_export([{"id": "x", "source": "", "target": "y",
                                  "split": "train", "group": "one2one"}])


class TestStrictManifests:
    def test_config_mismatch_errors_under_strict(self, work, tmp_path):
        run(["ingest", "--synthetic", "20"], work)
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text("seed: 12345\n")
        code = cli.main(["--workdir", str(work), "--config", str(cfg),
                         "--strict", "split"])
        assert code == cli.EXIT_DATA

    def test_config_mismatch_warns_by_default(self, work, tmp_path, capsys):
        run(["ingest", "--synthetic", "20"], work)
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text("seed: 12345\n")
        code = cli.main(["--workdir", str(work), "--config", str(cfg), "split"])
        assert code == 0
        assert "warning" in capsys.readouterr().err


class TestConfig:
    def test_defaults_load(self):
        config = cli.load_config(None)
        assert config["split"]["ratios"] == [0.8, 0.1, 0.1]

    def test_override_merges(self, tmp_path):
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text("seed: 9\nmodel:\n  hidden: 32\n")
        config = cli.load_config(cfg)
        assert config["seed"] == 9
        assert config["model"]["hidden"] == 32
        assert config["model"]["max_len"] == 64

    def test_stage_seeds_differ_by_stage(self):
        config = cli.load_config(None)
        assert cli.stage_seed(config, "split") != cli.stage_seed(config, "train")


class TestSmallPipeline:
    def test_train_translate_evaluate(self, work, tmp_path, capsys):
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text(
            "model:\n  hidden: 16\n  max_len: 24\n  dropout_p: 0.0\n"
            "train:\n  epochs: 1\n  learning_rate: 0.05\n"
        )
        base = ["--workdir", str(work), "--config", str(cfg)]
        assert cli.main(base + ["ingest", "--synthetic", "30"]) == 0
        assert cli.main(base + ["split"]) == 0
        assert cli.main(base + ["tok-train", "--vocab-size", "80"]) == 0
        assert cli.main(base + ["train"]) == 0
        assert (work / "model.ckpt").exists()
        assert (work / "loss.csv").exists()
        capsys.readouterr()
        assert cli.main(base + ["translate", "--text", "ba ce di fo."]) == 0
        out = capsys.readouterr().out
        assert isinstance(out, str)
