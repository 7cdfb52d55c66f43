"""Pipeline command line: ingest -> split -> stats/embed -> tokenize ->
augment -> train -> translate -> evaluate -> export-ft.

A single top-level seed deterministically derives every stage seed via
derive_seed(seed, stage_name); every stage writes a manifest with the config
hash and input digests so runs are auditable and reproducible.
"""

import argparse
import json
import os
import random
import sys

import numpy as np
import yaml

from . import aligner, analysis, augment, bleu, corpus, nmt, subword
from .util import config_hash, derive_seed, sha256_file, write_jsonl

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

DEFAULT_CONFIG = {
    "seed": 0,
    "workdir": "work",
    "corpus": {"path": "corpus.jsonl", "format": "jsonl"},
    "split": {"ratios": [0.8, 0.1, 0.1]},
    "tokenizer": {"vocab_size": 32000},
    "embeddings": {"dim": 100, "window": 5, "negatives": 5, "epochs": 5,
                   "min_count": 1},
    "augment": {"side": "tgt", "ops": list(augment.EDA_OPS), "alpha": 0.1,
                "n_aug": 1, "lexicon": None, "max_pairs": None},
    "model": {"hidden": 256, "max_len": 64, "dropout_p": 0.1},
    "train": {"epochs": 10, "learning_rate": 0.01, "teacher_forcing_ratio": 0.5,
              "grad_clip_norm": 5.0},
    "evaluation": {"smoothing": "none"},
}

DATA_ERRORS = (corpus.CorpusError, aligner.AlignError, analysis.AnalysisError,
               subword.SubwordError, augment.AugmentError, bleu.BleuError,
               nmt.NmtError, FileNotFoundError, ValueError)

EXPORT_SCHEMA = {
    "type": "object",
    "properties": {
        "id": {"type": "string"},
        "source": {"type": "string", "minLength": 1},
        "target": {"type": "string", "minLength": 1},
        "split": {"enum": ["train", "test", "validation"]},
        "group": {"enum": [aligner.GROUP_ONE2ONE, aligner.GROUP_VARIABLE]},
        "augmented": {"type": "boolean"},
    },
    "required": ["id", "source", "target", "split", "group"],
    "additionalProperties": False,
}


def _deep_merge(base, override):
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(path=None):
    config = DEFAULT_CONFIG
    if path:
        with open(path, "r", encoding="utf-8") as f:
            user = yaml.safe_load(f) or {}
        if not isinstance(user, dict):
            raise ValueError(f"{path}: config must be a mapping")
        config = _deep_merge(DEFAULT_CONFIG, user)
    return config


def stage_seed(config, stage):
    return derive_seed(config["seed"], stage)


def _workdir(config, args):
    wd = args.workdir or os.environ.get("LOWMT_WORKDIR") or config["workdir"]
    os.makedirs(wd, exist_ok=True)
    return wd


def _write_manifest(workdir, stage, config, inputs, outputs):
    manifest = {
        "stage": stage,
        "config_hash": config_hash(config),
        "seed": stage_seed(config, stage),
        "inputs": {p: sha256_file(p) for p in inputs if os.path.exists(p)},
        "outputs": {p: sha256_file(p) for p in outputs if os.path.exists(p)},
    }
    with open(os.path.join(workdir, f"{stage}.manifest.json"), "w",
              encoding="utf-8") as f:
        json.dump(manifest, f, indent=2)


def _check_stage_inputs(workdir, config, upstream_stages, strict):
    current = config_hash(config)
    for stage in upstream_stages:
        path = os.path.join(workdir, f"{stage}.manifest.json")
        if not os.path.exists(path):
            continue
        with open(path, "r", encoding="utf-8") as f:
            manifest = json.load(f)
        if manifest.get("config_hash") != current:
            msg = (f"config hash mismatch with {stage} manifest "
                   f"(stage was produced by a different config)")
            if strict:
                raise ValueError(msg)
            print(f"warning: {msg}", file=sys.stderr)


def _require(path, what):
    if not os.path.exists(path):
        raise FileNotFoundError(f"missing {what}: expected artifact at {path}")
    return path


# --- synthetic corpus -------------------------------------------------------

_SYN_SRC = ["ba", "ce", "di", "fo", "gu", "ha", "ji", "ke", "lo", "mu",
            "na", "pe", "qi", "ro", "su", "ta", "vi", "wo", "yu", "za"]
_SYN_MAP = {w: w.upper() for w in _SYN_SRC}


def generate_synthetic_corpus(n_units, seed=0, variable_fraction=0.25):
    """Reversible word-mapped parallel units for tests and demos."""
    rng = random.Random(derive_seed(seed, "synthetic"))
    units = []
    for i in range(n_units):
        n_sents = rng.randint(1, 3)
        src_sents, tgt_sents = [], []
        for _ in range(n_sents):
            words = [rng.choice(_SYN_SRC) for _ in range(rng.randint(3, 7))]
            src_sents.append(" ".join(words) + ".")
            tgt_sents.append(" ".join(_SYN_MAP[w] for w in words) + ".")
        if rng.random() < variable_fraction:
            extra = [rng.choice(_SYN_SRC) for _ in range(rng.randint(3, 5))]
            tgt_sents.append(" ".join(_SYN_MAP[w] for w in extra) + ".")
        units.append({
            "id": f"syn-{i:06d}", "book": "SYN", "chapter": 1 + i // 100,
            "verse": i % 100, "src": " ".join(src_sents),
            "tgt": " ".join(tgt_sents),
        })
    return units


# --- stage implementations --------------------------------------------------

def cmd_ingest(config, args):
    wd = _workdir(config, args)
    out_path = os.path.join(wd, "corpus.jsonl")
    if args.synthetic:
        records = generate_synthetic_corpus(args.synthetic, stage_seed(config, "ingest"))
        tmp = os.path.join(wd, "synthetic_raw.jsonl")
        write_jsonl(tmp, records)
        corp = corpus.load_corpus(tmp, "jsonl")
        inputs = [tmp]
    else:
        if not args.input:
            raise ValueError("ingest requires --input or --synthetic N")
        corp = corpus.load_corpus(args.input, args.format or config["corpus"]["format"])
        inputs = [args.input]
    corpus.save_corpus(corp, out_path)
    _write_manifest(wd, "ingest", config, inputs, [out_path])
    print(f"ingested {len(corp.units)} units -> {out_path}")


def cmd_stats(config, args):
    wd = _workdir(config, args)
    corp = corpus.load_corpus(_require(os.path.join(wd, "corpus.jsonl"), "corpus"))
    stats = corpus.corpus_stats(corp, side=args.side, k=args.top_k)
    out_path = os.path.join(wd, f"stats.{args.side}.json")
    with open(out_path, "w", encoding="utf-8") as f:
        json.dump({
            "unit_count": stats.unit_count, "sentence_count": stats.sentence_count,
            "word_count": stats.word_count, "unique_word_count": stats.unique_word_count,
            "count_histogram": {str(k): v for k, v in stats.count_histogram.items()},
            "top_k": stats.top_k, "bottom_k": stats.bottom_k,
        }, f, indent=2, ensure_ascii=False)
    _write_manifest(wd, "stats", config, [os.path.join(wd, "corpus.jsonl")], [out_path])
    print(f"units={stats.unit_count} sentences={stats.sentence_count} "
          f"words={stats.word_count} unique={stats.unique_word_count}")
    print(f"stats -> {out_path}")


def cmd_split(config, args):
    wd = _workdir(config, args)
    _check_stage_inputs(wd, config, ["ingest"], args.strict)
    corp = corpus.load_corpus(_require(os.path.join(wd, "corpus.jsonl"), "corpus"))
    ratios = tuple(float(r) for r in args.ratios.split(",")) if args.ratios \
        else tuple(config["split"]["ratios"])
    seed = args.seed if args.seed is not None else stage_seed(config, "split")
    pairs, variables = aligner.explode_corpus(corp)
    split = aligner.split_dataset(pairs, variables, ratios=ratios, seed=seed)
    split.manifest["pre_explosion_units"] = len(corp.units)
    split.manifest["post_explosion"] = {"one2one": len(pairs),
                                        "variable": len(variables)}
    split_dir = os.path.join(wd, "split")
    aligner.save_split(split, split_dir)
    outputs = [os.path.join(split_dir, n) for n in
               ("train.jsonl", "test.jsonl", "validation.jsonl", "manifest.json")]
    _write_manifest(wd, "split", config, [os.path.join(wd, "corpus.jsonl")], outputs)
    print(f"split: train={len(split.train)} test={len(split.test)} "
          f"validation={len(split.validation)} -> {split_dir}")


def _split_dir(config, args, wd):
    name = getattr(args, "split_dir", None) or "split"
    return _require(os.path.join(wd, name), f"dataset split directory '{name}'")


def _side_sentences(pairs, side):
    sentences = []
    for p in pairs:
        toks = [corpus.strip_terminal(t) for t in getattr(p, side).split()]
        toks = [t for t in toks if t]
        if toks:
            sentences.append(toks)
    return sentences


def cmd_embed(config, args):
    wd = _workdir(config, args)
    split = aligner.load_split(_split_dir(config, args, wd))
    sentences = _side_sentences(split.train, args.side)
    ecfg = config["embeddings"]
    model = analysis.train_embeddings(
        sentences, dim=args.dim or ecfg["dim"], window=ecfg["window"],
        negatives=ecfg["negatives"], epochs=args.epochs or ecfg["epochs"],
        min_count=ecfg["min_count"], seed=stage_seed(config, "embed"))
    out_path = os.path.join(wd, f"embeddings.{args.side}.bin")
    analysis.save_embeddings(model, out_path)
    _write_manifest(wd, "embed", config, [], [out_path])
    print(f"trained {len(model.words)}-word embeddings (dim {model.dim}) -> {out_path}")
    if args.query:
        for word, sim in analysis.most_similar(model, args.query, k=10):
            print(f"  {word}\t{sim:.4f}")


def cmd_report(config, args):
    wd = _workdir(config, args)
    corp = corpus.load_corpus(_require(os.path.join(wd, "corpus.jsonl"), "corpus"))
    tokens = corpus.side_tokens(corp, args.side)
    outputs = []
    for direction in ("most", "least"):
        report = analysis.frequency_report(tokens, args.top_k, direction)
        path = os.path.join(wd, f"freq.{args.side}.{direction}.tsv")
        with open(path, "w", encoding="utf-8") as f:
            f.write("word\tcount\n")
            for word, count in report.ranked:
                f.write(f"{word}\t{count}\n")
        outputs.append(path)
    if args.project_word:
        model = analysis.load_embeddings(
            _require(os.path.join(wd, f"embeddings.{args.side}.bin"), "embedding model"))
        rows = analysis.project_2d(model, args.project_word, args.top_k, args.top_k)
        path = os.path.join(wd, f"projection.{args.side}.tsv")
        with open(path, "w", encoding="utf-8") as f:
            f.write("word\tx\ty\tclass\n")
            for word, x, y, cls in rows:
                f.write(f"{word}\t{x:.6f}\t{y:.6f}\t{cls}\n")
        outputs.append(path)
    _write_manifest(wd, "report", config, [os.path.join(wd, "corpus.jsonl")], outputs)
    print("report ->", ", ".join(outputs))


def cmd_tok_train(config, args):
    wd = _workdir(config, args)
    split = aligner.load_split(_split_dir(config, args, wd))
    vocab_size = args.vocab_size or config["tokenizer"]["vocab_size"]
    outputs = []
    for side in ("src", "tgt"):
        sentences = [getattr(p, side) for p in split.train]
        vocab = subword.train_tokenizer(sentences, vocab_size,
                                        seed=stage_seed(config, "tok-train"))
        path = os.path.join(wd, f"vocab.{side}.tsv")
        subword.save_vocab(vocab, path)
        outputs.append(path)
        print(f"{side}: {len(vocab)} pieces -> {path}")
    _write_manifest(wd, "tok-train", config, [], outputs)


def cmd_tok_apply(config, args):
    wd = _workdir(config, args)
    vocab = subword.load_vocab(
        _require(os.path.join(wd, f"vocab.{args.side}.tsv"), "subword vocab"))
    if args.text is not None:
        lines = [args.text]
    else:
        with open(_require(args.input, "input text"), "r", encoding="utf-8") as f:
            lines = [ln.rstrip("\n") for ln in f]
    for line in lines:
        ids = subword.encode(vocab, corpus.normalize_text(line))
        print(" ".join(str(i) for i in ids))


def cmd_augment(config, args):
    wd = _workdir(config, args)
    _check_stage_inputs(wd, config, ["split"], args.strict)
    split = aligner.load_split(_split_dir(config, args, wd))
    acfg = config["augment"]
    policy = augment.AugmentPolicy(
        ops=tuple(acfg["ops"]), alpha=acfg["alpha"], n_aug=acfg["n_aug"],
        max_pairs=acfg["max_pairs"], seed=stage_seed(config, "augment"))
    lexicon = augment.load_lexicon(args.lexicon or acfg["lexicon"]) \
        if (args.lexicon or acfg["lexicon"]) else None
    model = None
    if "embed_replace" in policy.ops:
        model = analysis.load_embeddings(
            _require(os.path.join(wd, f"embeddings.{acfg['side']}.bin"),
                     "embedding model"))
    augmented = augment.augment_training_set(split, acfg["side"], policy,
                                             lexicon=lexicon, model=model)
    out_dir = os.path.join(wd, "augmented")
    aligner.save_split(augmented, out_dir)
    outputs = [os.path.join(out_dir, n) for n in
               ("train.jsonl", "test.jsonl", "validation.jsonl", "manifest.json")]
    _write_manifest(wd, "augment", config, [], outputs)
    print(f"augment: train {len(split.train)} -> {len(augmented.train)} pairs "
          f"-> {out_dir}")


def _encode_pairs(pairs, src_vocab, tgt_vocab, max_len):
    encoded = []
    skipped = 0
    for p in pairs:
        src_ids = subword.encode(src_vocab, p.src)
        tgt_ids = subword.encode(tgt_vocab, p.tgt)
        if 1 <= len(src_ids) <= max_len and len(tgt_ids) + 1 <= max_len:
            encoded.append((src_ids, tgt_ids))
        else:
            skipped += 1
    return encoded, skipped


def cmd_train(config, args):
    wd = _workdir(config, args)
    _check_stage_inputs(wd, config, ["split", "tok-train"], args.strict)
    split = aligner.load_split(_split_dir(config, args, wd))
    src_vocab = subword.load_vocab(_require(os.path.join(wd, "vocab.src.tsv"),
                                            "source subword vocab"))
    tgt_vocab = subword.load_vocab(_require(os.path.join(wd, "vocab.tgt.tsv"),
                                            "target subword vocab"))
    mcfg = config["model"]
    tcfg = config["train"]
    model_config = nmt.ModelConfig(
        src_vocab_size=len(src_vocab), tgt_vocab_size=len(tgt_vocab),
        hidden=args.hidden or mcfg["hidden"], max_len=mcfg["max_len"],
        dropout_p=mcfg["dropout_p"], seed=stage_seed(config, "model-init"))
    train_config = nmt.TrainConfig(
        epochs=args.epochs or tcfg["epochs"], learning_rate=tcfg["learning_rate"],
        teacher_forcing_ratio=tcfg["teacher_forcing_ratio"],
        grad_clip_norm=tcfg["grad_clip_norm"], seed=stage_seed(config, "train"))

    pairs, skipped = _encode_pairs(split.train, src_vocab, tgt_vocab,
                                   model_config.max_len)
    if skipped:
        print(f"warning: skipped {skipped} over-length pairs", file=sys.stderr)
    val_pairs, _ = _encode_pairs(split.validation, src_vocab, tgt_vocab,
                                 model_config.max_len)
    model = nmt.init_model(model_config)
    model, history = nmt.train(model, pairs, train_config,
                               validation_pairs=val_pairs or None)
    ckpt = os.path.join(wd, "model.ckpt")
    loss_csv = os.path.join(wd, "loss.csv")
    nmt.save_checkpoint(model, ckpt)
    nmt.save_loss_history(history, loss_csv)
    _write_manifest(wd, "train", config, [os.path.join(wd, "vocab.src.tsv"),
                                          os.path.join(wd, "vocab.tgt.tsv")],
                    [ckpt, loss_csv])
    print(f"trained {train_config.epochs} epochs, "
          f"final loss {history[-1]['mean_loss']:.4f} -> {ckpt}")


def cmd_translate(config, args):
    wd = _workdir(config, args)
    model = nmt.load_checkpoint(_require(os.path.join(wd, "model.ckpt"), "model checkpoint"))
    src_vocab = subword.load_vocab(_require(os.path.join(wd, "vocab.src.tsv"),
                                            "source subword vocab"))
    tgt_vocab = subword.load_vocab(_require(os.path.join(wd, "vocab.tgt.tsv"),
                                            "target subword vocab"))
    if args.text is not None:
        lines = [args.text]
    else:
        with open(_require(args.input, "input text"), "r", encoding="utf-8") as f:
            lines = [ln.rstrip("\n") for ln in f]
    out = []
    for line in lines:
        src_ids = subword.encode(src_vocab, corpus.normalize_text(line))
        src_ids = src_ids[:model.config.max_len]
        tgt_ids, _ = nmt.translate(model, src_ids)
        out.append(subword.decode(tgt_vocab, tgt_ids))
    if args.output:
        with open(args.output, "w", encoding="utf-8") as f:
            f.write("\n".join(out) + "\n")
        print(f"translated {len(out)} lines -> {args.output}")
    else:
        for line in out:
            print(line)


def cmd_evaluate(config, args):
    wd = _workdir(config, args)
    with open(_require(args.hyp, "hypothesis file"), "r", encoding="utf-8") as f:
        hyps = [corpus.normalize_text(ln).split() for ln in f.read().splitlines()]
    with open(_require(args.ref, "reference file"), "r", encoding="utf-8") as f:
        refs = [corpus.normalize_text(ln).split() for ln in f.read().splitlines()]
    smoothing = args.smoothing or config["evaluation"]["smoothing"]
    report = bleu.corpus_bleu(hyps, refs, smoothing=smoothing)
    out_path = os.path.join(wd, "bleu.json")
    with open(out_path, "w", encoding="utf-8") as f:
        json.dump({"score": report.score, "precisions": report.precisions,
                   "brevity_penalty": report.brevity_penalty,
                   "hyp_length": report.hyp_length, "ref_length": report.ref_length,
                   "smoothing": report.smoothing}, f, indent=2)
    _write_manifest(wd, "evaluate", config, [args.hyp, args.ref], [out_path])
    print(report.summary_line())


def export_records(split):
    records = []
    for name, pairs in (("train", split.train), ("test", split.test),
                        ("validation", split.validation)):
        for i, p in enumerate(pairs):
            records.append({"id": f"{name}-{i:06d}", "source": p.src,
                            "target": p.tgt, "split": name, "group": p.group,
                            "augmented": bool(p.augmented)})
    return records


def validate_export(records):
    """Check export records against the fine-tuning JSONL schema."""
    import jsonschema
    validator = jsonschema.Draft7Validator(EXPORT_SCHEMA)
    for i, rec in enumerate(records):
        errors = list(validator.iter_errors(rec))
        if errors:
            raise ValueError(f"export record {i} invalid: {errors[0].message}")


def cmd_export_ft(config, args):
    wd = _workdir(config, args)
    split = aligner.load_split(_split_dir(config, args, wd))
    records = export_records(split)
    validate_export(records)
    out_path = os.path.join(wd, "finetune.jsonl")
    write_jsonl(out_path, records)
    _write_manifest(wd, "export-ft", config, [], [out_path])
    print(f"exported {len(records)} records -> {out_path}")


# --- argument parsing -------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="lowmt", description="Low-resource MT pipeline toolkit")
    parser.add_argument("--config", help="YAML pipeline config")
    parser.add_argument("--workdir", help="artifact directory (or $LOWMT_WORKDIR)")
    parser.add_argument("--strict", action="store_true",
                        help="treat manifest/config hash mismatches as errors")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load (or synthesize) a parallel corpus")
    p.add_argument("--input")
    p.add_argument("--format", choices=["jsonl", "tsv"])
    p.add_argument("--synthetic", type=int, metavar="N",
                   help="generate N synthetic units instead of reading a file")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("stats", help="corpus-level word statistics")
    p.add_argument("--side", choices=["src", "tgt"], default="src")
    p.add_argument("--top-k", type=int, default=10)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("split", help="segment, classify and split the corpus")
    p.add_argument("--ratios", help="comma-separated train,test,validation ratios")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("embed", help="train word embeddings on the train split")
    p.add_argument("--side", choices=["src", "tgt"], default="src")
    p.add_argument("--dim", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--split-dir")
    p.add_argument("--query", help="print nearest neighbors of this word")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("report", help="frequency and projection TSVs for plotting")
    p.add_argument("--side", choices=["src", "tgt"], default="src")
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--project-word")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("tok-train", help="train subword vocabularies per side")
    p.add_argument("--vocab-size", type=int)
    p.add_argument("--split-dir")
    p.set_defaults(func=cmd_tok_train)

    p = sub.add_parser("tok-apply", help="encode text with a trained vocab")
    p.add_argument("--side", choices=["src", "tgt"], default="src")
    p.add_argument("--text")
    p.add_argument("--input")
    p.set_defaults(func=cmd_tok_apply)

    p = sub.add_parser("augment", help="augment one-to-one train pairs")
    p.add_argument("--lexicon", help="synonym lexicon file (word TAB syn,syn,...)")
    p.add_argument("--split-dir")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train", help="train the seq2seq model")
    p.add_argument("--split-dir")
    p.add_argument("--epochs", type=int)
    p.add_argument("--hidden", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("translate", help="greedy-decode text with the trained model")
    p.add_argument("--text")
    p.add_argument("--input")
    p.add_argument("--output")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("evaluate", help="corpus BLEU-4 of hypothesis vs reference")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--smoothing", choices=list(bleu.SMOOTHING_MODES))
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("export-ft", help="emit fine-tuning-ready JSONL")
    p.add_argument("--split-dir")
    p.set_defaults(func=cmd_export_ft)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        args.func(config, args)
    except nmt.NmtNumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DATA_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
