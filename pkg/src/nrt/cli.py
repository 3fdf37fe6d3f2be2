"""Command line entry point: ``nrt prepare|train|generate|evaluate|inspect``.

Exit codes: 0 success, 1 runtime error, 2 usage error.
"""
import argparse
import logging
import os
import sys

import numpy as np

from nrt import corpus as corpus_mod
from nrt.baseline import mf_train
from nrt.config import ConfigError, RunConfig, load_config
from nrt.container import ContainerError, file_sha256, read_container
from nrt.decode import generate
from nrt.evalmetrics import corpus_rouge, format_report, rating_metrics
from nrt.model import TrainingError
from nrt.train import CheckpointError, load_checkpoint, save_checkpoint, train

log = logging.getLogger("nrt")

PRED_COLUMNS = ("user_id", "item_id", "rating", "tips", "norm_score", "raw_score")


class UsageError(Exception):
    pass


def _require_file(path, what):
    if not path or not os.path.isfile(path):
        raise UsageError(f"{what} not found: {path!r}")


def _echo(cfg_text, out_dir=None, name="config.effective"):
    sys.stderr.write("# effective configuration\n" + cfg_text)
    if out_dir:
        with open(os.path.join(out_dir, name), "w", encoding="utf-8") as fh:
            fh.write(cfg_text)


def _kv(**kw):
    return "".join(f"{k}={v}\n" for k, v in kw.items())


def cmd_prepare(args):
    _require_file(args.input, "input file")
    parsed = corpus_mod.parse_records(args.input, args.schema)
    split = corpus_mod.prepare(parsed.records, args.min_tf, args.seed)
    split.stats.update(malformed=parsed.malformed, dropped_empty=parsed.dropped_empty)
    out_dir = os.path.dirname(os.path.abspath(args.out))
    os.makedirs(out_dir, exist_ok=True)
    corpus_mod.save_corpus(split, args.out, {"schema": args.schema, "seed": args.seed})
    cfg = _kv(input=args.input, schema=args.schema, min_tf=args.min_tf, seed=args.seed, out=args.out)
    with open(args.out + ".config", "w", encoding="utf-8") as fh:
        fh.write(cfg)
    sys.stderr.write("# effective configuration\n" + cfg)
    print(f"users={split.n_users}")
    print(f"items={split.n_items}")
    print(f"vocab={len(split.vocab)}")
    print(f"train={len(split.train)}")
    print(f"valid={len(split.valid)}")
    print(f"test={len(split.test)}")
    for k in ("malformed", "dropped_empty", "valid_cold_dropped", "test_cold_dropped"):
        print(f"{k}={split.stats.get(k, 0)}")
    return 0


def _load_corpus(path):
    _require_file(path, "corpus archive")
    try:
        return corpus_mod.load_corpus(path)
    except ContainerError as exc:
        raise corpus_mod.CorpusError(str(exc)) from None


def cmd_train(args):
    cfg = RunConfig()
    if args.config:
        _require_file(args.config, "config file")
        cfg = load_config(args.config, cfg)
    for key in ("model", "seed", "max_epochs"):
        if getattr(args, key) is not None:
            cfg.set(key, getattr(args, key))
    cfg.corpus, cfg.out = args.corpus, args.out
    cfg.validate()
    split, meta = _load_corpus(args.corpus)
    os.makedirs(args.out, exist_ok=True)
    _echo(cfg.dumps(), args.out)
    ckpt = os.path.join(args.out, "checkpoint.nrtc")
    try:
        if cfg.model == "mf":
            hp = cfg.hypers
            model, report = mf_train(split, cfg.mf_k, cfg.mf_lambda, cfg.seed, cfg.max_epochs,
                                     hp.batch_size, cfg.patience, hp.rho, hp.eps, hp.init_range)
        else:
            model, report = train(split, cfg.hypers, cfg.seed, cfg.max_epochs, cfg.patience)
    except TrainingError as exc:
        best = getattr(exc, "best_model", None)
        if best is not None:
            save_checkpoint(best, os.path.join(args.out, "checkpoint.partial.nrtc"), meta["vocab_hash"])
        if getattr(exc, "report", None) is not None:
            with open(os.path.join(args.out, "report.partial.csv"), "w") as fh:
                fh.write(exc.report.to_csv())
        raise
    save_checkpoint(model, ckpt, meta["vocab_hash"])
    with open(os.path.join(args.out, "report.csv"), "w") as fh:
        fh.write(report.to_csv())
    print(f"checkpoint={ckpt}")
    print(f"epochs={len(report.rows)}")
    print(f"best_epoch={report.best_epoch}")
    return 0


def cmd_generate(args):
    _require_file(args.checkpoint, "checkpoint")
    split, meta = _load_corpus(args.corpus)
    model, _, ck_meta = load_checkpoint(args.checkpoint, expected_vocab_hash=meta["vocab_hash"])
    hp = model.hypers
    beam = args.beam if args.beam is not None else (hp.beam if ck_meta["model_type"] == "nrt" else 4)
    max_len = args.max_len if args.max_len is not None else (
        hp.max_len if ck_meta["model_type"] == "nrt" else 20)
    n, alpha = (hp.ln_n, hp.ln_alpha) if ck_meta["model_type"] == "nrt" else (2.0, 0.6)
    part = split.part(args.split)
    users = np.array([x.user_id for x in part], dtype=np.int64)
    items = np.array([x.item_id for x in part], dtype=np.int64)
    ratings = model.predict_ratings(users, items) if part else np.zeros(0)
    if args.clamp:
        ratings = np.clip(ratings, 0.0, 5.0)
    lines = ["\t".join(PRED_COLUMNS)]
    for x, r_hat in zip(part, ratings):
        text, norm, raw = "", 0.0, 0.0
        if ck_meta["model_type"] == "nrt":
            best = generate(model, x.user_id, x.item_id, beam, max_len,
                            normalize=not args.no_length_norm, n=n, alpha=alpha)
            text = " ".join(split.vocab.decode(best.tokens))
            norm, raw = best.score, best.log_likelihood
        lines.append("\t".join([split.users[x.user_id], split.items[x.item_id], f"{r_hat:.6f}",
                                text, f"{norm:.6f}", f"{raw:.6f}"]))
    out_dir = os.path.dirname(os.path.abspath(args.out))
    os.makedirs(out_dir, exist_ok=True)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    cfg = _kv(checkpoint=args.checkpoint, corpus=args.corpus, split=args.split, beam=beam,
              max_len=max_len, length_norm=not args.no_length_norm, ln_n=n, ln_alpha=alpha,
              clamp=args.clamp, out=args.out)
    _echo(cfg, out_dir, os.path.basename(args.out) + ".config")
    print(f"predictions={args.out}")
    print(f"rows={len(part)}")
    return 0


def read_predictions(path):
    rows = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if tuple(header) != PRED_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        for n, line in enumerate(fh, 2):
            cols = line.rstrip("\n").split("\t")
            if len(cols) != len(PRED_COLUMNS):
                raise ValueError(f"{path}:{n}: expected {len(PRED_COLUMNS)} columns, got {len(cols)}")
            rows.append(cols)
    return rows


def cmd_evaluate(args):
    _require_file(args.predictions, "predictions file")
    split, _ = _load_corpus(args.corpus)
    part = split.part(args.split)
    rows = read_predictions(args.predictions)
    if len(rows) != len(part):
        raise ValueError(f"{len(rows)} predictions for {len(part)} {args.split} interactions")
    pairs, texts = [], []
    for n, (row, x) in enumerate(zip(rows, part), 1):
        if row[0] != split.users[x.user_id] or row[1] != split.items[x.item_id]:
            raise ValueError(f"prediction row {n} ({row[0]}, {row[1]}) does not match the corpus")
        pairs.append((x.rating, float(row[2])))
        texts.append((corpus_mod.tokenize(row[3]), list(x.tips_words)))
    rating_eval = rating_metrics(pairs) if pairs else None
    rouge = corpus_rouge(texts, stem=args.stem) if texts else None
    report = format_report(rating_eval, rouge)
    sys.stdout.write(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(report)
    sys.stderr.write("# effective configuration\n" + _kv(
        predictions=args.predictions, corpus=args.corpus, split=args.split, stem=args.stem,
        out=args.out or ""))
    return 0


def cmd_inspect(args):
    _require_file(args.checkpoint, "checkpoint")
    meta, arrays = read_container(args.checkpoint)
    print(f"sha256={file_sha256(args.checkpoint)}")
    for key in ("model_type", "vocab_hash"):
        if key in meta:
            print(f"{key}={meta[key]}")
    for key, value in sorted(meta.get("dims", {}).items()):
        print(f"{key}={value}")
    for key, value in sorted(meta.get("hypers", {}).items()):
        print(f"hypers.{key}={value}")
    for name, arr in arrays.items():
        print(f"array {name} shape={tuple(arr.shape)} norm={float(np.linalg.norm(arr)):.6g}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="nrt", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("prepare", help="parse a JSON-lines corpus into a prepared archive")
    s.add_argument("--input", required=True)
    s.add_argument("--schema", choices=sorted(corpus_mod.SCHEMAS), default="generic")
    s.add_argument("--min-tf", type=int, default=5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_prepare)

    s = sub.add_parser("train", help="train an NRT or MF model")
    s.add_argument("--corpus", required=True)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--model", choices=("nrt", "mf"))
    s.add_argument("--seed", type=int)
    s.add_argument("--max-epochs", dest="max_epochs", type=int)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("generate", help="predict ratings and generate tips")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--corpus", required=True)
    s.add_argument("--split", choices=("train", "valid", "test"), default="test")
    s.add_argument("--beam", type=int)
    s.add_argument("--max-len", dest="max_len", type=int)
    s.add_argument("--no-length-norm", action="store_true")
    s.add_argument("--clamp", action="store_true", help="clamp predicted ratings to [0, 5]")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("evaluate", help="score a predictions file")
    s.add_argument("--predictions", required=True)
    s.add_argument("--corpus", required=True)
    s.add_argument("--split", choices=("train", "valid", "test"), default="test")
    s.add_argument("--stem", action="store_true", help="Porter-stem tokens before ROUGE")
    s.add_argument("--out")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("inspect", help="print a checkpoint's manifest")
    s.add_argument("--checkpoint", required=True)
    s.set_defaults(func=cmd_inspect)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "beam", None) is not None and args.beam < 1:
        parser.error("--beam must be >= 1")
    if getattr(args, "max_len", None) is not None and args.max_len < 1:
        parser.error("--max-len must be >= 1")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"nrt {args.command}: {exc}", file=sys.stderr)
        return 2
    except (corpus_mod.CorpusError, CheckpointError, ContainerError, TrainingError,
            ValueError, OSError) as exc:
        print(f"nrt {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
