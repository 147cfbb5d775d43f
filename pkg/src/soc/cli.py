"""Command-line entry point: prepare, train, eval, predict, rank, serve.

Exit codes: 0 success, 1 bad input (including usage errors), 2 internal error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt_io
from . import data as datasets
from .errors import InputError
from .evaluation import metrics
from .model import DTYPES, ModelConfig, TrainConfig, classify, make_dataset, predict_batch, train
from .predict import Predictor
from .rank import Window, load_store, rank_tokens, ranking_csv
from .textprep import (
    EMBED_DIM,
    EmbeddingTable,
    Vocabulary,
    build_vocab,
    glove_words,
    load_glove,
    random_embeddings,
    tokenize,
)

log = logging.getLogger("soc")

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2


class UsageError(InputError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _default_seed():
    raw = os.environ.get("SOC_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"SOC_SEED must be an integer, got {raw!r}") from None


def read_config_file(path):
    """``key=value`` lines; ``#`` starts a comment.  Keys use option names without dashes."""
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read config file {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise InputError(f"{path}:{lineno}: expected key=value")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _widths(text):
    try:
        widths = tuple(int(w) for w in text.split(",") if w.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad width list {text!r}") from None
    if not widths:
        raise argparse.ArgumentTypeError("empty width list")
    return widths


def _sidecar_vocab(checkpoint_path):
    return Path(str(checkpoint_path) + ".vocab")


def _require_files(*paths):
    for p in paths:
        if p is not None and not Path(p).is_file():
            raise InputError(f"no such file: {p}")


def _add_model_options(p):
    g = p.add_argument_group("model")
    g.add_argument("--head", choices=("tanh", "softmax"), default="tanh")
    g.add_argument("--embed-dim", type=int, default=EMBED_DIM)
    g.add_argument("--hidden", type=int, default=64, help="LSTM hidden units")
    g.add_argument("--dense-size", type=int, default=128)
    g.add_argument("--dense-layers", type=int, default=2)
    g.add_argument("--conv-widths", type=_widths, default=(3, 4, 5))
    g.add_argument("--conv-filters", type=int, default=64)
    g.add_argument("--max-len", type=int, default=64)
    g.add_argument("--freeze-embeddings", action="store_true")


def build_parser():
    parser = _Parser(prog="soc", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key=value file supplying option defaults")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("prepare", help="build vocabulary and embedding table")
    p.add_argument("--data", required=True, action="append")
    p.add_argument("--format", choices=sorted(datasets.LOADERS), default="sentiment140")
    p.add_argument("--glove")
    p.add_argument("--dim", type=int, default=EMBED_DIM)
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--vocab-out", required=True)
    p.add_argument("--embeddings-out", required=True)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("train", help="train a model and write the best checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=sorted(datasets.LOADERS), default="sentiment140")
    p.add_argument("--eval-data")
    p.add_argument("--eval-format", choices=sorted(datasets.LOADERS))
    p.add_argument("--eval-fraction", type=float, default=0.1)
    p.add_argument("--max-examples", type=int, help="seeded subsample of the training file")
    p.add_argument("--vocab")
    p.add_argument("--embeddings", help=".npy table from `prepare`")
    p.add_argument("--glove")
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--batch-size", type=int, default=2048)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--precision", choices=("32", "64"), default="32")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="model.socm")
    p.add_argument("--log", help="epoch log CSV (default: <out>.log.csv)")
    _add_model_options(p)

    p = sub.add_parser("eval", help="score a labeled dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--vocab")
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=sorted(datasets.LOADERS), default="sentiment140")
    p.add_argument("--csv", help="also write the report as CSV")

    p = sub.add_parser("predict", help="score raw text")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--vocab")
    p.add_argument("--text", action="append", required=True)

    p = sub.add_parser("rank", help="rank tokens over a window of days")
    p.add_argument("--store", required=True)
    p.add_argument("--from", dest="start", required=True)
    p.add_argument("--to", dest="end", required=True)
    p.add_argument("--checkpoint", help="scores comments that carry no stored score")
    p.add_argument("--vocab")
    p.add_argument("--out")

    p = sub.add_parser("serve", help="run the JSON scoring service")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--vocab")
    p.add_argument("--store")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    return parser


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        overrides = read_config_file(args.config)
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in subparser._actions}
        unknown = set(overrides) - known
        if unknown:
            raise UsageError(f"unknown config keys for {args.command}: {sorted(unknown)}")
        subparser.set_defaults(**overrides)
        args = parser.parse_args(argv)
    if getattr(args, "seed", 0) is None:
        args.seed = _default_seed()
    return args


def _load_predictor(checkpoint_path, vocab_path=None):
    vocab_path = vocab_path or _sidecar_vocab(checkpoint_path)
    _require_files(checkpoint_path, vocab_path)
    return Predictor(ckpt_io.load(checkpoint_path), Vocabulary.load(vocab_path))


def cmd_prepare(args, out):
    _require_files(*args.data, args.glove)
    corpus = []
    for path in args.data:
        examples, summary = datasets.load(path, args.format)
        log.info("%s", summary)
        corpus.extend(tokenize(ex.text) for ex in examples)
    known = glove_words(args.glove) if args.glove else None
    vocab = build_vocab(corpus, args.min_count, known)
    if args.glove:
        table = load_glove(args.glove, args.dim, vocab, seed=args.seed)
    else:
        table = random_embeddings(len(vocab), args.dim, seed=args.seed)
    vocab.save(args.vocab_out)
    table.save(args.embeddings_out)
    print(f"vocabulary: {len(vocab)} entries -> {args.vocab_out}", file=out)
    print(f"embeddings: {table.vectors.shape} -> {args.embeddings_out}", file=out)


def _split(examples, fraction, seed):
    if not 0.0 < fraction < 1.0:
        raise InputError("--eval-fraction must be in (0, 1)")
    order = np.random.default_rng(seed).permutation(len(examples))
    n_eval = max(1, int(round(len(examples) * fraction)))
    if n_eval >= len(examples):
        raise InputError("not enough examples to hold out an evaluation split")
    held = set(order[:n_eval].tolist())
    train_ex = [ex for i, ex in enumerate(examples) if i not in held]
    eval_ex = [ex for i, ex in enumerate(examples) if i in held]
    return train_ex, eval_ex


def cmd_train(args, out):
    _require_files(args.data, args.eval_data, args.vocab, args.embeddings, args.glove)
    examples, summary = datasets.load(args.data, args.format)
    log.info("%s", summary)
    if not examples:
        raise InputError(f"no usable examples in {args.data}")
    if args.max_examples is not None and args.max_examples < len(examples):
        keep = np.sort(np.random.default_rng(args.seed).choice(len(examples), args.max_examples, replace=False))
        examples = [examples[i] for i in keep]
    if args.eval_data:
        eval_examples, eval_summary = datasets.load(args.eval_data, args.eval_format or args.format)
        log.info("%s", eval_summary)
        train_examples = examples
    else:
        train_examples, eval_examples = _split(examples, args.eval_fraction, args.seed)

    if args.vocab:
        vocab = Vocabulary.load(args.vocab)
    else:
        known = glove_words(args.glove) if args.glove else None
        vocab = build_vocab((tokenize(ex.text) for ex in train_examples), args.min_count, known)
    if args.embeddings:
        table = EmbeddingTable.load(args.embeddings).vectors
    elif args.glove:
        table = load_glove(args.glove, args.embed_dim, vocab, seed=args.seed).vectors
    else:
        table = None

    model_config = ModelConfig(
        vocab_size=len(vocab),
        embed_dim=args.embed_dim if table is None else table.shape[1],
        lstm_hidden=args.hidden,
        dense_size=args.dense_size,
        dense_layers=args.dense_layers,
        conv_widths=args.conv_widths,
        conv_filters=args.conv_filters,
        head=args.head,
        max_len=args.max_len,
        embeddings_trainable=not args.freeze_embeddings,
    )
    train_config = TrainConfig(
        batch_size=args.batch_size,
        max_epochs=args.epochs,
        lr=args.lr,
        seed=args.seed,
        dtype="float64" if args.precision == "64" else "float32",
    )
    train_set = make_dataset(train_examples, vocab, args.head, model_config.max_len)
    eval_set = make_dataset(eval_examples, vocab, args.head, model_config.max_len)
    if len(train_set) == 0 or len(eval_set) == 0:
        raise InputError(f"no examples usable by the {args.head} head")

    log_path = args.log or f"{args.out}.log.csv"

    def on_epoch(rec):
        print(f"epoch {rec.epoch:4d}  loss {rec.train_loss:.6f}  eval_accuracy {rec.eval_accuracy:.4f}", file=out)

    result = train(train_set, model_config, train_config, eval_set, table, vocab.digest(), on_epoch)
    ckpt_io.save(result.best, args.out)
    vocab.save(_sidecar_vocab(args.out))
    Path(log_path).write_text(result.log_csv(), encoding="utf-8")
    best = max(result.log, key=lambda r: r.eval_accuracy)
    print(f"best eval_accuracy {best.eval_accuracy:.4f} at epoch {best.epoch}; checkpoint -> {args.out}", file=out)


def cmd_eval(args, out):
    predictor = _load_predictor(args.checkpoint, args.vocab)
    _require_files(args.data)
    examples, summary = datasets.load(args.data, args.format)
    log.info("%s", summary)
    config = predictor.checkpoint.config
    ds = make_dataset(examples, predictor.vocab, config.head, config.max_len)
    if len(ds) == 0:
        raise InputError("no examples usable by this model's head")
    outputs = predict_batch(ds.indices, predictor.checkpoint.params, config)
    # binary gold -> binarize; gold containing neutral -> three buckets
    ternary = any(g.value == "neutral" for g in ds.gold)
    report = metrics(classify(outputs, config.head, ternary), ds.gold)
    print(report.to_text(), file=out)
    if args.csv:
        Path(args.csv).write_text(report.to_csv(), encoding="utf-8")


def cmd_predict(args, out):
    predictor = _load_predictor(args.checkpoint, args.vocab)
    for s in predictor.score_many(args.text):
        value = f"{s.value:.5f}" if s.head == "tanh" else ",".join(f"{p:.5f}" for p in s.value)
        print(f"{value}\t{s.label.value}", file=out)


def cmd_rank(args, out):
    _require_files(args.store)
    window = Window.parse(args.start, args.end)
    store = load_store(args.store)
    scorer = _load_predictor(args.checkpoint, args.vocab).scalar if args.checkpoint else None
    text = ranking_csv(rank_tokens(store, window, scorer))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        out.write(text)


def cmd_serve(args, out):
    from .server import SOCService, make_server

    predictor = _load_predictor(args.checkpoint, args.vocab)
    _require_files(args.store)
    store = load_store(args.store) if args.store else []
    try:
        server = make_server(SOCService(predictor, store), args.host, args.port)
    except OSError as exc:
        print(f"soc serve: cannot bind {args.host}:{args.port}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    print(f"serving on http://{args.host}:{server.server_address[1]}", file=out, flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


COMMANDS = {
    "prepare": cmd_prepare,
    "train": cmd_train,
    "eval": cmd_eval,
    "predict": cmd_predict,
    "rank": cmd_rank,
    "serve": cmd_serve,
}


def main(argv=None, out=None):
    out = out or sys.stdout
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        code = COMMANDS[args.command](args, out)
        return EXIT_OK if code is None else code
    except (InputError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"soc: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SystemExit as exc:
        # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"soc: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
