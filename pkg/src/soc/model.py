"""The LSTM + CNN sentiment network: parameters, forward/backward and training.

Pipeline per example::

    indices (T) -> embedding (T, d) -> LSTM hidden states (T, H)
      -> conv + max-over-time pool per kernel width -> concat
      -> dense selu -> dense selu -> head (tanh scalar | softmax pair)
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import nncore
from .errors import ConfigError, InputError, NonFiniteError
from .evaluation import NEGATIVE_INDEX, POSITIVE_INDEX, SentimentClass, binarize, bucketize, target_class
from .textprep import MAX_LEN, PAD_INDEX, random_embeddings

log = logging.getLogger(__name__)

HEADS = ("tanh", "softmax")
DTYPES = {"float32": np.float32, "float64": np.float64}


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    embed_dim: int = 100
    lstm_hidden: int = 64
    dense_size: int = 128
    dense_layers: int = 2
    conv_widths: tuple = (3, 4, 5)
    conv_filters: int = 64
    head: str = "tanh"
    max_len: int = MAX_LEN
    embeddings_trainable: bool = True

    def __post_init__(self):
        object.__setattr__(self, "conv_widths", tuple(int(w) for w in self.conv_widths))
        for name in ("vocab_size", "embed_dim", "lstm_hidden", "dense_size", "conv_filters", "max_len"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.vocab_size < 2:
            raise ConfigError("vocab_size must cover at least <pad> and <unk>")
        if self.dense_layers < 0:
            raise ConfigError("dense_layers must be >= 0")
        if self.head not in HEADS:
            raise ConfigError(f"head must be one of {HEADS}, got {self.head!r}")
        if not self.conv_widths or min(self.conv_widths) < 1:
            raise ConfigError("conv_widths must be a non-empty set of positive widths")
        if max(self.conv_widths) > self.max_len:
            raise ConfigError(f"kernel width {max(self.conv_widths)} exceeds max_len {self.max_len}")

    @property
    def n_outputs(self):
        return 1 if self.head == "tanh" else 2

    def to_dict(self):
        d = asdict(self)
        d["conv_widths"] = list(self.conv_widths)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def shapes(self):
        """Name -> shape of every weight tensor, in canonical order."""
        d, h, f = self.embed_dim, self.lstm_hidden, self.conv_filters
        out = {
            "embedding": (self.vocab_size, d),
            "lstm.w_x": (d, 4 * h),
            "lstm.w_h": (h, 4 * h),
            "lstm.b": (4 * h,),
        }
        for w in self.conv_widths:
            out[f"conv{w}.w"] = (w, h, f)
            out[f"conv{w}.b"] = (f,)
        n_in = f * len(self.conv_widths)
        for i in range(self.dense_layers):
            out[f"dense{i}.w"] = (n_in, self.dense_size)
            out[f"dense{i}.b"] = (self.dense_size,)
            n_in = self.dense_size
        out["head.w"] = (n_in, self.n_outputs)
        out["head.b"] = (self.n_outputs,)
        return out


def _glorot(rng, shape, fan_in, fan_out):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_weights(config, seed=0, embeddings=None, dtype=np.float64):
    """Seeded Glorot-uniform matrices, zero biases, forget-gate bias +1.

    ``embeddings`` (an (V, d) array) replaces the random embedding table;
    either way the pad row is zero.
    """
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in config.shapes().items():
        if name == "embedding":
            continue
        if name.endswith(".b"):
            params[name] = np.zeros(shape)
        elif name.startswith("conv"):
            width, h, f = shape
            params[name] = _glorot(rng, shape, width * h, width * f)
        else:
            params[name] = _glorot(rng, shape, *shape)
    h = config.lstm_hidden
    params["lstm.b"][h : 2 * h] = 1.0
    if embeddings is None:
        table = random_embeddings(config.vocab_size, config.embed_dim, seed=int(rng.integers(2**31))).vectors
    else:
        table = np.array(embeddings, dtype=np.float64)
        if table.shape != (config.vocab_size, config.embed_dim):
            raise ConfigError(f"embedding table shape {table.shape} != {(config.vocab_size, config.embed_dim)}")
    params["embedding"] = table
    params["embedding"][PAD_INDEX] = 0.0
    ordered = {name: np.ascontiguousarray(params[name], dtype=dtype) for name in config.shapes()}
    return ordered


def zero_weights(config, dtype=np.float64):
    return {name: np.zeros(shape, dtype=dtype) for name, shape in config.shapes().items()}


def check_weights(params, config):
    expected = config.shapes()
    if set(params) != set(expected):
        missing = set(expected) - set(params)
        extra = set(params) - set(expected)
        raise ConfigError(f"weight set mismatch; missing {sorted(missing)}, unexpected {sorted(extra)}")
    for name, shape in expected.items():
        if params[name].shape != shape:
            raise ConfigError(f"{name} has shape {params[name].shape}, expected {shape}")


def _validate_indices(indices, config):
    indices = np.asarray(indices)
    if indices.ndim == 1:
        indices = indices[None]
    if indices.ndim != 2 or indices.shape[1] != config.max_len:
        raise InputError(f"expected index batch of shape (N, {config.max_len}), got {indices.shape}")
    bad = np.argwhere((indices < 0) | (indices >= config.vocab_size))
    if bad.size:
        row, col = bad[0]
        raise InputError(
            f"index {indices[row, col]} at example {row}, position {col} is outside vocabulary of size {config.vocab_size}"
        )
    return indices


def _forward(indices, params, config):
    x = params["embedding"][indices]
    hs, lstm_cache = nncore.lstm_forward(x, params["lstm.w_x"], params["lstm.w_h"], params["lstm.b"])
    pooled, conv_caches = [], []
    for w in config.conv_widths:
        p, c = nncore.conv1d_maxpool_forward(hs, params[f"conv{w}.w"], params[f"conv{w}.b"])
        pooled.append(p)
        conv_caches.append(c)
    feat = np.concatenate(pooled, axis=1)
    dense_caches = []
    for i in range(config.dense_layers):
        feat, c = nncore.dense_forward(feat, params[f"dense{i}.w"], params[f"dense{i}.b"], "selu")
        dense_caches.append(c)
    z, head_cache = nncore.dense_forward(feat, params["head.w"], params["head.b"], "identity")
    if config.head == "tanh":
        out = np.tanh(z[:, 0])
    else:
        out = nncore.softmax(z, axis=1)
    cache = (indices, lstm_cache, conv_caches, dense_caches, head_cache)
    return out, cache


def forward(indices, params, config):
    """Head output for a batch of encoded sequences.

    Returns shape (N,) scores for the tanh head, (N, 2) probabilities for the
    softmax head (column 0 positive, column 1 negative).
    """
    indices = _validate_indices(indices, config)
    out, _ = _forward(indices, params, config)
    nncore.check_finite(out, "model output")
    return out


def _backward(dz, cache, params, config):
    indices, lstm_cache, conv_caches, dense_caches, head_cache = cache
    grads = {}
    dfeat, grads["head.w"], grads["head.b"] = nncore.dense_backward(dz, head_cache)
    for i in reversed(range(config.dense_layers)):
        dfeat, grads[f"dense{i}.w"], grads[f"dense{i}.b"] = nncore.dense_backward(dfeat, dense_caches[i])
    f = config.conv_filters
    dhs = None
    for j, w in enumerate(config.conv_widths):
        dseq, grads[f"conv{w}.w"], grads[f"conv{w}.b"] = nncore.conv1d_maxpool_backward(
            dfeat[:, j * f : (j + 1) * f], conv_caches[j]
        )
        dhs = dseq if dhs is None else dhs + dseq
    dx, grads["lstm.w_x"], grads["lstm.w_h"], grads["lstm.b"] = nncore.lstm_backward(dhs, lstm_cache)
    if config.embeddings_trainable:
        demb = nncore.scatter_add_columns(
            config.vocab_size, indices.reshape(-1), np.moveaxis(dx, -1, 0).reshape(dx.shape[-1], -1)
        )
        demb[PAD_INDEX] = 0.0
        grads["embedding"] = demb
    return grads


def loss_and_grads(indices, targets, params, config):
    """Mean batch loss, gradients for every trainable tensor, and the head outputs.

    ``targets`` are real values in [-1, 1] for the tanh head (squared error)
    and class indices for the softmax head (cross-entropy).
    """
    indices = _validate_indices(indices, config)
    out, cache = _forward(indices, params, config)
    n = indices.shape[0]
    targets = np.asarray(targets)
    if config.head == "tanh":
        y = targets.astype(out.dtype)
        diff = out - y
        loss = float(np.mean(diff * diff))
        dz = (2.0 / n) * diff * (1.0 - out * out)
        dz = dz[:, None]
    else:
        cls = targets.astype(np.int64)
        loss = float(np.mean(nncore.cross_entropy(out, cls)))
        dz = out.copy()
        dz[np.arange(n), cls] -= 1.0
        dz /= n
    grads = _backward(dz.astype(out.dtype), cache, params, config)
    return loss, grads, out


# ---------------------------------------------------------------------------
# datasets and labels


@dataclass(frozen=True)
class Dataset:
    """Encoded inputs with head-specific targets and gold classes for scoring."""

    indices: np.ndarray
    targets: np.ndarray
    gold: tuple

    def __len__(self):
        return self.indices.shape[0]

    def subset(self, rows):
        rows = np.asarray(rows)
        return Dataset(self.indices[rows], self.targets[rows], tuple(self.gold[i] for i in rows))


def make_dataset(examples, vocab, head, max_len=MAX_LEN, tokenizer_config=None):
    """Encode labeled examples for one head.

    The softmax head keeps only examples with a binary label.  The tanh head
    uses the ternary target and scores neutral-bearing sets with three buckets.
    """
    from .textprep import TokenizerConfig, encode_texts

    cfg = tokenizer_config or TokenizerConfig()
    texts, targets, gold = [], [], []
    for ex in examples:
        if head == "softmax":
            if ex.binary_label is None:
                continue
            targets.append(POSITIVE_INDEX if ex.binary_label == SentimentClass.POSITIVE else NEGATIVE_INDEX)
            gold.append(SentimentClass(ex.binary_label))
        elif head == "tanh":
            if ex.ternary_target is None:
                continue
            targets.append(float(ex.ternary_target))
            gold.append(target_class(ex.ternary_target))
        else:
            raise ConfigError(f"unknown head {head!r}")
        texts.append(ex.text)
    indices = encode_texts(texts, vocab, max_len, cfg)
    dtype = np.int64 if head == "softmax" else np.float64
    return Dataset(indices, np.asarray(targets, dtype=dtype), tuple(gold))


def classify(outputs, head, ternary):
    """Predicted classes for a batch of head outputs."""
    if head == "tanh" and ternary:
        return [bucketize(s) for s in outputs]
    return [binarize(o, head) for o in outputs]


def accuracy(dataset, params, config, batch_size=2048):
    outputs = predict_batch(dataset.indices, params, config, batch_size)
    ternary = SentimentClass.NEUTRAL in dataset.gold
    preds = classify(outputs, config.head, ternary)
    return sum(p == g for p, g in zip(preds, dataset.gold)) / len(dataset)


def predict_batch(indices, params, config, batch_size=2048):
    chunks = [forward(indices[i : i + batch_size], params, config) for i in range(0, len(indices), batch_size)]
    return np.concatenate(chunks, axis=0) if chunks else np.zeros((0,))


# ---------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 2048
    max_epochs: int = 300
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be >= 1")
        if self.dtype not in DTYPES:
            raise ConfigError(f"dtype must be one of {sorted(DTYPES)}")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    eval_accuracy: float


@dataclass
class TrainResult:
    best: "Checkpoint"
    log: list = field(default_factory=list)
    final_params: dict = None

    def log_csv(self):
        rows = ["epoch,train_loss,eval_accuracy"]
        rows += [f"{r.epoch},{r.train_loss!r},{r.eval_accuracy!r}" for r in self.log]
        return "\n".join(rows) + "\n"


def train(dataset, model_config, train_config, eval_set=None, embeddings=None, vocab_digest="", on_epoch=None):
    """Minibatch Adam training; returns the checkpoint of the best eval-accuracy epoch.

    Model selection uses ``eval_set`` (the training set itself when omitted).
    The last partial batch of each epoch is kept.  Ties in accuracy keep the
    earliest epoch.  ``on_epoch(record)`` may return True to stop early.
    """
    from .checkpoint import Checkpoint

    if len(dataset) == 0:
        raise InputError("training set is empty")
    eval_set = dataset if eval_set is None else eval_set
    if len(eval_set) == 0:
        raise InputError("evaluation set is empty")
    dtype = DTYPES[train_config.dtype]
    params = init_weights(model_config, train_config.seed, embeddings, dtype)
    trainable = [n for n in params if n != "embedding" or model_config.embeddings_trainable]
    states = {
        n: nncore.AdamState.like(
            params[n],
            lr=train_config.lr,
            beta1=train_config.beta1,
            beta2=train_config.beta2,
            epsilon=train_config.epsilon,
        )
        for n in trainable
    }
    rng = np.random.default_rng(train_config.seed)
    n = len(dataset)
    step = 0
    best = None
    best_acc = -1.0
    history = []
    for epoch in range(1, train_config.max_epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for batch_index, start in enumerate(range(0, n, train_config.batch_size)):
            rows = order[start : start + train_config.batch_size]
            loss, grads, _ = loss_and_grads(dataset.indices[rows], dataset.targets[rows], params, model_config)
            if not math.isfinite(loss):
                raise NonFiniteError(f"non-finite loss {loss} at step {step + 1} (epoch {epoch}, batch {batch_index})")
            step += 1
            total += loss * len(rows)
            for name in trainable:
                nncore.adam_update(nncore.Parameter(params[name], grads[name]), states[name])
            if model_config.embeddings_trainable:
                params["embedding"][PAD_INDEX] = 0.0
        acc = accuracy(eval_set, params, model_config, train_config.batch_size)
        record = EpochRecord(epoch, total / n, acc)
        history.append(record)
        log.info("epoch %d loss %.6f eval_accuracy %.4f", epoch, record.train_loss, acc)
        if acc > best_acc:
            best_acc = acc
            best = Checkpoint(model_config, {k: v.copy() for k, v in params.items()}, vocab_digest, step)
        if on_epoch is not None and on_epoch(record):
            break
    return TrainResult(best, history, params)


def with_dtype(params, dtype):
    return {k: np.ascontiguousarray(v, dtype=dtype) for k, v in params.items()}
