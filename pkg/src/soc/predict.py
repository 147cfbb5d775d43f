"""Scoring raw text with a trained checkpoint."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FormatError
from .evaluation import SentimentClass, binarize, bucketize
from .model import predict_batch
from .textprep import TokenizerConfig, encode_texts


@dataclass(frozen=True)
class SentimentScore:
    head: str
    value: object  # float for tanh, (p_positive, p_negative) for softmax
    label: SentimentClass

    def to_json(self):
        score = self.value if self.head == "tanh" else list(self.value)
        return {"score": score, "bucket": self.label.value}


class Predictor:
    """Read-only wrapper around a checkpoint and its vocabulary; safe to share across threads."""

    def __init__(self, checkpoint, vocab, tokenizer_config=TokenizerConfig()):
        if checkpoint.vocab_digest and checkpoint.vocab_digest != vocab.digest():
            raise FormatError(
                f"vocabulary does not match checkpoint (version {checkpoint.version}): "
                f"digest {vocab.digest()[:12]} != {checkpoint.vocab_digest[:12]}"
            )
        if len(vocab) != checkpoint.config.vocab_size:
            raise FormatError(f"vocabulary has {len(vocab)} entries, checkpoint expects {checkpoint.config.vocab_size}")
        self.checkpoint = checkpoint
        self.vocab = vocab
        self.tokenizer_config = tokenizer_config

    @property
    def head(self):
        return self.checkpoint.config.head

    def raw_scores(self, texts):
        cfg = self.checkpoint.config
        indices = encode_texts(list(texts), self.vocab, cfg.max_len, self.tokenizer_config)
        return predict_batch(indices, self.checkpoint.params, cfg)

    def score_many(self, texts):
        out = []
        for o in self.raw_scores(texts):
            if self.head == "tanh":
                s = float(o)
                out.append(SentimentScore("tanh", s, bucketize(s)))
            else:
                probs = tuple(float(p) for p in np.asarray(o))
                out.append(SentimentScore("softmax", probs, binarize(probs, "softmax")))
        return out

    def score(self, text):
        return self.score_many([text])[0]

    def scalar(self, text):
        """A single number in [-1, 1]: the tanh score, or p(positive) - p(negative)."""
        s = self.score(text)
        return s.value if self.head == "tanh" else s.value[0] - s.value[1]


def predict(text, checkpoint, vocab):
    return Predictor(checkpoint, vocab).score(text)
