"""Text cleaning, vocabulary construction, GloVe loading and fixed-length encoding."""

from __future__ import annotations

import hashlib
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError

MAX_LEN = 64
EMBED_DIM = 100
PAD = "<pad>"
UNK = "<unk>"
PAD_INDEX = 0
UNK_INDEX = 1
OOV_INIT_SCALE = 0.05

_USERNAME = re.compile(r"(?<!\w)@\w+")
_HASHTAG = re.compile(r"(?<!\w)#\w+")
_URL = re.compile(r"(?:https?://|www\.)\S*", re.IGNORECASE)
_WORD_OR_PUNCT = re.compile(r"\w+|[^\w\s]")


@dataclass(frozen=True)
class TokenizerConfig:
    lowercase: bool = True
    strip_usernames: bool = True
    strip_hashtags: bool = True
    strip_urls: bool = True
    split_punctuation: bool = True


def tokenize(text, cfg=TokenizerConfig()):
    """Clean a raw social-media string and split it into tokens.

    Usernames, hashtags and URLs are removed outright before punctuation is
    split, so ``"#ETH"`` disappears rather than becoming ``"eth"``.

    >>> tokenize("@alice check https://t.co/x #ETH to the moon!!")
    ['check', 'to', 'the', 'moon', '!', '!']
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    if cfg.strip_urls:
        text = _URL.sub(" ", text)
    if cfg.strip_usernames:
        text = _USERNAME.sub(" ", text)
    if cfg.strip_hashtags:
        text = _HASHTAG.sub(" ", text)
    if cfg.lowercase:
        text = text.lower()
    tokens = _WORD_OR_PUNCT.findall(text) if cfg.split_punctuation else text.split()
    # a bare "@"/"#" left over from e.g. "a@b" still counts as a handle marker
    if cfg.strip_usernames:
        tokens = [t for t in tokens if not t.startswith("@")]
    if cfg.strip_hashtags:
        tokens = [t for t in tokens if not t.startswith("#")]
    return tokens


@dataclass(frozen=True)
class Vocabulary:
    token_to_index: dict = field(default_factory=lambda: {PAD: PAD_INDEX, UNK: UNK_INDEX})

    def __post_init__(self):
        m = self.token_to_index
        if m.get(PAD) != PAD_INDEX or m.get(UNK) != UNK_INDEX:
            raise FormatError("vocabulary must map <pad> to 0 and <unk> to 1")
        if sorted(m.values()) != list(range(len(m))):
            raise FormatError("vocabulary indices must be dense in [0, V)")

    def __len__(self):
        return len(self.token_to_index)

    def __contains__(self, token):
        return token in self.token_to_index

    def index(self, token):
        return self.token_to_index.get(token, UNK_INDEX)

    def tokens(self):
        """Tokens ordered by index."""
        out = [None] * len(self)
        for tok, idx in self.token_to_index.items():
            out[idx] = tok
        return out

    def to_text(self):
        return "".join(f"{tok}\t{idx}\n" for idx, tok in enumerate(self.tokens()))

    def digest(self):
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()

    def save(self, path):
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def load(cls, path):
        mapping = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                tok, sep, idx = line.rpartition("\t")
                if not sep or not idx.isdigit():
                    raise FormatError("expected 'token<TAB>index'", line=lineno)
                mapping[tok] = int(idx)
        return cls(mapping)


def build_vocab(corpus, min_count=1, embeddings=None):
    """Vocabulary of corpus tokens ordered by descending frequency, then lexicographically.

    ``embeddings`` is an optional collection of words that have pretrained
    vectors; such words are admitted whenever they occur at all, even below
    ``min_count``.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts = Counter()
    for tokens in corpus:
        counts.update(tokens)
    counts.pop(PAD, None)
    counts.pop(UNK, None)
    known = set(embeddings) if embeddings is not None else ()
    kept = [t for t, c in counts.items() if c >= min_count or t in known]
    kept.sort(key=lambda t: (-counts[t], t))
    mapping = {PAD: PAD_INDEX, UNK: UNK_INDEX}
    for tok in kept:
        mapping[tok] = len(mapping)
    return Vocabulary(mapping)


@dataclass(frozen=True)
class EmbeddingTable:
    vectors: np.ndarray

    @property
    def dim(self):
        return self.vectors.shape[1]

    def __len__(self):
        return self.vectors.shape[0]

    def save(self, path):
        with open(path, "wb") as fh:
            np.save(fh, self.vectors)

    @classmethod
    def load(cls, path):
        return cls(np.load(path))


def random_embeddings(vocab_size, dim=EMBED_DIM, seed=0, dtype=np.float64):
    """Seeded uniform [-0.05, 0.05] rows with a zero pad row."""
    rng = np.random.default_rng(seed)
    vectors = rng.uniform(-OOV_INIT_SCALE, OOV_INIT_SCALE, size=(vocab_size, dim)).astype(dtype)
    vectors[PAD_INDEX] = 0.0
    return EmbeddingTable(vectors)


def glove_words(path):
    """The words listed in a GloVe text file, without parsing the vectors."""
    with open(path, encoding="utf-8", errors="replace") as fh:
        return {line.split(" ", 1)[0] for line in fh if line.strip()}


def load_glove(path, dim, vocab, seed=0, dtype=np.float64):
    """Embedding table for ``vocab``: GloVe rows where available, seeded noise elsewhere.

    Every line of the file is validated, including words the vocabulary does
    not use, so a truncated download is rejected rather than half-loaded.
    """
    table = random_embeddings(len(vocab), dim, seed, dtype).vectors
    with open(path, encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").rstrip("\r").split()
            if not parts:
                continue
            if len(parts) != dim + 1:
                raise FormatError(f"expected a word and {dim} values, got {len(parts) - 1} values", line=lineno)
            word = parts[0]
            if word in (PAD, UNK) or word not in vocab:
                continue
            try:
                table[vocab.index(word)] = [float(v) for v in parts[1:]]
            except ValueError as exc:
                raise FormatError(f"non-numeric vector component ({exc})", line=lineno) from None
    table[PAD_INDEX] = 0.0
    return EmbeddingTable(table)


@dataclass(frozen=True)
class EncodedSequence:
    indices: np.ndarray
    true_length: int


def encode(tokens, vocab, max_len=MAX_LEN):
    """Map tokens to indices, keep the first ``max_len`` and post-pad with zeros."""
    kept = tokens[:max_len]
    indices = np.full(max_len, PAD_INDEX, dtype=np.int64)
    indices[: len(kept)] = [vocab.index(t) for t in kept]
    return EncodedSequence(indices, len(kept))


def encode_texts(texts, vocab, max_len=MAX_LEN, cfg=TokenizerConfig()):
    """Stack ``encode(tokenize(text))`` for many texts into an (N, max_len) array."""
    out = np.full((len(texts), max_len), PAD_INDEX, dtype=np.int64)
    for row, text in enumerate(texts):
        out[row] = encode(tokenize(text, cfg), vocab, max_len).indices
    return out
