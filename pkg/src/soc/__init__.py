"""LSTM + CNN sentiment scoring for short social-network texts, plus volume-weighted token ranking."""

from .errors import ConfigError, FormatError, InputError, NonFiniteError, SOCError
from .evaluation import SentimentClass, binarize, bucketize, metrics
from .model import ModelConfig, TrainConfig, forward, train
from .predict import Predictor, predict
from .rank import rank_tokens, score_weights, window_counts
from .textprep import Vocabulary, build_vocab, encode, load_glove, tokenize

__version__ = "0.1.0"
