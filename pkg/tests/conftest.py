import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from soc.model import ModelConfig, init_weights  # noqa: E402

DATA = Path(__file__).parent / "data"


def micro_config(head="tanh", **kw):
    base = dict(vocab_size=50, embed_dim=8, lstm_hidden=8, dense_size=16, conv_widths=(2, 3), conv_filters=4, head=head)
    base.update(kw)
    return ModelConfig(**base)


def generic_params(config, seed=3):
    """Random weights with non-zero biases.

    Zero biases put many SELU pre-activations within finite-difference reach
    of the kink at 0, so checks run at a generic point instead.
    """
    params = init_weights(config, seed=seed)
    rng = np.random.default_rng(seed + 100)
    for name, value in params.items():
        if name.endswith(".b"):
            value += rng.uniform(-0.5, 0.5, value.shape)
    return params


def micro_batch(config, seed=1, lengths=(20, 9)):
    rng = np.random.default_rng(seed)
    idx = np.zeros((len(lengths), config.max_len), dtype=np.int64)
    for row, n in enumerate(lengths):
        idx[row, :n] = rng.integers(1, config.vocab_size, n)
    return idx


@pytest.fixture
def data_dir():
    return DATA


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, detail in acceptance.RESULTS:
        terminalreporter.write_line(f"{status:<10} {name}: {detail}")
