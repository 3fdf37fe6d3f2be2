import numpy as np
import pytest

from nrt.corpus import Interaction, make_batch
from nrt.model import NRT, Hypers, param_shapes
from nrt.numerics import ParamSlot


def toy_hypers(**kw):
    base = dict(k_u=3, k_v=4, word_dim=3, d=5, rating_layers=2, review_layers=2,
                lambda_r=0.9, lambda_c=0.7, lambda_s=1.3, lambda_n=1e-2, batch_size=3)
    base.update(kw)
    return Hypers(**base)


def random_model(hypers, n_users=2, n_items=2, vocab_size=6, seed=1, scale=0.5):
    rng = np.random.default_rng(seed)
    params = {name: ParamSlot(name, rng.uniform(-scale, scale, shape))
              for name, shape in param_shapes(hypers, n_users, n_items, vocab_size).items()}
    return NRT(hypers, n_users, n_items, vocab_size, params)


def zero_model(hypers, n_users=2, n_items=2, vocab_size=6):
    return NRT(hypers, n_users, n_items, vocab_size)


TOY_INTERACTIONS = (
    Interaction(0, 1, 4.0, (2, 3, 3, 5), (2, 4, 0)),
    Interaction(1, 0, 2.0, (1, 4), (3, 0)),
    Interaction(1, 1, 5.0, (), (5, 2, 3, 1, 0)),
)


@pytest.fixture
def toy_batch():
    return make_batch(list(TOY_INTERACTIONS))


@pytest.fixture
def toy_model():
    return random_model(toy_hypers())
