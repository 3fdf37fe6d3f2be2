import numpy as np
import pytest

from nrt.baseline import MatrixFactorization, mf_init, mf_train
from nrt.corpus import Interaction, SplitCorpus, Vocabulary, make_batch
from nrt.numerics import ParamSlot, gradient_check


def planted_corpus(n_users=30, n_items=25, k=2, seed=0, frac=0.6):
    rng = np.random.default_rng(seed)
    U, V = rng.normal(0, 0.7, (k, n_users)), rng.normal(0, 0.7, (k, n_items))
    R = 3.0 + U.T @ V
    pairs = [(u, i) for u in range(n_users) for i in range(n_items) if rng.random() < frac]
    rng.shuffle(pairs)
    xs = [Interaction(u, i, float(R[u, i]), (), (0,)) for u, i in pairs]
    cut = int(0.8 * len(xs))
    return SplitCorpus(xs[:cut], xs[cut:], [], Vocabulary([]), list(range(n_users)),
                       list(range(n_items)))


def test_predict_examples():
    m = MatrixFactorization(1, 2, 2)
    assert m.mf_predict(0, 1) == 0.0
    m["b"][0, 0] = 3.7
    assert m.mf_predict(1, 1) == 3.7
    m = MatrixFactorization(1, 1, 1)
    m["U"][0, 0], m["V"][0, 0] = 2.0, 0.5
    assert m.mf_predict(0, 0) == 1.0


def test_mf_gradient_check():
    rng = np.random.default_rng(1)
    m = MatrixFactorization(3, 4, 5, lambda_n=0.05,
                            params={n: ParamSlot(n, rng.normal(size=s))
                                    for n, s in MatrixFactorization.param_shapes(3, 4, 5).items()})
    batch = make_batch([Interaction(u, i, r, (), (0,)) for u, i, r in
                        [(0, 1, 4.0), (3, 4, 1.0), (0, 2, 2.5), (0, 1, 3.0)]])
    report = gradient_check(lambda: m.joint_loss_and_backward(batch).total, m.slots(), tol=1e-6)
    assert report.passed, str(report)


def test_one_point_fit():
    x = Interaction(0, 0, 4.0, (), (0,))
    corpus = SplitCorpus([x], [], [], Vocabulary([]), ["u"], ["i"])
    model, _ = mf_train(corpus, k=2, lambda_n=0.0, epochs=300, batch_size=1)
    assert (model.mf_predict(0, 0) - 4.0) ** 2 < 1e-4


def test_strong_regularization_pulls_to_global_bias():
    corpus = planted_corpus(10, 8, seed=3)
    model, _ = mf_train(corpus, k=3, lambda_n=50.0, epochs=200, batch_size=10, patience=1000)
    assert np.abs(model["U"]).max() < 1e-2 and np.abs(model["b_u"]).max() < 1e-2
    preds = model.predict_ratings([0, 5, 9], [1, 2, 7])
    np.testing.assert_allclose(preds, model["b"][0, 0], atol=0.02)


@pytest.fixture(scope="module")
def planted_fit():
    corpus = planted_corpus()
    model, report = mf_train(corpus, k=2, lambda_n=1e-5, seed=0, epochs=400, batch_size=8,
                             patience=30)
    return corpus, model, report


def test_planted_low_rank_recovered(planted_fit):
    corpus, model, _ = planted_fit
    users = np.array([x.user_id for x in corpus.valid])
    items = np.array([x.item_id for x in corpus.valid])
    truth = np.array([x.rating for x in corpus.valid])
    rmse = np.sqrt(np.mean((model.predict_ratings(users, items) - truth) ** 2))
    const = np.sqrt(np.mean((np.mean([x.rating for x in corpus.train]) - truth) ** 2))
    assert rmse < 0.1
    assert rmse < const


def test_mf_training_deterministic():
    corpus = planted_corpus(8, 6, seed=5)
    a, ra = mf_train(corpus, k=2, epochs=5, batch_size=4)
    b, rb = mf_train(corpus, k=2, epochs=5, batch_size=4)
    assert all(np.array_equal(a[n], b[n]) for n in a.params)
    assert [r.valid_rmse for r in ra.rows] == [r.valid_rmse for r in rb.rows]


def test_mf_init_global_mean():
    m = mf_init(4, 3, 2, 0.0, seed=0, global_mean=3.5)
    assert m["b"][0, 0] == 3.5 and np.abs(m["U"]).max() <= 0.1
