import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as hst

from eerlab.errors import ImpossibleObservationError, TrainingError
from eerlab.models import linear
from eerlab.models.finite import DirichletCategoricalModel
from eerlab.models.linear import BayesianLinearGaussian
from eerlab.models.mlp import DropoutMlp, softmax
from eerlab.posterior import mutual_information, pairwise_joint


def blobs(n=200, seed=0, gap=3.0):
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    X = rng.normal(size=(n, 2)) + np.where(y[:, None] == 1, gap, -gap)
    return X, y


def finite_difference_check(model, X, y, mask, eps=1e-5):
    _, grads = model.loss_and_grads(X, y, mask)
    worst = 0.0
    for name, param in model.params().items():
        numeric = np.zeros_like(param)
        for idx in np.ndindex(param.shape):
            old = param[idx]
            param[idx] = old + eps
            up, _ = model.loss_and_grads(X, y, mask)
            param[idx] = old - eps
            down, _ = model.loss_and_grads(X, y, mask)
            param[idx] = old
            numeric[idx] = (up - down) / (2 * eps)
        denom = max(np.linalg.norm(numeric) + np.linalg.norm(grads[name]), 1e-12)
        worst = max(worst, np.linalg.norm(numeric - grads[name]) / denom)
    return worst


# -- MLP ---------------------------------------------------------------------------

def test_softmax_rows_sum_to_one():
    z = np.random.default_rng(0).normal(scale=50, size=(20, 5))
    assert np.allclose(softmax(z).sum(axis=1), 1.0, atol=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    d, h, C, n = (int(v) for v in rng.integers([1, 2, 2, 1], [5, 7, 5, 9]))
    model = DropoutMlp(d, C, hidden=h, dropout=0.3, seed=seed)
    X = rng.normal(size=(n, d))
    y = rng.integers(C, size=n)
    mask = (rng.random((n, h)) < 0.7) / 0.7
    assert finite_difference_check(model, X, y, mask) < 1e-4
    assert finite_difference_check(model, X, y, None) < 1e-4


def test_fit_separable_blobs():
    X, y = blobs()
    model = DropoutMlp(2, 2, seed=0)
    before, _ = model.loss_and_grads(X, y)
    model.fit(X, y, 2000)
    after, _ = model.loss_and_grads(X, y)
    assert after < before
    assert np.mean(model.predict(X) == y) >= 0.95


def test_zero_iterations_leave_model_unchanged():
    X, y = blobs()
    model = DropoutMlp(2, 2, seed=0)
    W1 = model.W1.copy()
    model.fit(X, y, 0)
    assert np.array_equal(model.W1, W1)


def test_memorises_single_sample():
    X = np.tile([[0.5, -1.0]], (10, 1))
    y = np.full(10, 2)
    model = DropoutMlp(2, 3, seed=0).fit(X, y, 300)
    assert np.all(model.predict(X) == 2)
    assert model.point_predictive(X)[0, 2] > 0.9


def test_nan_loss_reports_iteration():
    X, y = blobs()
    model = DropoutMlp(2, 2, seed=0, lr=1e6, momentum=0.0)
    with pytest.raises(TrainingError) as info, np.errstate(all="ignore"):
        model.fit(X * 1e6, y, 500)
    assert info.value.iteration is not None


def test_fit_is_deterministic():
    X, y = blobs()
    a = DropoutMlp(2, 2, seed=4).fit(X, y, 100)
    b = DropoutMlp(2, 2, seed=4).fit(X, y, 100)
    assert np.array_equal(a.W1, b.W1) and np.array_equal(a.W2, b.W2)


def test_step_decay():
    model = DropoutMlp(2, 2, lr=0.1, lr_step=10, seed=0)
    X, y = blobs(20)
    model.fit(X, y, 25)
    assert model.current_lr() == pytest.approx(0.001)


def test_posterior_predictive_properties():
    X, y = blobs()
    model = DropoutMlp(2, 2, dropout=0.5, seed=1).fit(X, y, 200)
    a = model.posterior_predictive(X[:10], 20, seed=3)
    b = model.posterior_predictive(X[:10], 20, seed=3)
    assert np.array_equal(a.probs, b.probs)
    assert np.allclose(a.probs.sum(axis=2), 1.0, atol=1e-9)
    single = model.posterior_predictive(X[:10], 1, seed=3)
    assert single.n_samples == 1
    mask = (np.random.default_rng(3).random(model.hidden) < 0.5) / 0.5
    by_hand = softmax((model.embeddings(X[:10]) * mask) @ model.W2 + model.b2)
    assert np.allclose(single.probs[0], by_hand, atol=1e-12)


def test_no_dropout_slices_equal_point_predictive():
    X, y = blobs()
    model = DropoutMlp(2, 2, dropout=0.0, seed=1).fit(X, y, 50)
    t = model.posterior_predictive(X[:10], 5, seed=0)
    for s in range(5):
        assert np.allclose(t.probs[s], model.point_predictive(X[:10]), atol=1e-9)


def test_shared_mask_correlates_points():
    X, y = blobs()
    model = DropoutMlp(2, 2, dropout=0.5, seed=1).fit(X, y, 100)
    t = model.posterior_predictive(X[:2], 400, seed=0)
    assert mutual_information(pairwise_joint(t, 0, 1)) > 0


def test_checkpoint_round_trip(tmp_path):
    X, y = blobs()
    model = DropoutMlp(2, 2, lr_step=50, seed=2).fit(X, y, 60)
    path = tmp_path / "model.npz"
    model.save(path)
    back = DropoutMlp.load(path)
    for name, p in model.params().items():
        assert np.array_equal(p, back.params()[name])
    assert back.iterations_done == model.iterations_done
    # identical continuation proves optimiser and RNG state survived
    model.fit(X, y, 30)
    back.fit(X, y, 30)
    assert np.array_equal(model.W1, back.W1)


# -- finite-support oracle -----------------------------------------------------------

def test_single_hypothesis_factorises():
    tables = np.random.default_rng(0).dirichlet(np.ones(3), size=(1, 4))
    model = DirichletCategoricalModel(tables, np.array([1.0]))
    assert np.allclose(model.exact_predictive(2), tables[0, 2])
    assert np.allclose(model.exact_pairwise_joint(0, 1), np.outer(tables[0, 0], tables[0, 1]))


def opposite_model():
    tables = np.array([[[1.0, 0.0], [1.0, 0.0]], [[0.0, 1.0], [0.0, 1.0]]])
    return DirichletCategoricalModel(tables, np.array([0.5, 0.5]))


def test_opposite_deterministic_hypotheses():
    model = opposite_model()
    assert np.allclose(model.exact_predictive(0), [0.5, 0.5])
    assert np.allclose(model.exact_pairwise_joint(0, 1), [[0.5, 0], [0, 0.5]])


def test_bayes_update_examples():
    model = opposite_model()
    assert np.allclose(model.exact_bayes_update(0, 0).weights, [1.0, 0.0])
    agree = DirichletCategoricalModel(np.array([[[0.3, 0.7]], [[0.3, 0.7]]]), np.array([0.4, 0.6]))
    assert np.allclose(agree.exact_bayes_update(0, 1).weights, [0.4, 0.6])
    numeric = DirichletCategoricalModel(np.array([[[0.9, 0.1]], [[0.1, 0.9]]]), np.array([0.5, 0.5]))
    assert np.allclose(numeric.exact_bayes_update(0, 0).weights, [0.9, 0.1])


def test_impossible_observation():
    model = DirichletCategoricalModel(np.array([[[1.0, 0.0]], [[1.0, 0.0]]]), np.array([0.5, 0.5]))
    with pytest.raises(ImpossibleObservationError):
        model.exact_bayes_update(0, 1)


def test_unknown_cell_is_range_error():
    with pytest.raises(IndexError):
        opposite_model().exact_predictive(5)


def test_mc_estimates_converge():
    model = DirichletCategoricalModel.random(np.random.default_rng(1), n_cells=3, n_hypotheses=6, n_classes=3)
    t = model.sample_tensor([0, 1, 2], 100_000, np.random.default_rng(2))
    assert np.abs(pairwise_joint(t, 0, 2) - model.exact_pairwise_joint(0, 2)).max() < 0.01


def test_as_tensor_is_exact():
    model = DirichletCategoricalModel(np.array([[[0.9, 0.1]], [[0.2, 0.8]]]), np.array([3.0, 10.0]) / 13.0)
    t = model.as_tensor([0], resolution=13)
    assert t.n_samples == 13
    assert np.allclose(t.probs.mean(axis=0)[0], model.exact_predictive(0), atol=1e-15)


def test_exact_scores_consistent_with_definitions():
    model = DirichletCategoricalModel.random(np.random.default_rng(5), n_cells=4, n_hypotheses=5, n_classes=3)
    scores = model.exact_scores([0, 1], [2, 3])
    for k, i in enumerate([0, 1]):
        relevance = sum(model.mi_labels(i, j) - model.label_entropy(j) for j in (2, 3))
        assert scores["mell"][k] == pytest.approx(relevance, abs=1e-9)
        assert scores["bald"][k] == pytest.approx(model.mi_label_theta(i), abs=1e-12)


# -- linear Gaussian -----------------------------------------------------------------

@pytest.fixture
def iso():
    return BayesianLinearGaussian.isotropic(2)


def test_linear_label_theta_examples(iso):
    assert linear.mi_label_theta(iso, np.zeros(2)) == 0.0
    assert linear.mi_label_theta(iso, [1.0, 0.0]) == pytest.approx(0.5 * math.log(2), abs=1e-12)
    for s in (0.5, 3.0, 20.0):
        assert linear.mi_label_theta(iso, [s, 0.0]) == pytest.approx(0.5 * math.log(s * s + 1), abs=1e-12)


def test_linear_correlation_examples(iso):
    assert linear.correlation(iso, [1, 0], [1, 0]) == pytest.approx(0.5)
    assert linear.correlation(iso, [1, 0], [0, 3]) == 0.0
    x, v = np.array([0.3, -1.2]), np.array([2.0, 0.7])
    assert linear.correlation(iso, x, v) == pytest.approx(linear.correlation(iso, v, x))


def test_linear_label_mi_examples(iso):
    assert linear.mi_labels(iso, [1, 0], [1, 0]) == pytest.approx(-0.5 * math.log(0.75), abs=1e-12)
    assert linear.mi_labels(iso, [1, 0], [0, 1]) == 0.0
    rng = np.random.default_rng(0)
    for _ in range(50):
        assert linear.mi_labels(iso, rng.normal(size=2), rng.normal(size=2)) >= 0.0


def test_bound_constant_examples(iso):
    assert linear.bound_constant(iso, [[1.0, 0.0]]) == pytest.approx(0.5)
    assert linear.bound_constant(iso, [[0.0, 0.0]]) == 0.0
    noisy = BayesianLinearGaussian.isotropic(2, noise_var=2.0)
    assert linear.bound_constant(noisy, [[1.0, 0.0]]) == pytest.approx(0.25)


def test_decomposition_examples(iso):
    total, relevant, residual = linear.decomposition(iso, [1.0, 0.0], [[1.0, 0.0]])
    assert (total, relevant, residual) == pytest.approx((0.3466, 0.1438, 0.2027), abs=1e-4)
    assert residual == pytest.approx(linear.cmi_label_theta_given(iso, [1.0, 0.0], [1.0, 0.0]), abs=1e-12)
    total, relevant, residual = linear.decomposition(iso, [1.0, 0.0], [[0.0, 1.0]])
    assert relevant == 0.0 and residual == pytest.approx(total)
    assert linear.decomposition(iso, [0.0, 0.0], [[1.0, 0.0]]) == (0.0, 0.0, 0.0)


@settings(max_examples=40, deadline=None)
@given(hst.integers(0, 2**32 - 1))
def test_linear_residual_matches_posterior_covariance(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(3, 3))
    model = BayesianLinearGaussian(np.zeros(3), A @ A.T + 0.1 * np.eye(3), float(rng.uniform(0.1, 3)))
    x, v = rng.normal(size=3), rng.normal(size=3)
    total, relevant, residual = linear.decomposition(model, x, [v])
    assert residual == pytest.approx(linear.cmi_label_theta_given(model, x, v), abs=1e-9)
    assert relevant >= 0 and residual >= -1e-12


def test_label_theta_growth_is_logarithmic(iso):
    x = np.array([1.0, 0.0])
    s = 1e6
    assert abs(linear.mi_label_theta(iso, s * x) - 0.5 * math.log(s * s * iso.quad(x))) < 1e-3


def test_invalid_linear_model():
    with pytest.raises(ValueError):
        BayesianLinearGaussian(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]), 1.0)
    with pytest.raises(ValueError):
        BayesianLinearGaussian(np.zeros(2), np.eye(2), 0.0)
