import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as hst

from eerlab import analysis as an
from eerlab.errors import EnumerationTooLargeError
from eerlab.models.finite import DirichletCategoricalModel
from eerlab.models.linear import BayesianLinearGaussian
from eerlab.posterior import PosteriorPredictiveTensor, entropy, marginal

LOG2 = math.log(2)


# -- decomposition ---------------------------------------------------------------------

def test_known_parameter_has_no_information():
    model = DirichletCategoricalModel(np.random.default_rng(0).dirichlet(np.ones(3), size=(1, 3)), np.ones(1))
    rep = an.exact_decomposition(model, 0, 1)
    assert (rep.I_label_theta, rep.I_labels, rep.I_residual) == pytest.approx((0, 0, 0), abs=1e-12)


def test_opposite_deterministic_hypotheses():
    tables = np.array([[[1.0, 0.0], [1.0, 0.0]], [[0.0, 1.0], [0.0, 1.0]]])
    rep = an.exact_decomposition(DirichletCategoricalModel(tables, np.array([0.5, 0.5])), 0, 1)
    assert rep.I_labels == pytest.approx(LOG2, abs=1e-12)
    assert rep.I_label_theta == pytest.approx(LOG2, abs=1e-12)
    assert rep.I_residual == pytest.approx(0.0, abs=1e-12)


def test_cell_independent_of_theta():
    rng = np.random.default_rng(1)
    tables = rng.dirichlet(np.ones(3), size=(4, 2))
    tables[:, 1] = [0.2, 0.3, 0.5]  # second cell identical under every hypothesis
    rep = an.exact_decomposition(DirichletCategoricalModel(tables, rng.dirichlet(np.ones(4))), 0, 1)
    assert rep.I_labels == pytest.approx(0.0, abs=1e-12)
    assert rep.I_residual == pytest.approx(rep.I_label_theta, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(hst.integers(0, 2**32 - 1))
def test_decomposition_identity(seed):
    rng = np.random.default_rng(seed)
    model = DirichletCategoricalModel.random(rng, n_cells=3, n_hypotheses=int(rng.integers(1, 17)),
                                             n_classes=int(rng.integers(2, 4)))
    for i, j in itertools.product(range(3), repeat=2):
        assert an.exact_decomposition(model, i, j).ok()


# -- zero-one loss blindness ------------------------------------------------------------------

def test_confidence_raising_candidate_has_zero_reduction():
    model = an.mezl_failure_model()
    assert model.exact_predictive(2)[0] == pytest.approx(0.6)
    assert model.exact_bayes_update(0, 0).exact_predictive(2)[0] == pytest.approx(0.9)
    assert model.exact_bayes_update(0, 1).exact_predictive(2)[0] == pytest.approx(0.51)
    assert an.mezl_loss_reduction(model, 0, [2]) == 0.0
    assert model.mi_labels(0, 2) > 0.05


def test_flipping_candidate_has_positive_reduction():
    # mirrored construction: under the second hypothesis the validation point now leans to class 1
    tables = np.array([
        [[1.0, 0.0], [0.9, 0.1]],
        [[0.0, 1.0], [0.3, 0.7]],
    ])
    model = DirichletCategoricalModel(tables, np.array([0.6, 0.4]))
    assert model.exact_predictive(1).argmax() == 0
    assert model.exact_bayes_update(0, 1).exact_predictive(1).argmax() == 1
    assert an.mezl_loss_reduction(model, 0, [1]) > 0


def test_deterministic_tensor_has_zero_reduction():
    row = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
    t = PosteriorPredictiveTensor(np.stack([row, row]))
    assert an.mezl_loss_reduction(t, 0, [1, 2]) == 0.0


def test_mezl_failure_report():
    rep = an.mezl_failure_report()
    assert rep["passed"], rep["checks"]


# -- XOR -------------------------------------------------------------------------------------

def test_xor_single_step_scores_constant():
    scores = an.xor_scores(an.XorInstance(m=10, subset=(0, 1)))
    for name in ("mell", "mezl", "bald", "entropy"):
        assert np.ptp(scores[name]) < 1e-12
    assert np.allclose(scores["entropy"], LOG2)
    assert np.allclose(scores["mell"], 0.0, atol=1e-12)


def test_xor_two_step_resolves():
    scores = an.xor_scores(an.XorInstance(m=10), observed={0: 0})
    mell = dict(zip(scores["candidates"], scores["mell"]))
    assert mell[1] == pytest.approx(LOG2, abs=1e-9)
    assert all(abs(v) <= 1e-9 for k, v in mell.items() if k != 1)


def test_xor_size_limits():
    with pytest.raises(EnumerationTooLargeError):
        an.XorInstance(m=21)
    with pytest.raises(ValueError):
        an.XorInstance(m=5, subset=(2,))


def test_batch_objective_examples():
    inst = an.XorInstance(m=6)
    v = [inst.val_var]
    joint = inst.joint()
    assert an.batch_objective(inst, [], v) == pytest.approx(entropy(joint.marginal(inst.val_var)))
    assert an.batch_objective(inst, [0, 1], v) == pytest.approx(0.0, abs=1e-12)
    assert an.batch_objective(inst, [0], v) == pytest.approx(LOG2, abs=1e-12)


def test_batch_objective_on_tensor_matches_pairwise_form():
    rng = np.random.default_rng(0)
    t = PosteriorPredictiveTensor(rng.dirichlet(np.ones(3), size=(5, 4)))
    from eerlab.posterior import conditional_entropy, pairwise_joint
    assert an.batch_objective(t, [], [3]) == pytest.approx(entropy(marginal(t, 3)), abs=1e-12)
    assert an.batch_objective(t, [0], [3]) == pytest.approx(conditional_entropy(pairwise_joint(t, 0, 3)), abs=1e-12)
    with pytest.raises(EnumerationTooLargeError):
        an.batch_objective(PosteriorPredictiveTensor(np.full((1, 20, 2), 0.5)), list(range(16)), [19])


@settings(max_examples=25, deadline=None)
@given(hst.integers(0, 2**32 - 1))
def test_batch_objective_monotone(seed):
    rng = np.random.default_rng(seed)
    t = PosteriorPredictiveTensor(rng.dirichlet(np.ones(2), size=(int(rng.integers(1, 6)), 6)))
    order = rng.permutation(5).tolist()
    values = [an.batch_objective(t, order[:k], [5]) for k in range(6)]
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))


def test_nonsubmodularity_witness():
    w = an.nonsubmodularity_witness()
    assert w["gain_given_A"] == pytest.approx(0.0, abs=1e-12)
    assert w["gain_given_B"] == pytest.approx(LOG2, abs=1e-12)
    assert w["violates_diminishing_returns"]
    assert an.nonsubmodularity_witness() == w


def test_xor_report():
    rep = an.xor_report()
    assert rep["passed"], rep["checks"]
    assert max(rep["single_step_spread"].values()) < 1e-12


# -- linear bound ------------------------------------------------------------------------------

def test_prop1_sweep():
    rng = np.random.default_rng(0)
    model = BayesianLinearGaussian.isotropic(2)
    V = rng.standard_normal((100, 2))
    sweep = an.prop1_sweep(model, V, [1, 10, 100, 1e3, 1e4], direction=[1.0, 0.0])
    assert sweep["violations"] == 0
    rows = sweep["rows"]
    assert rows[2]["I_label_theta"] - rows[0]["I_label_theta"] == pytest.approx(
        0.5 * math.log(1e4 + 1) - 0.5 * math.log(2), abs=1e-12)
    tiny = an.prop1_sweep(model, V, [1e-8])["rows"][0]
    assert max(tiny["I_label_theta"], tiny["mean_I_labels"], tiny["mean_I_residual"]) < 1e-12


def test_prop1_report():
    rep = an.prop1_report()
    assert rep["passed"], rep["checks"]
    assert rep["growth"] >= 8.0


def test_decomposition_report():
    rep = an.decomposition_report(n_models=20)
    assert rep["passed"]
