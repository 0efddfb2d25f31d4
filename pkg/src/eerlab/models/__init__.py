"""Posterior-predictive producers."""

from eerlab.models.finite import DirichletCategoricalModel
from eerlab.models.linear import BayesianLinearGaussian
from eerlab.models.mlp import DropoutMlp

__all__ = ["BayesianLinearGaussian", "DirichletCategoricalModel", "DropoutMlp"]
