"""Retraining-free expected-error-reduction active learning."""

__version__ = "0.1.0"
