"""Propensity-score-matching feature selection for text classification."""

__version__ = "0.1.0"
