"""Emotional-learning-inspired weighted k-NN forecasting for chaotic series."""

__version__ = "0.1.0"
