"""Bayesian parameter shift rules and adaptive-shot VQE optimizers on a statevector simulator."""

__version__ = "0.1.0"
