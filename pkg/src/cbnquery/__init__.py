"""Exact counterfactual inference over causal Bayesian networks."""

__version__ = "0.1.0"
