"""Statistical-robustness toolkit for approximate MCMC samplers."""

__version__ = "0.1.0"
