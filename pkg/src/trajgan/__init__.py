"""Attention-conditioned GAN trajectory forecasting on a small autodiff core."""

__version__ = "0.1.0"
