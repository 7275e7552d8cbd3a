"""Multi-view latent-variable representation learning with classical CCA oracles."""

__version__ = "0.1.0"
