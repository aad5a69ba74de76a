"""molscale - two-track molecular pretraining and loss scaling laws at desk scale."""

__version__ = "0.1.0"
