"""Dilated gated convolutional tagger for event argument extraction."""

__version__ = "0.1.0"
