"""Keyword translation from untranscribed speech via term discovery and IBM Model 1."""

__version__ = "0.1.0"
