"""Smoking-risk classification toolkit: ingestion through explanation."""

__version__ = "0.1.0"
