"""Lexical-layer retraining for zero-shot transfer of small BERT-style models."""

__version__ = "0.1.0"
