"""Continual-learning LSTM engine with keyed cell-state separation."""

__version__ = "0.1.0"
