"""Hybrid wavelet-packet / seasonal-adjustment / BiLSTM wind speed forecasting."""

__version__ = "0.1.0"
