"""Offline linear-SVM training and export for the blindprofile model bank."""

__version__ = "0.1.0"
