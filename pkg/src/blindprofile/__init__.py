"""Two-party private SVM profiling over additive secret sharing.

The client (Alice) holds feature vectors, the server (Bob) holds trained
linear SVMs; a trusted dealer hands out correlated randomness offline.
Classification labels are computed jointly without either side seeing the
other's inputs.
"""

__version__ = "0.1.0"
