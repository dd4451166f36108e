"""Zip-code-level vaccine hesitancy prediction from geolocated tweet text.

A library and CLI pipeline: corpus ingestion and geofiltering, tweet text
preprocessing, word-vector embeddings under three token-selection rules,
feature assembly, four regressor families, and tweet-level / zip-level RMSE
evaluation against constant baselines.
"""

__version__ = "0.1.0"
