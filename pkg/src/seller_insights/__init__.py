"""Conversational analytics over tabular seller data.

A manager/worker agent pipeline: an autoencoder gate filters out-of-domain
questions, a linear router picks between the data presenter and the insight
generator, and the winning worker plans, validates, and executes tabular
retrieval against a typed API registry before generating a guarded answer.
"""

__version__ = "0.1.0"
