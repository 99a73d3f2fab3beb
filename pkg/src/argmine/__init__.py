"""Batch argument mining: topic clustering, argument segmentation by BIO
sequence labeling over sentence embeddings, and aspect clustering, with the
full evaluation suite used to score each stage."""

__version__ = "0.1.0"
