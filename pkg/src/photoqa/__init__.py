"""Question answering over personal photo albums.

Retrieval (BM25 inverted index over photo metadata) plus a trainable lookup
model that matches retrieved modality text against the multiple choices.
"""

__version__ = "0.1.0"
