"""Tip-of-the-tongue retrieval engine.

Curates recall-content pairs from forum archives, builds a multimodal video
corpus, trains a contrastive embedding adapter, evaluates retrieval, and
serves interactive searches.
"""

__version__ = "0.1.0"
