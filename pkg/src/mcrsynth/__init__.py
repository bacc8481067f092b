"""Synthesis of multimodal conversational-recommendation corpora from a product catalog."""

__version__ = "0.1.0"
