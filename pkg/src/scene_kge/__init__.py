"""Knowledge-graph embeddings for driving-scene understanding."""

__version__ = "0.1.0"
