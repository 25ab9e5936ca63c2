"""compbench: synthetic audio-scene benchmark for compositionality of audio embeddings."""

__version__ = "0.1.0"
