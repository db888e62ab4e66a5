"""Reference adapter processes for the corpus pipeline's model protocol."""

__version__ = "0.1.0"
