"""corpus-forge: music corpus curation and evaluation toolkit."""

__version__ = "0.1.0"
