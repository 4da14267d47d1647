"""Reference HTTP service for the fill protocol."""

__version__ = "0.1.0"
