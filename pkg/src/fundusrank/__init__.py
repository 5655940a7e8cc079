"""Feature extraction, feature ranking and tree-ensemble classification for fundus images."""

__version__ = "0.1.0"
