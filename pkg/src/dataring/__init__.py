"""DataRing: verifiable private data sharing with hidden test queries."""

__version__ = "0.1.0"
