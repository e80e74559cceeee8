"""Multi-message broadcast over abstract MAC layers with unreliable links."""

__version__ = "0.1.0"
