"""Context-based spacecraft component detection."""

__version__ = "0.1.0"
