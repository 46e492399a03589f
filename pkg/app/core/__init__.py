"""Core configuration and error handling modules."""
