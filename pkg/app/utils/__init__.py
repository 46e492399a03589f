"""Utility modules for common functionality."""
