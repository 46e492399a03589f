"""API modules for route definitions."""
