"""Test modules for the Clone Detector."""
