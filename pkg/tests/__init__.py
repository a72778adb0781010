"""Test suite for the splatting engine."""
