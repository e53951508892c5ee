"""Pytest configuration; keeps the tests directory importable for cases.py."""
