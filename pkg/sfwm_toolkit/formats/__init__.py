"""Readers and writers for the toolkit's data files."""
