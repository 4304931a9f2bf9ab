"""Fixture package used by the pipeline tests."""
