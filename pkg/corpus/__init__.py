"""Dialogue ingestion, annotation and windowing."""
