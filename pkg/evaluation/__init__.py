"""Sampling, generation and automatic metrics."""
