"""Encoder, transition graph, heads and decoder."""
