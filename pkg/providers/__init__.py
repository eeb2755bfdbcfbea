"""Knowledge-vector providers for graph initialization and decoding."""
