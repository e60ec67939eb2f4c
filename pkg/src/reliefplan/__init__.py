"""Hurricane relief logistics planning under Markovian storm evolution."""

__version__ = "0.1.0"
