"""Self-consistent mixture-of-agents inference with statistical and theory checks."""

__version__ = "0.1.0"
