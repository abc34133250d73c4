"""narvc: non-autoregressive sequence-to-sequence voice conversion toolkit."""

__version__ = "0.1.0"
