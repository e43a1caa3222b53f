"""Mixed-integer encodings of message-passing networks for molecular design."""

__version__ = "0.1.0"
