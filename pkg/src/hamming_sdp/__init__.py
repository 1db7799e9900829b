"""Semidefinite bounds for codes in the Hamming scheme."""
__version__ = "0.1.0"
