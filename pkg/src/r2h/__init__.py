"""Desk-scale benchmark harness for conversational navigation helper agents."""

__version__ = "0.1.0"
