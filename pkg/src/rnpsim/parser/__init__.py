"""Configuration file grammar and parser."""
