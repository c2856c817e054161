"""Configuration helpers for productae."""
