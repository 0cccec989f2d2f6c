"""Test-suite wiring; market builders live in helpers.py alongside this file."""
