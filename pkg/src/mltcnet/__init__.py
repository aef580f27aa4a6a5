"""Comorbidity progression analysis over first-diagnosis records."""

__version__ = "0.1.0"
