"""Capacity/SKU recommendation engine: telemetry rightsizing, profile-based
cold-start provisioning, and feedback-driven personalization."""

__version__ = "0.1.0"
