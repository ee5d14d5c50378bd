"""Desk-scale simulator for differentially private federated log anomaly detection."""

__version__ = "0.1.0"
